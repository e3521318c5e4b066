//! Hexagonal quantisation cells, cluster sizing and the cochannel reuse
//! lattice that maps cells to sequence indices.
//!
//! Cells are identified by oblique coordinates `(m, n)` on axes meeting at
//! sixty degrees; the centre of `(m, n)` is `m e1 + n e2` with
//! `e1 = (d, 0)`, `e2 = (d/2, d sqrt(3)/2)` and `d = sqrt(3) h`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::arith::ext_gcd;
use crate::error::{invalid, Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Relative slack when comparing a Loeschian value or a distance against
/// a floating-point target.
const REL_EPS: f64 = 1e-9;

pub fn cell_spacing(h: f64) -> f64 {
    SQRT3 * h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HexCell {
    pub m: i64,
    pub n: i64,
}

impl HexCell {
    pub const fn new(m: i64, n: i64) -> Self {
        Self { m, n }
    }

    pub fn center(&self, h: f64) -> (f64, f64) {
        let d = cell_spacing(h);
        (d * (self.m as f64 + 0.5 * self.n as f64), d * SQRT3 / 2.0 * self.n as f64)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (m, n) = text
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("cell {text:?} is not \"m,n\"")))?;
        let m = m.trim().parse().map_err(|_| Error::Parse(format!("bad cell {text:?}")))?;
        let n = n.trim().parse().map_err(|_| Error::Parse(format!("bad cell {text:?}")))?;
        Ok(Self { m, n })
    }
}

impl std::fmt::Display for HexCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.m, self.n)
    }
}

/// Norm `u^2 + u v + v^2` of a lattice difference.
pub fn loeschian_norm(u: i64, v: i64) -> i64 {
    u * u + u * v + v * v
}

/// Nearest cell centre to `(x, y)`; exact ties go to the smaller `(m, n)`.
pub fn quantize(x: f64, y: f64, h: f64) -> HexCell {
    let d = cell_spacing(h);
    let nf = y / (d * SQRT3 / 2.0);
    let mf = x / d - 0.5 * nf;
    let (m0, n0) = (mf.floor() as i64, nf.floor() as i64);
    let mut best: Option<(f64, HexCell)> = None;
    for n in n0 - 1..=n0 + 2 {
        for m in m0 - 1..=m0 + 2 {
            let c = HexCell::new(m, n);
            let (cx, cy) = c.center(h);
            let dist = (cx - x).powi(2) + (cy - y).powi(2);
            let better = match best {
                None => true,
                Some((bd, bc)) => dist < bd || (dist == bd && c < bc),
            };
            if better {
                best = Some((dist, c));
            }
        }
    }
    best.expect("candidate window is non-empty").1
}

/// Euclidean distance between cell centres.
pub fn cell_distance(a: HexCell, b: HexCell, h: f64) -> f64 {
    cell_spacing(h) * (loeschian_norm(a.m - b.m, a.n - b.n) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterSize {
    pub g: u64,
    pub b1: u64,
    pub b2: u64,
}

/// Smallest Loeschian number `b1^2 + b1 b2 + b2^2 >= target` with witnesses
/// `b1 >= b2 >= 0`; among equal values the smallest `b2` is reported.
pub fn cluster_size_for_target(target: f64) -> ClusterSize {
    let target = target.max(1.0);
    let floor = target * (1.0 - REL_EPS);
    let mut best: Option<ClusterSize> = None;
    let mut b2: u64 = 0;
    loop {
        let base = 3 * b2 * b2;
        if let Some(b) = best {
            if base > b.g {
                break;
            }
        }
        // least b1 >= b2 with b1^2 + b1 b2 + b2^2 >= floor
        let disc = (b2 * b2) as f64 - 4.0 * ((b2 * b2) as f64 - floor);
        let mut b1 = (((-(b2 as f64) + disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as u64).max(b2);
        while b1 > b2 && ((b1 - 1).pow(2) + (b1 - 1) * b2 + b2 * b2) as f64 >= floor {
            b1 -= 1;
        }
        while ((b1 * b1 + b1 * b2 + b2 * b2) as f64) < floor {
            b1 += 1;
        }
        let g = b1 * b1 + b1 * b2 + b2 * b2;
        if best.is_none_or(|b| g < b.g) {
            best = Some(ClusterSize { g, b1, b2 });
        }
        b2 += 1;
    }
    best.expect("loop runs at least once")
}

/// Cluster size for hearing radius `r` and cell radius `h`: the target is
/// `(2R/d)^2 = 4 R^2 / (3 h^2)`.
pub fn cluster_size(r: f64, h: f64) -> ClusterSize {
    cluster_size_for_target(4.0 * r * r / (3.0 * h * h))
}

/// Sublattice generated by `u1 = (b1, b2)` and `u2 = (-b2, b1 + b2)`, kept
/// in the triangular form `{(a, 0), (c, g)}` with `a g = G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ReuseLattice {
    a: i64,
    c: i64,
    g: i64,
}

impl ReuseLattice {
    fn new(b1: u64, b2: u64) -> Result<Self> {
        let (b1, b2) = (b1 as i64, b2 as i64);
        let det = b1 * b1 + b1 * b2 + b2 * b2;
        if det == 0 {
            return Err(invalid("b1 and b2 cannot both be zero"));
        }
        // x u1 + y u2 has n-component x b2 + y (b1 + b2) = g
        let (g, x, y) = ext_gcd(b2, b1 + b2);
        let c0 = x * b1 - y * b2;
        let a = det / g;
        Ok(Self { a, c: c0.rem_euclid(a), g })
    }

    fn coset_index(&self, cell: HexCell) -> usize {
        let t = cell.n.div_euclid(self.g);
        let n_rem = cell.n.rem_euclid(self.g);
        let m_rem = (cell.m - t * self.c).rem_euclid(self.a);
        (n_rem * self.a + m_rem) as usize
    }

    fn representative(&self, index: usize) -> HexCell {
        let index = index as i64;
        HexCell::new(index % self.a, index / self.a)
    }
}

/// Cluster parameters plus the one-to-one map from reuse cosets to
/// sequence indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReusePlan {
    pub h: f64,
    pub r: f64,
    pub g: u64,
    pub b1: u64,
    pub b2: u64,
    lattice: ReuseLattice,
    /// Sequence index per coset index.
    assignment: Vec<usize>,
}

impl ReusePlan {
    /// Plan with the identity assignment (coset `i` uses sequence `i`).
    pub fn new(r: f64, h: f64, cluster: ClusterSize) -> Result<Self> {
        if !(r > 0.0 && h > 0.0) {
            return Err(invalid("R and h must be positive"));
        }
        let lattice = ReuseLattice::new(cluster.b1, cluster.b2)?;
        let g = cluster.b1 * cluster.b1 + cluster.b1 * cluster.b2 + cluster.b2 * cluster.b2;
        if g != cluster.g {
            return Err(invalid(format!(
                "G = {} does not equal b1^2 + b1 b2 + b2^2 = {g}",
                cluster.g
            )));
        }
        Ok(Self {
            h,
            r,
            g,
            b1: cluster.b1,
            b2: cluster.b2,
            lattice,
            assignment: (0..g as usize).collect(),
        })
    }

    /// Plan sized by [`cluster_size`].
    pub fn for_radius(r: f64, h: f64) -> Result<Self> {
        Self::new(r, h, cluster_size(r, h))
    }

    pub fn with_assignment(mut self, assignment: Vec<usize>) -> Result<Self> {
        if assignment.len() != self.g as usize {
            return Err(invalid(format!(
                "assignment has {} entries, expected G = {}",
                assignment.len(),
                self.g
            )));
        }
        let distinct: BTreeSet<usize> = assignment.iter().copied().collect();
        if distinct.len() != assignment.len() {
            return Err(invalid("assignment must be one-to-one"));
        }
        self.assignment = assignment;
        Ok(self)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Coset of the cell in the reuse lattice, in `[0, G)`.
    pub fn coset_index(&self, cell: HexCell) -> usize {
        self.lattice.coset_index(cell)
    }

    /// Canonical representative of coset `index`.
    pub fn representative(&self, index: usize) -> HexCell {
        self.lattice.representative(index)
    }

    /// Sequence index allocated to the cell.
    pub fn allocate(&self, cell: HexCell) -> usize {
        self.assignment[self.coset_index(cell)]
    }

    /// Lattice generators `(b1, b2)` and `(-b2, b1 + b2)`.
    pub fn generators(&self) -> [(i64, i64); 2] {
        let (b1, b2) = (self.b1 as i64, self.b2 as i64);
        [(b1, b2), (-b2, b1 + b2)]
    }

    /// Distance between distinct cells sharing a sequence, `d sqrt(G)`.
    pub fn cochannel_distance(&self) -> f64 {
        cell_spacing(self.h) * (self.g as f64).sqrt()
    }

    /// Whether two cells at this distance may share a sequence.
    pub fn may_share(&self, distance: f64) -> bool {
        distance >= 2.0 * self.r * (1.0 - REL_EPS)
    }

    pub fn to_file(&self, labels: Option<&[String]>) -> PlanFile {
        let assignment = self
            .assignment
            .iter()
            .enumerate()
            .map(|(coset, &seq)| {
                let label = labels
                    .and_then(|l| l.get(seq).cloned())
                    .unwrap_or_else(|| seq.to_string());
                (self.representative(coset).to_string(), label)
            })
            .collect();
        PlanFile { h: self.h, r: self.r, g: self.g, b1: self.b1, b2: self.b2, assignment: Some(assignment) }
    }

    /// Rebuilds a plan; assignment labels are looked up in `labels` or
    /// parsed as indices.
    pub fn from_file(file: &PlanFile, labels: Option<&[String]>) -> Result<Self> {
        let plan = Self::new(file.r, file.h, ClusterSize { g: file.g, b1: file.b1, b2: file.b2 })?;
        let Some(map) = &file.assignment else {
            return Ok(plan);
        };
        let mut assignment = vec![usize::MAX; plan.g as usize];
        for (rep, label) in map {
            let coset = plan.coset_index(HexCell::parse(rep)?);
            let seq = labels
                .and_then(|ls| ls.iter().position(|l| l == label))
                .or_else(|| label.parse().ok())
                .ok_or_else(|| invalid(format!("unknown sequence label {label:?}")))?;
            if assignment[coset] != usize::MAX {
                return Err(invalid(format!("coset of {rep} assigned twice")));
            }
            assignment[coset] = seq;
        }
        if assignment.contains(&usize::MAX) {
            return Err(invalid("assignment does not cover every coset"));
        }
        plan.with_assignment(assignment)
    }
}

/// Plan interchange form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub h: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "G")]
    pub g: u64,
    pub b1: u64,
    pub b2: u64,
    /// Coset representative `"m,n"` to sequence label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<BTreeMap<String, String>>,
}

/// Cell occupied by a user at its local start of a superframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionLogEntry {
    pub user: u64,
    pub superframe: u64,
    pub cell: HexCell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FermionViolation {
    pub superframe: u64,
    pub cell: HexCell,
    pub users: Vec<u64>,
}

/// Cells holding two or more distinct users in the same superframe.
pub fn check_fermion(log: &[PositionLogEntry]) -> Vec<FermionViolation> {
    let mut occupancy: BTreeMap<(u64, HexCell), BTreeSet<u64>> = BTreeMap::new();
    for e in log {
        occupancy.entry((e.superframe, e.cell)).or_default().insert(e.user);
    }
    occupancy
        .into_iter()
        .filter(|(_, users)| users.len() >= 2)
        .map(|((superframe, cell), users)| FermionViolation {
            superframe,
            cell,
            users: users.into_iter().collect(),
        })
        .collect()
}
