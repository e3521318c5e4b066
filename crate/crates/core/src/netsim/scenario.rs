use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::timing::TimingModel;
use crate::error::{Error, Result};
use crate::geo::{quantize, HexCell, PositionLogEntry, ReusePlan};
use crate::seq::SequenceSet;

/// Relative slack for the closed-disk user count.
const DISK_EPS: f64 = 1e-9;
const MOVE_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: u64,
    /// Position at the start of the first superframe, metres.
    pub x: f64,
    pub y: f64,
    /// Fixed local start offset `t_i - S_i` in seconds; drawn per run
    /// when absent.
    #[serde(default)]
    pub offset_s: Option<f64>,
    /// Fixed sequence index into the scenario's set, bypassing the plan.
    #[serde(default)]
    pub sequence: Option<usize>,
}

impl User {
    pub fn at(id: u64, x: f64, y: f64) -> Self {
        Self { id, x, y, offset_s: None, sequence: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub timing: TimingModel,
    /// Hearing radius, metres.
    pub r: f64,
    /// Cell radius, metres.
    pub h: f64,
    pub max_users: usize,
    /// Maximum speed, m/s.
    pub speed: f64,
    pub users: Vec<User>,
    pub set: SequenceSet,
    pub plan: Option<ReusePlan>,
    /// Ignore propagation delay and restrict drawn offsets to whole slots.
    pub slot_synchronized: bool,
    pub superframes: u64,
}

/// Everything fixed for one superframe: positions, offsets (in slots) and
/// sequence indices, one entry per user.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperframeState {
    pub index: u64,
    pub positions: Vec<(f64, f64)>,
    pub offsets: Vec<f64>,
    pub sequences: Vec<usize>,
}

impl SuperframeState {
    pub fn cells(&self, h: f64) -> Vec<HexCell> {
        self.positions.iter().map(|&(x, y)| quantize(x, y, h)).collect()
    }
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn count_in_disk(points: &[(f64, f64)], center: (f64, f64), r: f64) -> usize {
    let lim = r * (1.0 + DISK_EPS);
    points.iter().filter(|&&p| distance(p, center) <= lim).count()
}

/// Centres of the radius-`r` circles through `a` and `b` (empty when the
/// points are more than `2r` apart or coincide).
fn circle_centers(a: (f64, f64), b: (f64, f64), r: f64) -> Vec<(f64, f64)> {
    let d = distance(a, b);
    if d == 0.0 || d > 2.0 * r {
        return Vec::new();
    }
    let mid = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    let off = (r * r - d * d / 4.0).max(0.0).sqrt();
    let (ux, uy) = ((b.1 - a.1) / d, (a.0 - b.0) / d);
    vec![(mid.0 + off * ux, mid.1 + off * uy), (mid.0 - off * ux, mid.1 - off * uy)]
}

/// Largest number of points in a closed disk of radius `r` that contains
/// point `idx`, assuming no disk avoiding it is over-full. Only points
/// within `2r` of it can share such a disk.
fn max_disk_count_near(points: &[(f64, f64)], idx: usize, r: f64) -> usize {
    let a = points[idx];
    let local: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&b| distance(a, b) <= 2.0 * r * (1.0 + DISK_EPS))
        .collect();
    max_users_in_disk(&local, r)
}

/// Largest number of points in any closed disk of radius `r`. An optimal
/// disk can be moved until two points lie on its boundary (or it is
/// centred on a point), so those candidates suffice.
pub fn max_users_in_disk(points: &[(f64, f64)], r: f64) -> usize {
    let mut best = 0;
    for (i, &a) in points.iter().enumerate() {
        best = best.max(count_in_disk(points, a, r));
        for &b in &points[i + 1..] {
            for c in circle_centers(a, b, r) {
                best = best.max(count_in_disk(points, c, r));
            }
        }
    }
    best
}

/// Places `count` users uniformly in `[x0, x1] x [y0, y1]` by rejection so
/// that no disk of radius `r` holds more than `max_users` of them and no
/// two share a quantisation cell of radius `h`.
pub fn place_users(
    count: usize,
    area: [f64; 4],
    r: f64,
    h: f64,
    max_users: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let [x0, y0, x1, y1] = area;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::InvalidScenario("placement area is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(count);
    let mut cells: Vec<HexCell> = Vec::with_capacity(count);
    let budget = 1000 * count.max(1);
    let mut attempts = 0;
    while points.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::InvalidScenario(format!(
                "could not place {count} users with at most {max_users} per disk of radius {r} m"
            )));
        }
        let p = (rng.gen_range(x0..=x1), rng.gen_range(y0..=y1));
        let cell = quantize(p.0, p.1, h);
        if cells.contains(&cell) {
            continue;
        }
        points.push(p);
        if max_disk_count_near(&points, points.len() - 1, r) > max_users {
            points.pop();
            continue;
        }
        cells.push(cell);
    }
    Ok(points)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.r > 0.0 && self.h > 0.0) {
            return bad("R and h must be positive".into());
        }
        if self.superframes == 0 {
            return bad("at least one superframe is required".into());
        }
        match self.set.period() {
            Some(p) if p == self.timing.frame_len => {}
            Some(p) => {
                return bad(format!(
                    "sequence period {p} differs from frame length {}",
                    self.timing.frame_len
                ))
            }
            None => return bad("empty sequence set".into()),
        }
        let mut ids: Vec<u64> = self.users.iter().map(|u| u.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate user id".into());
        }
        let max_offset = self.timing.tau * self.timing.delta_c as f64;
        for u in &self.users {
            if let Some(o) = u.offset_s {
                if !(0.0..=max_offset * (1.0 + 1e-12)).contains(&o) {
                    return bad(format!(
                        "user {} offset {o} s outside [0, tau * delta_c = {max_offset}]",
                        u.id
                    ));
                }
            }
            match u.sequence {
                Some(i) if i >= self.set.len() => {
                    return bad(format!("user {} sequence index {i} out of range", u.id))
                }
                None if self.plan.is_none() => {
                    return bad(format!("user {} has no sequence and there is no plan", u.id))
                }
                _ => {}
            }
        }
        if let Some(plan) = &self.plan {
            if let Some(&worst) = plan.assignment().iter().max() {
                if worst >= self.set.len() {
                    return bad(format!(
                        "plan needs {} sequences, set has {}",
                        worst + 1,
                        self.set.len()
                    ));
                }
            }
        }
        let positions: Vec<(f64, f64)> = self.users.iter().map(|u| (u.x, u.y)).collect();
        let crowd = max_users_in_disk(&positions, self.r);
        if crowd > self.max_users {
            return bad(format!(
                "{crowd} users within one disk of radius {} m exceeds M = {}",
                self.r, self.max_users
            ));
        }
        Ok(())
    }

    /// Position trace: superframe starts `0..superframes`. Each step moves
    /// every user by at most `v T` in a random direction, rejecting moves
    /// that would break the per-disk user bound or, under a plan, put two
    /// users in one cell.
    pub fn trajectories(&self, seed: u64) -> Vec<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut current: Vec<(f64, f64)> = self.users.iter().map(|u| (u.x, u.y)).collect();
        let step = self.speed * self.timing.superframe_time();
        let mut out = vec![current.clone()];
        for _ in 1..self.superframes {
            for i in 0..current.len() {
                if step <= 0.0 {
                    break;
                }
                let home = current[i];
                for _ in 0..MOVE_ATTEMPTS {
                    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                    let len = rng.gen_range(0.0..=step);
                    current[i] = (home.0 + len * angle.cos(), home.1 + len * angle.sin());
                    let cell = quantize(current[i].0, current[i].1, self.h);
                    let shared = self.plan.is_some()
                        && current
                            .iter()
                            .enumerate()
                            .any(|(j, &q)| j != i && quantize(q.0, q.1, self.h) == cell);
                    if !shared && max_disk_count_near(&current, i, self.r) <= self.max_users {
                        break;
                    }
                    current[i] = home;
                }
            }
            out.push(current.clone());
        }
        out
    }

    /// Local start offsets for superframe `k`, in slots.
    fn offsets(&self, seed: u64, k: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 + k);
        let delta_c = self.timing.delta_c;
        self.users
            .iter()
            .map(|u| {
                let drawn = if self.slot_synchronized {
                    rng.gen_range(0..=delta_c) as f64
                } else {
                    rng.gen_range(0.0..=delta_c as f64)
                };
                match u.offset_s {
                    Some(o) => o / self.timing.tau,
                    None => drawn,
                }
            })
            .collect()
    }

    pub fn sequence_for(&self, user: &User, position: (f64, f64)) -> usize {
        match (user.sequence, &self.plan) {
            (Some(i), _) => i,
            (None, Some(plan)) => plan.allocate(quantize(position.0, position.1, self.h)),
            (None, None) => unreachable!("validated"),
        }
    }

    /// Positions, offsets and sequence allocations for every superframe.
    pub fn states(&self, seed: u64) -> Result<Vec<SuperframeState>> {
        self.validate()?;
        let traces = self.trajectories(seed);
        Ok(traces
            .into_iter()
            .enumerate()
            .map(|(k, positions)| {
                let sequences = self
                    .users
                    .iter()
                    .zip(&positions)
                    .map(|(u, &p)| self.sequence_for(u, p))
                    .collect();
                SuperframeState {
                    index: k as u64,
                    offsets: self.offsets(seed, k as u64),
                    positions,
                    sequences,
                }
            })
            .collect())
    }

    pub fn position_log(&self, states: &[SuperframeState]) -> Vec<PositionLogEntry> {
        states
            .iter()
            .flat_map(|s| {
                self.users.iter().zip(s.cells(self.h)).map(move |(u, cell)| PositionLogEntry {
                    user: u.id,
                    superframe: s.index,
                    cell,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_counts() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (10.0, 0.0)];
        assert_eq!(max_users_in_disk(&pts, 1.0), 3);
        assert_eq!(max_users_in_disk(&pts, 0.5), 2);
        assert_eq!(max_users_in_disk(&pts, 0.4), 1);
        assert_eq!(max_users_in_disk(&[], 1.0), 0);
        // three corners of a unit equilateral triangle fit a disk of the
        // circumradius, not less
        let tri = [(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)];
        assert_eq!(max_users_in_disk(&tri, 1.0 / 3f64.sqrt() + 1e-9), 3);
        assert_eq!(max_users_in_disk(&tri, 0.55), 2);
    }

    #[test]
    fn placement_respects_bound() {
        let pts = place_users(40, [0.0, 0.0, 5000.0, 5000.0], 500.0, 50.0, 3, 11).unwrap();
        assert_eq!(pts.len(), 40);
        assert!(max_users_in_disk(&pts, 500.0) <= 3);
        let again = place_users(40, [0.0, 0.0, 5000.0, 5000.0], 500.0, 50.0, 3, 11).unwrap();
        assert_eq!(pts, again);
        assert!(place_users(10, [0.0, 0.0, 10.0, 10.0], 500.0, 1.0, 2, 1).is_err());
    }
}
