//! Sequence families built on the CRT correspondence: CRT sequence sets,
//! the modified set `C0(p, q)`, product sequences and the split expansion
//! that lets several users share one base sequence.

use crate::arith::{gcd, is_prime};
use crate::error::{invalid, Error, Result};
use crate::seq::{max_xcorr, BinarySequence, CrtCorrespondence, SequenceSet, SetMeta};

/// Parameters of a CRT sequence set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrtParams {
    pub p: u64,
    pub q: u64,
}

impl CrtParams {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("p = {p} must be at least 2")));
        }
        if gcd(p, q) != 1 {
            return Err(Error::NotCoprime(p, q));
        }
        if q < 2 * p - 1 {
            return Err(invalid(format!("q = {q} must be at least 2p - 1 = {}", 2 * p - 1)));
        }
        Ok(Self { p, q })
    }

    pub fn period(&self) -> usize {
        (self.p * self.q) as usize
    }

    /// Characteristic set `{l : gamma(l) = (j g mod p, j), 0 <= j < p}`.
    pub fn sequence(&self, g: u64) -> Result<BinarySequence> {
        if g >= self.p {
            return Err(invalid(format!("generator {g} outside [0, {})", self.p)));
        }
        let crt = CrtCorrespondence::new(self.p, self.q)?;
        BinarySequence::new(
            self.period(),
            (0..self.p).map(|j| crt.unmap_unchecked(j * g % self.p, j) as usize),
        )
    }

    /// Characteristic set `{l : gamma(l) = (j, 0), 0 <= j < p}`, i.e. the
    /// multiples of `q`.
    pub fn star_sequence(&self) -> Result<BinarySequence> {
        let crt = CrtCorrespondence::new(self.p, self.q)?;
        BinarySequence::new(
            self.period(),
            (0..self.p).map(|j| crt.unmap_unchecked(j, 0) as usize),
        )
    }
}

fn crt_meta(name: &str, params: CrtParams) -> SetMeta {
    SetMeta { p: Some(params.p), q: Some(params.q), ..SetMeta::named(name) }
}

/// `C(p, q)`: one sequence per generator `g` in `[0, p)`, labelled `S_g`.
pub fn crt_set(p: u64, q: u64) -> Result<SequenceSet> {
    let params = CrtParams::new(p, q)?;
    let members = (0..p)
        .map(|g| Ok((format!("S_{g}"), params.sequence(g)?)))
        .collect::<Result<Vec<_>>>()?;
    SequenceSet::new(crt_meta("crt", params), members)
}

/// `C0(p, q)`: `S_0, S_2, ..., S_{p-1}` followed by `S_*`.
pub fn crt0_set(p: u64, q: u64) -> Result<SequenceSet> {
    let params = CrtParams::new(p, q)?;
    let mut members = Vec::with_capacity(p as usize);
    for g in std::iter::once(0).chain(2..p) {
        members.push((format!("S_{g}"), params.sequence(g)?));
    }
    members.push(("S_*".to_string(), params.star_sequence()?));
    SequenceSet::new(crt_meta("crt0", params), members)
}

/// Product sequence: the sequence of period `period(X) * period(Y)` whose
/// CRT matrix has entry `X(i) Y(j)` at `(i, j)`.
pub fn product(x: &BinarySequence, y: &BinarySequence) -> Result<BinarySequence> {
    let crt = CrtCorrespondence::new(x.period() as u64, y.period() as u64)?;
    let mut ones = Vec::with_capacity(x.weight() * y.weight());
    for &i in x.ones() {
        for &j in y.ones() {
            ones.push(crt.unmap_unchecked(i as u64, j as u64) as usize);
        }
    }
    BinarySequence::new(x.period() * y.period(), ones)
}

pub fn all_ones(length: usize) -> Result<BinarySequence> {
    if length == 0 {
        return Err(invalid("all-ones sequence needs length >= 1"));
    }
    BinarySequence::new(length, 0..length)
}

/// Label prefix of the unsplit members `U (x) X`.
pub const UNSPLIT_PREFIX: &str = "U.";

/// Inputs to the split expansion.
#[derive(Debug, Clone)]
pub struct ExpandedSetSpec {
    /// Base set: constant weight, common period `L`.
    pub base: SequenceSet,
    /// The `p` base members that get split.
    pub split_labels: Vec<String>,
    /// Split prime; the split members use `C0(p, 2p - 1)`.
    pub p: u64,
    /// Maximum number of local users.
    pub max_users: u64,
}

/// The expanded set as returned by [`expanded_set`], with its two parts
/// identified by label.
#[derive(Debug, Clone)]
pub struct ExpandedSet {
    pub set: SequenceSet,
    /// Labels of the `U (x) X` members, `X` outside the split subset.
    pub unsplit: Vec<String>,
    /// Labels of the `C_i (x) S_i` members.
    pub split: Vec<String>,
}

impl ExpandedSetSpec {
    fn validate(&self) -> Result<()> {
        let p = self.p;
        if !is_prime(p) {
            return Err(invalid(format!("split parameter p = {p} must be prime")));
        }
        if p > self.max_users {
            return Err(invalid(format!("p = {p} exceeds M = {}", self.max_users)));
        }
        if self.split_labels.len() != p as usize {
            return Err(invalid(format!(
                "{} split labels given, expected p = {p}",
                self.split_labels.len()
            )));
        }
        for (i, l) in self.split_labels.iter().enumerate() {
            if self.base.index_of(l).is_none() {
                return Err(invalid(format!("split label {l:?} not in base set")));
            }
            if self.split_labels[..i].contains(l) {
                return Err(invalid(format!("split label {l:?} repeated")));
            }
        }
        let weights = self.base.weight_profile();
        if weights.len() != 1 {
            return Err(invalid("base set must have constant weight"));
        }
        let base_period = self.base.period().unwrap_or(0) as u64;
        let rows = p * (2 * p - 1);
        if gcd(rows, base_period) != 1 {
            return Err(Error::NotCoprime(rows, base_period));
        }

        // Interference budget: weight n must exceed (M - 1) times the
        // largest pairwise cross-correlation k - 1.
        let n = weights[0] as u64;
        let max_corr = match (self.base.meta.construction.as_str(), self.base.meta.k) {
            ("rs_cpc", Some(k)) => k - 1,
            _ => {
                let seqs = self.base.as_slice();
                let mut h = 0;
                for i in 0..seqs.len() {
                    for j in i + 1..seqs.len() {
                        h = h.max(max_xcorr(&seqs[i], &seqs[j])?.0 as u64);
                    }
                }
                h
            }
        };
        let needed = max_corr * (self.max_users - 1) + 1;
        if n < needed {
            return Err(invalid(format!(
                "base weight {n} below (k-1)(M-1)+1 = {needed}"
            )));
        }
        Ok(())
    }
}

/// Splits `p` base sequences `S_i` into products `C_i (x) S_i` with
/// `C_i` from `C0(p, 2p - 1)` (paired in label order) and replaces every
/// other base sequence `X` by `U (x) X`, `U` the all-ones sequence of
/// length `p(2p - 1)`.
pub fn expanded_set(spec: &ExpandedSetSpec) -> Result<ExpandedSet> {
    spec.validate()?;
    let p = spec.p;
    let rows = p * (2 * p - 1);
    let c0 = crt0_set(p, 2 * p - 1)?;
    let ones = all_ones(rows as usize)?;

    let mut members = Vec::with_capacity(spec.base.len());
    let mut unsplit = Vec::new();
    let mut split = Vec::new();
    for (label, seq) in spec.base.iter() {
        if spec.split_labels.iter().any(|l| l == label) {
            continue;
        }
        let name = format!("{UNSPLIT_PREFIX}{label}");
        members.push((name.clone(), product(&ones, seq)?));
        unsplit.push(name);
    }
    for ((c_label, c), s_label) in c0.iter().zip(&spec.split_labels) {
        let s = spec.base.by_label(s_label).expect("validated");
        let name = format!("{c_label}.{s_label}");
        members.push((name.clone(), product(c, s)?));
        split.push(name);
    }

    let base_meta = &spec.base.meta;
    let meta = SetMeta {
        p: Some(p),
        q: base_meta.p,
        n: base_meta.n.or(Some(spec.base.weight_profile()[0] as u64)),
        k: base_meta.k,
        max_users: Some(spec.max_users),
        base_period: spec.base.period().map(|l| l as u64),
        split_labels: Some(spec.split_labels.clone()),
        ..SetMeta::named("expanded")
    };
    Ok(ExpandedSet { set: SequenceSet::new(meta, members)?, unsplit, split })
}

/// Conflict-free threshold for the unsplit members: `p(3p - 1) / 2`.
pub fn unsplit_conflict_free_threshold(p: u64) -> u64 {
    p * (3 * p - 1) / 2
}

/// Gap bound between consecutive conflict-free ones of unsplit members:
/// `2 p L`, `L` the base period.
pub fn unsplit_gap_bound(p: u64, base_period: u64) -> u64 {
    2 * p * base_period
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_of(s: &BinarySequence) -> Vec<usize> {
        s.ones().to_vec()
    }

    #[test]
    fn crt_sequences() {
        assert_eq!(ones_of(&CrtParams::new(2, 3).unwrap().sequence(0).unwrap()), vec![0, 4]);
        let p35 = CrtParams::new(3, 5).unwrap();
        assert_eq!(ones_of(&p35.sequence(2).unwrap()), vec![0, 7, 11]);
        assert_eq!(ones_of(&p35.sequence(1).unwrap()), vec![0, 1, 2]);
        let set = crt_set(3, 5).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set.sequences().all(|s| s.weight() == 3 && s.period() == 15));
    }

    #[test]
    fn crt0_members() {
        let set = crt0_set(3, 5).unwrap();
        assert_eq!(set.labels(), &["S_0", "S_2", "S_*"]);
        assert_eq!(ones_of(set.by_label("S_0").unwrap()), vec![0, 6, 12]);
        assert_eq!(ones_of(set.by_label("S_2").unwrap()), vec![0, 7, 11]);
        assert_eq!(ones_of(set.by_label("S_*").unwrap()), vec![0, 5, 10]);
        assert_eq!(crt0_set(2, 3).unwrap().labels(), &["S_0", "S_*"]);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(crt_set(3, 6), Err(Error::NotCoprime(3, 6))));
        assert!(crt_set(3, 4).is_err());
        assert!(crt0_set(1, 5).is_err());
        assert!(CrtParams::new(3, 5).unwrap().sequence(3).is_err());
    }

    #[test]
    fn product_examples() {
        let x = BinarySequence::parse_dense("10").unwrap();
        let y = BinarySequence::parse_dense("100").unwrap();
        let xy = product(&x, &y).unwrap();
        assert_eq!((xy.period(), ones_of(&xy)), (6, vec![0]));
        assert_eq!(product(&x.shift(1), &y.shift(1)).unwrap(), xy.shift(1));
        assert_eq!(ones_of(&xy.shift(1)), vec![1]);

        let u = all_ones(2).unwrap();
        let z = BinarySequence::parse_dense("01101").unwrap();
        assert_eq!(product(&u, &z).unwrap().weight(), 6);
        assert!(product(&x, &BinarySequence::parse_dense("1000").unwrap()).is_err());
    }

    #[test]
    fn ones_repeat_under_product() {
        assert_eq!(ones_of(&all_ones(3).unwrap()), vec![0, 1, 2]);
        assert_eq!(all_ones(15).unwrap().weight(), 15);
        assert!(all_ones(0).is_err());
        let x = BinarySequence::parse_dense("100").unwrap();
        let ux = product(&all_ones(5).unwrap(), &x).unwrap();
        assert_eq!(ones_of(&ux), vec![0, 3, 6, 9, 12]);
    }

    #[test]
    fn thresholds() {
        assert_eq!(unsplit_conflict_free_threshold(3), 12);
        assert_eq!(unsplit_conflict_free_threshold(5), 35);
        assert_eq!(unsplit_gap_bound(3, 35), 210);
    }
}
