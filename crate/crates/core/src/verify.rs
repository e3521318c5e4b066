//! Property verifiers over shift assignments of a sequence set.
//!
//! Every verifier stacks the members of a set, each rotated by its own
//! shift, and inspects the columns of the resulting matrix. Exhaustive
//! mode pins the first shift to 0 (all properties here are invariant
//! under a common rotation) and enumerates the remaining `period^(k-1)`
//! assignments; random mode draws assignments from a seeded generator.
//! Both modes split the work across the rayon pool and merge
//! deterministically, so results do not depend on the thread count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seq::{circular_gaps, max_xcorr, BinarySequence, SequenceSet};

pub const DEFAULT_STATE_CAP: u128 = 100_000_000;
const RANDOM_CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exhaustive { cap: u128 },
    Random { samples: u64, seed: u64 },
}

impl Mode {
    pub fn exhaustive() -> Self {
        Mode::Exhaustive { cap: DEFAULT_STATE_CAP }
    }

    pub fn random(samples: u64, seed: u64) -> Self {
        Mode::Random { samples, seed }
    }
}

/// One shift per set member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShiftAssignment(pub Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub property: String,
    pub mode: String,
    /// Number of shift assignments (or pairs, for correlation audits)
    /// examined.
    pub samples: u64,
    pub seed: Option<u64>,
    pub verdict: Verdict,
    pub counterexample: Option<ShiftAssignment>,
    pub stats: BTreeMap<String, u64>,
}

impl VerifyReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn stat(&self, key: &str) -> Option<u64> {
        self.stats.get(key).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Rows of a set after independent rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMatrix {
    period: usize,
    rows: Vec<BinarySequence>,
}

impl StackedMatrix {
    pub fn new(seqs: &[BinarySequence], shifts: &[usize]) -> Result<Self> {
        if seqs.len() != shifts.len() {
            return Err(invalid(format!(
                "{} shifts for {} sequences",
                shifts.len(),
                seqs.len()
            )));
        }
        let rows = seqs
            .iter()
            .zip(shifts)
            .map(|(s, &t)| s.shift(t as i64))
            .collect();
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<BinarySequence>) -> Result<Self> {
        let period = rows.first().map(BinarySequence::period).ok_or_else(|| invalid("no rows"))?;
        if let Some(bad) = rows.iter().find(|r| r.period() != period) {
            return Err(Error::PeriodMismatch(period, bad.period()));
        }
        Ok(Self { period, rows })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn rows(&self) -> &[BinarySequence] {
        &self.rows
    }

    pub fn column_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.period];
        for r in &self.rows {
            for &i in r.ones() {
                counts[i] += 1;
            }
        }
        counts
    }

    pub fn zero_columns(&self) -> Vec<usize> {
        self.column_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Columns where `row` holds the only one.
pub fn conflict_free_positions(m: &StackedMatrix, row: usize) -> Result<Vec<usize>> {
    let r = m
        .rows
        .get(row)
        .ok_or_else(|| invalid(format!("row {row} outside a {}-row matrix", m.rows.len())))?;
    let counts = m.column_counts();
    Ok(r.ones().iter().copied().filter(|&i| counts[i] == 1).collect())
}

/// Whether each row of the stacked matrix has a conflict-free one.
pub fn rows_with_conflict_free(seqs: &[BinarySequence], shifts: &[usize]) -> Result<Vec<bool>> {
    let m = StackedMatrix::new(seqs, shifts)?;
    let counts = m.column_counts();
    Ok(m.rows.iter().map(|r| r.ones().iter().any(|&i| counts[i] == 1)).collect())
}

/// Per-assignment result fed into the sweep merge.
#[derive(Debug, Clone, Copy, Default)]
struct Observation {
    violated: bool,
    /// Merged with `min`.
    low: Option<u64>,
    /// Merged with `max`.
    high: Option<u64>,
}

#[derive(Debug, Clone, Default)]
struct SweepResult {
    examined: u64,
    low: Option<u64>,
    high: Option<u64>,
    /// Ordering key plus the assignment.
    first_violation: Option<(Vec<usize>, Vec<usize>)>,
}

impl SweepResult {
    fn absorb(&mut self, key: &[usize], shifts: &[usize], obs: Observation) {
        self.examined += 1;
        if let Some(v) = obs.low {
            self.low = Some(self.low.map_or(v, |l| l.min(v)));
        }
        if let Some(v) = obs.high {
            self.high = Some(self.high.map_or(v, |h| h.max(v)));
        }
        if obs.violated && self.first_violation.as_ref().is_none_or(|(k, _)| key < k.as_slice()) {
            self.first_violation = Some((key.to_vec(), shifts.to_vec()));
        }
    }

    fn merge(mut self, other: SweepResult) -> SweepResult {
        self.examined += other.examined;
        self.low = match (self.low, other.low) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.high = match (self.high, other.high) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.first_violation = match (self.first_violation, other.first_violation) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

/// Column occupancy of the rotated rows, maintained incrementally.
struct Scratch {
    period: usize,
    counts: Vec<u32>,
}

impl Scratch {
    fn new(period: usize) -> Self {
        Self { period, counts: vec![0; period] }
    }

    fn place(&mut self, rows: &[BinarySequence], shifts: &[usize]) {
        for (r, &s) in rows.iter().zip(shifts) {
            for &i in r.ones() {
                self.counts[(i + s) % self.period] += 1;
            }
        }
    }

    fn clear(&mut self, rows: &[BinarySequence], shifts: &[usize]) {
        for (r, &s) in rows.iter().zip(shifts) {
            for &i in r.ones() {
                self.counts[(i + s) % self.period] -= 1;
            }
        }
    }

    fn conflict_free(&self, row: &BinarySequence, shift: usize) -> impl Iterator<Item = usize> + '_ {
        let period = self.period;
        let ones: Vec<usize> = row.ones().iter().map(|&i| (i + shift) % period).collect();
        ones.into_iter().filter(move |&c| self.counts[c] == 1)
    }
}

fn mode_name(mode: Mode) -> (&'static str, Option<u64>) {
    match mode {
        Mode::Exhaustive { .. } => ("exhaustive", None),
        Mode::Random { seed, .. } => ("random", Some(seed)),
    }
}

fn common_period(rows: &[BinarySequence]) -> Result<usize> {
    let period = rows.first().map(BinarySequence::period).ok_or_else(|| invalid("empty set"))?;
    if let Some(bad) = rows.iter().find(|r| r.period() != period) {
        return Err(Error::PeriodMismatch(period, bad.period()));
    }
    Ok(period)
}

/// Number of assignments exhaustive mode would visit.
pub fn exhaustive_state_count(rows: usize, period: usize) -> u128 {
    (period as u128).saturating_pow(rows.saturating_sub(1) as u32)
}

fn sweep<E>(rows: &[BinarySequence], mode: Mode, eval: E) -> Result<SweepResult>
where
    E: Fn(&Scratch, &[usize]) -> Observation + Sync,
{
    let period = common_period(rows)?;
    let k = rows.len();
    let run_one = |scratch: &mut Scratch, shifts: &[usize]| {
        scratch.place(rows, shifts);
        let obs = eval(scratch, shifts);
        scratch.clear(rows, shifts);
        obs
    };

    match mode {
        Mode::Exhaustive { cap } => {
            let needed = exhaustive_state_count(k, period);
            if needed > cap {
                return Err(Error::StateSpaceTooLarge { needed, cap });
            }
            if k == 1 {
                let mut scratch = Scratch::new(period);
                let mut res = SweepResult::default();
                let obs = run_one(&mut scratch, &[0]);
                res.absorb(&[0], &[0], obs);
                return Ok(res);
            }
            let res = (0..period)
                .into_par_iter()
                .map(|s1| {
                    let mut scratch = Scratch::new(period);
                    let mut res = SweepResult::default();
                    let mut shifts = vec![0usize; k];
                    shifts[1] = s1;
                    loop {
                        let obs = run_one(&mut scratch, &shifts);
                        res.absorb(&shifts, &shifts, obs);
                        // odometer over rows 2..k, last row fastest
                        let mut pos = k;
                        loop {
                            if pos <= 2 {
                                return res;
                            }
                            pos -= 1;
                            shifts[pos] += 1;
                            if shifts[pos] < period {
                                break;
                            }
                            shifts[pos] = 0;
                        }
                    }
                })
                .reduce(SweepResult::default, SweepResult::merge);
            Ok(res)
        }
        Mode::Random { samples, seed } => {
            let chunks = samples.div_ceil(RANDOM_CHUNK);
            let res = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c);
                    let mut scratch = Scratch::new(period);
                    let mut res = SweepResult::default();
                    let mut shifts = vec![0usize; k];
                    let start = c * RANDOM_CHUNK;
                    let end = samples.min(start + RANDOM_CHUNK);
                    for idx in start..end {
                        for s in shifts.iter_mut().skip(1) {
                            *s = rng.gen_range(0..period);
                        }
                        let obs = run_one(&mut scratch, &shifts);
                        res.absorb(&[idx as usize], &shifts, obs);
                    }
                    res
                })
                .reduce(SweepResult::default, SweepResult::merge);
            Ok(res)
        }
    }
}

fn report(property: &str, mode: Mode, res: SweepResult, stats: BTreeMap<String, u64>) -> VerifyReport {
    let (name, seed) = mode_name(mode);
    let counterexample = res.first_violation.map(|(_, s)| ShiftAssignment(s));
    VerifyReport {
        property: property.to_string(),
        mode: name.to_string(),
        samples: res.examined,
        seed,
        verdict: if counterexample.is_some() { Verdict::Violated } else { Verdict::Holds },
        counterexample,
        stats,
    }
}

/// User-Irrepressibility: under every shift assignment each row keeps a
/// conflict-free one (equivalently the stacked matrix contains a
/// permutation submatrix).
pub fn is_ui(set: &SequenceSet, mode: Mode) -> Result<VerifyReport> {
    let rows = set.as_slice();
    let res = sweep(rows, mode, |scratch, shifts| {
        let min_cf = rows
            .iter()
            .zip(shifts)
            .map(|(r, &s)| scratch.conflict_free(r, s).count() as u64)
            .min()
            .unwrap_or(0);
        Observation { violated: min_cf == 0, low: Some(min_cf), high: None }
    })?;
    let mut stats = BTreeMap::new();
    if let Some(v) = res.low {
        stats.insert("min_conflict_free".to_string(), v);
    }
    Ok(report("ui", mode, res, stats))
}

fn resolve_protected<S: AsRef<str>>(set: &SequenceSet, protected: &[S]) -> Result<Vec<usize>> {
    protected
        .iter()
        .map(|l| {
            set.index_of(l.as_ref())
                .ok_or_else(|| invalid(format!("protected label {:?} not in set", l.as_ref())))
        })
        .collect()
}

/// Minimum number of conflict-free ones per period over the protected
/// rows; violated when it drops below `threshold`.
pub fn min_conflict_free_count<S: AsRef<str>>(
    set: &SequenceSet,
    protected: &[S],
    threshold: u64,
    mode: Mode,
) -> Result<VerifyReport> {
    let rows = set.as_slice();
    let idx = resolve_protected(set, protected)?;
    let res = sweep(rows, mode, |scratch, shifts| {
        let min_cf = idx
            .iter()
            .map(|&i| scratch.conflict_free(&rows[i], shifts[i]).count() as u64)
            .min()
            .unwrap_or(u64::MAX);
        Observation { violated: min_cf < threshold, low: Some(min_cf), high: None }
    })?;
    let mut stats = BTreeMap::from([("threshold".to_string(), threshold)]);
    if let Some(v) = res.low {
        stats.insert("min_conflict_free".to_string(), v);
    }
    Ok(report("cf-count", mode, res, stats))
}

/// Largest circular gap between consecutive conflict-free ones of any
/// protected row; violated when it exceeds `bound`. A row with no
/// conflict-free one has an unbounded gap, recorded as `u64::MAX`.
pub fn max_conflict_free_gap<S: AsRef<str>>(
    set: &SequenceSet,
    protected: &[S],
    bound: u64,
    mode: Mode,
) -> Result<VerifyReport> {
    let rows = set.as_slice();
    let idx = resolve_protected(set, protected)?;
    let period = common_period(rows)?;
    let res = sweep(rows, mode, |scratch, shifts| {
        let mut worst = 0u64;
        for &i in &idx {
            let mut cf: Vec<usize> = scratch.conflict_free(&rows[i], shifts[i]).collect();
            if cf.is_empty() {
                worst = u64::MAX;
                break;
            }
            cf.sort_unstable();
            let gap = circular_gaps(&cf, period).max().unwrap_or(period) as u64;
            worst = worst.max(gap);
        }
        Observation { violated: worst > bound, low: None, high: Some(worst) }
    })?;
    let mut stats = BTreeMap::from([("bound".to_string(), bound)]);
    if let Some(v) = res.high {
        stats.insert("max_gap".to_string(), v);
    }
    Ok(report("cf-gap", mode, res, stats))
}

/// Longest circular run of non-zero columns given the zero columns.
fn longest_nonzero_run(zero_cols: &[usize], period: usize) -> usize {
    if zero_cols.is_empty() {
        return period;
    }
    circular_gaps(zero_cols, period).map(|g| g - 1).max().unwrap_or(0)
}

/// Every circular window of `window` consecutive columns contains an
/// all-zero column.
pub fn zero_column_window(f: &StackedMatrix, window: usize) -> VerifyReport {
    let zero = f.zero_columns();
    let run = longest_nonzero_run(&zero, f.period);
    let holds = !zero.is_empty() && run < window;
    VerifyReport {
        property: "window".to_string(),
        mode: "single".to_string(),
        samples: 1,
        seed: None,
        verdict: if holds { Verdict::Holds } else { Verdict::Violated },
        counterexample: None,
        stats: BTreeMap::from([
            ("window".to_string(), window as u64),
            ("longest_nonzero_run".to_string(), run as u64),
        ]),
    }
}

/// [`zero_column_window`] over shift assignments of the set's members.
pub fn zero_column_window_audit(set: &SequenceSet, window: usize, mode: Mode) -> Result<VerifyReport> {
    let rows = set.as_slice();
    let period = common_period(rows)?;
    let res = sweep(rows, mode, |scratch, _| {
        let zero: Vec<usize> = (0..period).filter(|&c| scratch.counts[c] == 0).collect();
        let run = longest_nonzero_run(&zero, period);
        Observation { violated: zero.is_empty() || run >= window, low: None, high: Some(run as u64) }
    })?;
    let mut stats = BTreeMap::from([("window".to_string(), window as u64)]);
    if let Some(v) = res.high {
        stats.insert("longest_nonzero_run".to_string(), v);
    }
    Ok(report("window", mode, res, stats))
}

/// Maximum Hamming cross-correlation over unordered pairs of distinct
/// members and all shifts; violated when it exceeds `bound`. The
/// counterexample shifts the second sequence of the worst pair.
pub fn xcorr_bound_audit(set: &SequenceSet, bound: u64) -> Result<VerifyReport> {
    let rows = set.as_slice();
    common_period(rows)?;
    let pairs: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|i| (i + 1..rows.len()).map(move |j| (i, j)))
        .collect();
    let worst = pairs
        .par_iter()
        .map(|&(i, j)| max_xcorr(&rows[i], &rows[j]).map(|(h, t)| (h, i, j, t)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max_by_key(|&(h, i, j, t)| (h, std::cmp::Reverse((i, j, t))));

    let mut stats = BTreeMap::from([("bound".to_string(), bound)]);
    let mut counterexample = None;
    if let Some((h, i, j, t)) = worst {
        stats.insert("max_xcorr".to_string(), h as u64);
        stats.insert("pair_a".to_string(), i as u64);
        stats.insert("pair_b".to_string(), j as u64);
        stats.insert("shift".to_string(), t as u64);
        if h as u64 > bound {
            let mut shifts = vec![0; rows.len()];
            shifts[j] = t;
            counterexample = Some(ShiftAssignment(shifts));
        }
    }
    Ok(VerifyReport {
        property: "xcorr".to_string(),
        mode: "exhaustive".to_string(),
        samples: pairs.len() as u64,
        seed: None,
        verdict: if counterexample.is_some() { Verdict::Violated } else { Verdict::Holds },
        counterexample,
        stats,
    })
}

/// Every member has minimum separation at least `bound`.
pub fn separation_audit(set: &SequenceSet, bound: u64) -> Result<VerifyReport> {
    let mut worst: Option<(usize, usize)> = None;
    for (i, s) in set.sequences().enumerate() {
        let sep = s.min_separation()?;
        if worst.is_none_or(|(w, _)| sep < w) {
            worst = Some((sep, i));
        }
    }
    let mut stats = BTreeMap::from([("bound".to_string(), bound)]);
    let mut violated = false;
    if let Some((sep, i)) = worst {
        stats.insert("min_separation".to_string(), sep as u64);
        stats.insert("member".to_string(), i as u64);
        violated = (sep as u64) < bound;
    }
    Ok(VerifyReport {
        property: "separation".to_string(),
        mode: "exhaustive".to_string(),
        samples: set.len() as u64,
        seed: None,
        verdict: if violated { Verdict::Violated } else { Verdict::Holds },
        counterexample: None,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crt::crt0_set;
    use crate::seq::SetMeta;

    fn set_of(dense: &[&str]) -> SequenceSet {
        let seqs = dense.iter().map(|d| BinarySequence::parse_dense(d).unwrap()).collect();
        SequenceSet::from_sequences(SetMeta::named("test"), "s", seqs).unwrap()
    }

    #[test]
    fn ui_counterexample() {
        let r = is_ui(&set_of(&["10", "01"]), Mode::exhaustive()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.counterexample, Some(ShiftAssignment(vec![0, 1])));
    }

    #[test]
    fn ui_single_and_crt0() {
        assert!(is_ui(&set_of(&["0100"]), Mode::exhaustive()).unwrap().holds());
        let r = is_ui(&crt0_set(3, 5).unwrap(), Mode::exhaustive()).unwrap();
        assert!(r.holds());
        assert_eq!(r.samples, 225);
    }

    #[test]
    fn state_cap() {
        let set = crt0_set(5, 9).unwrap();
        let err = is_ui(&set, Mode::Exhaustive { cap: 1000 }).unwrap_err();
        assert!(matches!(err, Error::StateSpaceTooLarge { needed: 4_100_625, cap: 1000 }));
    }

    #[test]
    fn conflict_free_examples() {
        let m = StackedMatrix::from_rows(vec![
            BinarySequence::parse_dense("100").unwrap(),
            BinarySequence::parse_dense("010").unwrap(),
        ])
        .unwrap();
        assert_eq!(conflict_free_positions(&m, 0).unwrap(), vec![0]);
        let m = StackedMatrix::from_rows(vec![
            BinarySequence::parse_dense("110").unwrap(),
            BinarySequence::parse_dense("100").unwrap(),
        ])
        .unwrap();
        assert_eq!(conflict_free_positions(&m, 0).unwrap(), vec![1]);
        let same = BinarySequence::parse_dense("1101").unwrap();
        let m = StackedMatrix::from_rows(vec![same.clone(), same]).unwrap();
        assert!(conflict_free_positions(&m, 1).unwrap().is_empty());
        assert!(conflict_free_positions(&m, 2).is_err());
    }

    #[test]
    fn lone_row_counts() {
        let set = set_of(&["1001001001"]);
        let r = min_conflict_free_count(&set, &["s0"], 1, Mode::exhaustive()).unwrap();
        assert_eq!(r.stat("min_conflict_free"), Some(4));
        let uniform = set_of(&["100100100100"]);
        let r = max_conflict_free_gap(&uniform, &["s0"], 3, Mode::exhaustive()).unwrap();
        assert_eq!(r.stat("max_gap"), Some(3));
        assert!(r.holds());
        assert!(min_conflict_free_count(&set, &["nope"], 1, Mode::exhaustive()).is_err());
    }

    #[test]
    fn window_examples() {
        let c0 = crt0_set(3, 5).unwrap();
        let f = StackedMatrix::new(c0.as_slice(), &[0, 0, 0]).unwrap();
        assert!(zero_column_window(&f, 6).holds());
        let ones = StackedMatrix::from_rows(vec![BinarySequence::parse_dense("1111").unwrap()]).unwrap();
        assert!(!zero_column_window(&ones, 4).holds());
        assert!(!zero_column_window(&ones, 100).holds());
        let r = zero_column_window_audit(&c0, 6, Mode::exhaustive()).unwrap();
        assert!(r.holds());
        assert_eq!(r.samples, 225);
    }

    #[test]
    fn xcorr_audit_examples() {
        assert!(xcorr_bound_audit(&crt0_set(3, 5).unwrap(), 1).unwrap().holds());
        let dup = set_of(&["11010", "11010"]);
        let r = xcorr_bound_audit(&dup, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.stat("max_xcorr"), Some(3));
        assert_eq!(r.counterexample, Some(ShiftAssignment(vec![0, 0])));
    }

    #[test]
    fn separation_examples() {
        let r = separation_audit(&crt0_set(3, 5).unwrap(), 3).unwrap();
        assert!(r.holds());
        assert_eq!(r.stat("min_separation"), Some(3));
        assert!(!separation_audit(&set_of(&["1100"]), 2).unwrap().holds());
    }

    #[test]
    fn random_mode_is_reproducible() {
        let set = crt0_set(5, 9).unwrap();
        let a = is_ui(&set, Mode::random(5000, 7)).unwrap();
        let b = is_ui(&set, Mode::random(5000, 7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples, 5000);
        assert_eq!(a.seed, Some(7));
    }
}
