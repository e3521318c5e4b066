//! Reed-Solomon based cyclically permutable codes, silent-slot padding,
//! TDMA baselines and frame-length parameter selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{ceil_div, divisors, is_prime, mod_pow, multiplicative_order};
use crate::error::{invalid, Error, Result};
use crate::seq::{BinarySequence, CrtCorrespondence, SequenceSet, SetMeta};

/// Default search caps for the parameter search.
pub const DEFAULT_MAX_P: u64 = 997;
pub const DEFAULT_MAX_N: u64 = 997;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RsCpcParams {
    /// Number of evaluation points (matrix columns).
    pub n: u64,
    /// Field size (matrix rows).
    pub p: u64,
    /// Message dimension.
    pub k: u64,
}

impl RsCpcParams {
    pub fn new(n: u64, p: u64, k: u64) -> Result<Self> {
        let params = Self { n, p, k };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { n, p, k } = *self;
        if !is_prime(p) {
            return Err(invalid(format!("p = {p} is not prime")));
        }
        if !(3 <= k && k < n && n <= p) {
            return Err(invalid(format!("need 3 <= k < n <= p, got n={n} p={p} k={k}")));
        }
        if (p - 1) % n != 0 {
            return Err(invalid(format!(
                "n = {n} does not divide p - 1 = {}; no element of order n",
                p - 1
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> u64 {
        self.n * self.p
    }

    /// Number of codewords, `p^(k-2)`.
    pub fn codeword_count(&self) -> u128 {
        (self.p as u128).pow((self.k - 2) as u32)
    }

    /// Smallest element of multiplicative order `n` in GF(p).
    pub fn alpha(&self) -> u64 {
        (2..self.p)
            .find(|&a| multiplicative_order(a, self.p) == Some(self.n))
            .unwrap_or(1)
    }
}

/// Unit vector of length `p` with its one at position `symbol`.
pub fn vp_represent(symbol: u64, p: u64) -> Result<BinarySequence> {
    if symbol >= p {
        return Err(invalid(format!("symbol {symbol} outside GF({p})")));
    }
    BinarySequence::new(p as usize, [symbol as usize])
}

/// Upper bound on the codeword count `rs_cpc` will materialise.
pub const MAX_CODEWORDS: u128 = 1 << 22;

/// Builds the code from the polynomials `f(x) = x + m_2 x^2 + ... +
/// m_{k-1} x^{k-1}` over GF(p), evaluated at `1, alpha, ..., alpha^{n-1}`.
/// Each codeword's symbol column `j` contributes a one at the CRT position
/// of `(f(alpha^j), j)`.
///
/// Messages are enumerated with `m_2` varying fastest; codeword `i` is
/// labelled `rs{i}`.
pub fn rs_cpc(params: RsCpcParams) -> Result<SequenceSet> {
    params.validate()?;
    if params.codeword_count() > MAX_CODEWORDS {
        return Err(invalid(format!(
            "{} codewords exceed the cap of {MAX_CODEWORDS}",
            params.codeword_count()
        )));
    }
    let RsCpcParams { n, p, k } = params;
    let alpha = params.alpha();
    let crt = CrtCorrespondence::new(p, n)?;
    let points: Vec<u64> = (0..n).map(|j| mod_pow(alpha, j, p)).collect();
    // powers[j][i] = (alpha^j)^i
    let powers: Vec<Vec<u64>> = points
        .iter()
        .map(|&x| (0..k).map(|i| mod_pow(x, i, p)).collect())
        .collect();

    let free = (k - 2) as usize;
    let count = params.codeword_count() as usize;
    let seqs = (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut coeffs = vec![0u64; k as usize];
            coeffs[1] = 1;
            let mut rest = idx as u64;
            for c in coeffs.iter_mut().skip(2).take(free) {
                *c = rest % p;
                rest /= p;
            }
            let ones = powers.iter().enumerate().map(|(j, pw)| {
                let symbol = coeffs
                    .iter()
                    .zip(pw)
                    .fold(0u64, |acc, (&c, &x)| (acc + c * x) % p);
                crt.unmap_unchecked(symbol, j as u64) as usize
            });
            BinarySequence::new(params.period() as usize, ones)
        })
        .collect::<Result<Vec<_>>>()?;

    let meta = SetMeta {
        n: Some(n),
        p: Some(p),
        k: Some(k),
        alpha: Some(alpha),
        ..SetMeta::named("rs_cpc")
    };
    SequenceSet::from_sequences(meta, "rs", seqs)
}

/// Expands every slot into one active slot followed by `delta` silent ones.
pub fn pad_silent(x: &BinarySequence, delta: usize) -> BinarySequence {
    BinarySequence::new(x.period() * (delta + 1), x.pad_positions(delta + 1))
        .expect("scaled positions stay in range")
}

pub fn pad_set(set: &SequenceSet, delta: usize) -> Result<SequenceSet> {
    let members = set
        .iter()
        .map(|(l, s)| (l.to_string(), pad_silent(s, delta)))
        .collect();
    let mut meta = set.meta.clone();
    meta.delta = Some(delta as u64 + meta.delta.unwrap_or(0));
    SequenceSet::new(meta, members)
}

/// One slot per cell, each followed by `delta` silent slots.
pub fn tdma_set(cells: usize, delta: usize) -> Result<SequenceSet> {
    if cells == 0 {
        return Err(invalid("TDMA needs at least one cell"));
    }
    let period = (delta + 1) * cells;
    let seqs = (0..cells)
        .map(|i| BinarySequence::new(period, [(delta + 1) * i]))
        .collect::<Result<Vec<_>>>()?;
    let meta = SetMeta {
        cells: Some(cells as u64),
        delta: Some(delta as u64),
        ..SetMeta::named("tdma")
    };
    SequenceSet::from_sequences(meta, "t", seqs)
}

/// Frame length of the padded TDMA baseline, `(delta + 1) G`.
pub fn tdma_period(cells: u64, delta: u64) -> u64 {
    (delta + 1) * cells
}

/// Weight bound `M` and the quadratic floor `ceil(8 M^2 / 9)` on the
/// period of any slot-synchronous UI set for `M` users.
pub fn length_bounds(max_users: u64) -> (u64, u64) {
    (max_users, ceil_div(8 * max_users * max_users, 9))
}

/// Constraint family for the parameter search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Code-based scheduling under partial synchronisation:
    /// `p^k >= G`, period `(delta + 1) n p`.
    CodeBased { delta: u64 },
    /// Cyclically permutable code for the asynchronous case:
    /// `p^(k-2) >= G`, period `2 n p`.
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_p: u64,
    pub max_n: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_p: DEFAULT_MAX_P, max_n: DEFAULT_MAX_N }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamChoice {
    pub params: RsCpcParams,
    pub period: u64,
}

fn pow_at_least(base: u64, exp: u64, target: u64) -> bool {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc *= base as u128;
        if acc >= target as u128 {
            return true;
        }
    }
    acc >= target as u128
}

/// Exhaustive grid search over admissible `(n, p, k)` minimising the
/// period, subject to `n >= (k-1)(M-1)+1`, `p >= M`, the scheme's size
/// constraint and any extra predicate. Ties go to smaller `p`, then `n`,
/// then `k`.
pub fn search_params<F>(
    max_users: u64,
    cells: u64,
    scheme: Scheme,
    limits: SearchLimits,
    extra: F,
) -> Result<ParamChoice>
where
    F: Fn(&RsCpcParams) -> bool + Sync,
{
    if max_users < 2 {
        return Err(invalid("M must be at least 2"));
    }
    if cells < 1 {
        return Err(invalid("G must be at least 1"));
    }
    let primes: Vec<u64> = (max_users.max(2)..=limits.max_p).filter(|&p| is_prime(p)).collect();
    let best = primes
        .par_iter()
        .filter_map(|&p| {
            let mut local: Option<ParamChoice> = None;
            for n in divisors(p - 1) {
                if n > limits.max_n || n < 4 {
                    continue;
                }
                for k in 3..n {
                    if n < (k - 1) * (max_users - 1) + 1 {
                        break;
                    }
                    let (size_ok, period) = match scheme {
                        Scheme::CodeBased { delta } => (pow_at_least(p, k, cells), (delta + 1) * n * p),
                        Scheme::Cyclic => (pow_at_least(p, k - 2, cells), 2 * n * p),
                    };
                    if !size_ok {
                        continue;
                    }
                    let params = RsCpcParams { n, p, k };
                    if !extra(&params) {
                        continue;
                    }
                    let cand = ParamChoice { params, period };
                    if local.is_none_or(|b| rank(&cand) < rank(&b)) {
                        local = Some(cand);
                    }
                    break;
                }
            }
            local
        })
        .min_by_key(rank);
    best.ok_or(Error::Infeasible { max_p: limits.max_p, max_n: limits.max_n })
}

fn rank(c: &ParamChoice) -> (u64, u64, u64, u64) {
    (c.period, c.params.p, c.params.n, c.params.k)
}

/// Parameters for code-based scheduling padded against `delta` slots of
/// asynchrony: minimises `(delta + 1) n p` subject to `p^k >= G`.
pub fn select_params_prop1(max_users: u64, cells: u64, delta: u64) -> Result<ParamChoice> {
    search_params(max_users, cells, Scheme::CodeBased { delta }, SearchLimits::default(), |_| true)
}

/// Parameters for the cyclically permutable code with one silent slot
/// per slot: minimises `2 n p` subject to `p^(k-2) >= G`.
pub fn select_params_prop2(max_users: u64, cells: u64) -> Result<ParamChoice> {
    search_params(max_users, cells, Scheme::Cyclic, SearchLimits::default(), |_| true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vp_examples() {
        assert_eq!(vp_represent(0, 3).unwrap().to_dense_string(), "100");
        assert_eq!(vp_represent(2, 5).unwrap().to_dense_string(), "00100");
        assert_eq!(vp_represent(6, 7).unwrap().to_dense_string(), "0000001");
        assert!(vp_represent(7, 7).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(RsCpcParams::new(5, 11, 3).is_ok());
        assert!(RsCpcParams::new(5, 12, 3).is_err());
        assert!(RsCpcParams::new(4, 11, 3).is_err()); // 4 does not divide 10
        assert!(RsCpcParams::new(5, 11, 5).is_err());
        assert!(RsCpcParams::new(5, 11, 2).is_err());
        assert_eq!(RsCpcParams::new(5, 11, 3).unwrap().alpha(), 3);
    }

    #[test]
    fn rs_cpc_first_codeword() {
        let set = rs_cpc(RsCpcParams::new(5, 11, 3).unwrap()).unwrap();
        assert_eq!(set.len(), 11);
        assert_eq!(set.period(), Some(55));
        // f(x) = x at powers of 3: symbols (1, 3, 9, 5, 4)
        let crt = CrtCorrespondence::new(11, 5).unwrap();
        let expected: Vec<usize> = [1u64, 3, 9, 5, 4]
            .iter()
            .enumerate()
            .map(|(j, &s)| crt.unmap_unchecked(s, j as u64) as usize)
            .collect();
        let first = set.get(0).unwrap();
        for pos in &expected {
            assert!(first.get(*pos));
        }
        assert!(first.get(45));
        assert_eq!(first.weight(), 5);
    }

    #[test]
    fn padding() {
        let x = BinarySequence::parse_dense("101").unwrap();
        assert_eq!(pad_silent(&x, 1).to_dense_string(), "100010");
        assert_eq!(pad_silent(&x, 0), x);
        let set = rs_cpc(RsCpcParams::new(5, 11, 3).unwrap()).unwrap();
        let padded = pad_silent(set.get(0).unwrap(), 2);
        assert_eq!((padded.period(), padded.weight()), (165, 5));
    }

    #[test]
    fn tdma() {
        let set = tdma_set(4, 0).unwrap();
        assert_eq!(set.get(2).unwrap().to_dense_string(), "0010");
        assert_eq!(tdma_set(4, 1).unwrap().period(), Some(8));
        assert_eq!(tdma_period(333_333, 10), 3_666_663);
        let base = tdma_set(5, 0).unwrap();
        assert_eq!(pad_set(&base, 2).unwrap().as_slice(), tdma_set(5, 2).unwrap().as_slice());
    }

    #[test]
    fn bounds() {
        assert_eq!(length_bounds(3), (3, 8));
        assert_eq!(length_bounds(1), (1, 1));
        assert_eq!(length_bounds(10), (10, 89));
    }

    #[test]
    fn search_rejects_degenerate_inputs() {
        assert!(select_params_prop2(1, 7).is_err());
        assert!(select_params_prop2(3, 0).is_err());
        let tiny = SearchLimits { max_p: 5, max_n: 5 };
        assert!(matches!(
            search_params(3, 7, Scheme::Cyclic, tiny, |_| true),
            Err(Error::Infeasible { max_p: 5, max_n: 5 })
        ));
    }
}
