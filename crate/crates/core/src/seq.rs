//! Periodic binary sequences and the operations the constructions and
//! verifiers are built from.
//!
//! A sequence is stored by its characteristic set: the sorted positions in
//! `[0, period)` that hold a one. Position 0 is the first slot of a period.
//! The rightward cyclic shift `R` moves the entry at position `i` to
//! position `i + 1 (mod period)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::{divisors, gcd, mod_inverse};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinarySequence {
    period: usize,
    ones: Vec<usize>,
}

impl BinarySequence {
    /// Builds a sequence from a list of one-positions (any order).
    pub fn new(period: usize, ones: impl IntoIterator<Item = usize>) -> Result<Self> {
        if period == 0 {
            return Err(invalid("period must be positive"));
        }
        let mut ones: Vec<usize> = ones.into_iter().collect();
        ones.sort_unstable();
        if let Some(&last) = ones.last() {
            if last >= period {
                return Err(invalid(format!("position {last} outside [0, {period})")));
            }
        }
        if ones.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate position in characteristic set"));
        }
        Ok(Self { period, ones })
    }

    pub fn zeros(period: usize) -> Result<Self> {
        Self::new(period, [])
    }

    pub fn from_dense(bits: &[bool]) -> Result<Self> {
        Self::new(
            bits.len(),
            bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i),
        )
    }

    /// Parses the textual form: a string of `0`/`1`, leftmost is position 0.
    /// Whitespace, commas and underscores are ignored.
    pub fn parse_dense(text: &str) -> Result<Self> {
        let mut bits = Vec::new();
        for ch in text.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() || c == ',' || c == '_' => {}
                c => return Err(Error::Parse(format!("unexpected character {c:?} in sequence"))),
            }
        }
        Self::from_dense(&bits)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn ones(&self) -> &[usize] {
        &self.ones
    }

    pub fn weight(&self) -> usize {
        self.ones.len()
    }

    pub fn is_zero(&self) -> bool {
        self.ones.is_empty()
    }

    pub fn get(&self, pos: usize) -> bool {
        self.ones.binary_search(&(pos % self.period)).is_ok()
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut bits = vec![false; self.period];
        for &i in &self.ones {
            bits[i] = true;
        }
        bits
    }

    pub fn to_dense_string(&self) -> String {
        self.to_dense().iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// `R^t` applied to the sequence; negative `t` shifts left.
    pub fn shift(&self, t: i64) -> Self {
        let n = self.period as i64;
        let t = t.rem_euclid(n) as usize;
        if t == 0 {
            return self.clone();
        }
        let mut ones: Vec<usize> = self.ones.iter().map(|&i| (i + t) % self.period).collect();
        ones.sort_unstable();
        Self { period: self.period, ones }
    }

    /// Smallest `t >= 1` with `R^t X = X`. Always divides the period.
    pub fn cyclic_order(&self) -> usize {
        for d in divisors(self.period as u64) {
            let d = d as usize;
            if self.ones.iter().all(|&i| self.get(i + d)) {
                return d;
            }
        }
        self.period
    }

    /// Minimum circular distance between consecutive ones.
    pub fn min_separation(&self) -> Result<usize> {
        if self.weight() < 2 {
            return Err(invalid("minimum separation needs weight >= 2"));
        }
        Ok(circular_gaps(&self.ones, self.period).min().unwrap_or(self.period))
    }

    pub fn pad_positions(&self, factor: usize) -> Vec<usize> {
        self.ones.iter().map(|&i| i * factor).collect()
    }
}

impl fmt::Display for BinarySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dense_string())
    }
}

/// Circular differences between consecutive entries of a sorted position
/// list. A single entry yields one gap equal to the period.
pub fn circular_gaps(sorted: &[usize], period: usize) -> impl Iterator<Item = usize> + '_ {
    let len = sorted.len();
    (0..len).map(move |i| {
        if len == 1 {
            period
        } else if i + 1 < len {
            sorted[i + 1] - sorted[i]
        } else {
            sorted[0] + period - sorted[len - 1]
        }
    })
}

fn check_same_period(x: &BinarySequence, y: &BinarySequence) -> Result<()> {
    if x.period != y.period {
        return Err(Error::PeriodMismatch(x.period, y.period));
    }
    Ok(())
}

/// Hamming cross-correlation `H(X, Y)(t) = sum_i X(i) R^t Y(i)`.
pub fn hamming_xcorr(x: &BinarySequence, y: &BinarySequence, t: i64) -> Result<usize> {
    check_same_period(x, y)?;
    let n = x.period as i64;
    let t = t.rem_euclid(n) as usize;
    Ok(x
        .ones
        .iter()
        .filter(|&&i| y.get(i + x.period - t))
        .count())
}

/// `H(X, Y)(t)` for every `t` in `[0, period)`, in `O(w(X) w(Y))`.
pub fn xcorr_profile(x: &BinarySequence, y: &BinarySequence) -> Result<Vec<usize>> {
    check_same_period(x, y)?;
    let n = x.period;
    let mut profile = vec![0usize; n];
    for &a in &x.ones {
        for &b in &y.ones {
            profile[(a + n - b) % n] += 1;
        }
    }
    Ok(profile)
}

/// Largest cross-correlation over all shifts, with the maximising shift.
pub fn max_xcorr(x: &BinarySequence, y: &BinarySequence) -> Result<(usize, usize)> {
    let profile = xcorr_profile(x, y)?;
    let (t, &h) = profile
        .iter()
        .enumerate()
        .max_by_key(|&(t, &h)| (h, std::cmp::Reverse(t)))
        .expect("period is positive");
    Ok((h, t))
}

/// Cyclic minimum distance over ordered pairs of distinct members.
pub fn cyclic_min_distance(set: &SequenceSet) -> Result<usize> {
    if set.len() < 2 {
        return Err(invalid("cyclic minimum distance needs at least two sequences"));
    }
    let seqs: Vec<&BinarySequence> = set.sequences().collect();
    let mut best = usize::MAX;
    for (i, x) in seqs.iter().enumerate() {
        for (j, y) in seqs.iter().enumerate() {
            if i == j {
                continue;
            }
            let (h, _) = max_xcorr(x, y)?;
            best = best.min(x.weight() + y.weight() - 2 * h);
        }
    }
    Ok(best)
}

/// Position pair `(l mod p, l mod q)` under the CRT correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrtIndexPair {
    pub row: u64,
    pub col: u64,
}

/// The bijection between `[0, pq)` and `Z_p x Z_q` for coprime `p`, `q`.
#[derive(Debug, Clone, Copy)]
pub struct CrtCorrespondence {
    p: u64,
    q: u64,
    p_inv_mod_q: u64,
}

impl CrtCorrespondence {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(invalid("CRT moduli must be positive"));
        }
        if gcd(p, q) != 1 {
            return Err(Error::NotCoprime(p, q));
        }
        let p_inv_mod_q = mod_inverse(p % q, q).expect("coprime moduli are invertible");
        Ok(Self { p, q, p_inv_mod_q })
    }

    pub fn rows(&self) -> u64 {
        self.p
    }

    pub fn cols(&self) -> u64 {
        self.q
    }

    pub fn len(&self) -> u64 {
        self.p * self.q
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn map(&self, l: u64) -> Result<CrtIndexPair> {
        if l >= self.len() {
            return Err(invalid(format!("index {l} outside [0, {})", self.len())));
        }
        Ok(CrtIndexPair { row: l % self.p, col: l % self.q })
    }

    pub fn unmap(&self, pair: CrtIndexPair) -> Result<u64> {
        if pair.row >= self.p || pair.col >= self.q {
            return Err(invalid(format!(
                "pair ({}, {}) outside {}x{}",
                pair.row, pair.col, self.p, self.q
            )));
        }
        Ok(self.unmap_unchecked(pair.row, pair.col))
    }

    /// `l` with `l = row (mod p)` and `l = col (mod q)`; inputs must be reduced.
    pub fn unmap_unchecked(&self, row: u64, col: u64) -> u64 {
        let diff = (col + self.q - row % self.q) % self.q;
        let t = (diff as u128 * self.p_inv_mod_q as u128 % self.q as u128) as u64;
        row + self.p * t
    }
}

pub fn crt_map(l: u64, p: u64, q: u64) -> Result<CrtIndexPair> {
    CrtCorrespondence::new(p, q)?.map(l)
}

pub fn crt_unmap(pair: CrtIndexPair, p: u64, q: u64) -> Result<u64> {
    CrtCorrespondence::new(p, q)?.unmap(pair)
}

/// Construction record carried along with a sequence set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetMeta {
    pub construction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<u64>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub max_users: Option<u64>,
    #[serde(default, rename = "G", skip_serializing_if = "Option::is_none")]
    pub cells: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_period: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_labels: Option<Vec<String>>,
}

impl SetMeta {
    pub fn named(construction: &str) -> Self {
        Self { construction: construction.to_string(), ..Default::default() }
    }
}

/// Interchange record for one sequence. On input, `dense` may replace
/// `period` + `ones`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SequenceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ones: Option<Vec<usize>>,
    #[serde(default, skip_serializing)]
    dense: Option<String>,
    #[serde(default)]
    label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SetRecord {
    meta: SetMeta,
    sequences: Vec<SequenceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
}

/// A labelled family of sequences sharing one period.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSet {
    pub meta: SetMeta,
    labels: Vec<String>,
    seqs: Vec<BinarySequence>,
    /// Optional reference to the run manifest that produced the set.
    pub manifest: Option<String>,
}

impl SequenceSet {
    pub fn new(meta: SetMeta, members: Vec<(String, BinarySequence)>) -> Result<Self> {
        if let Some((_, first)) = members.first() {
            let period = first.period();
            if let Some((_, bad)) = members.iter().find(|(_, s)| s.period() != period) {
                return Err(Error::PeriodMismatch(period, bad.period()));
            }
        }
        let mut labels = Vec::with_capacity(members.len());
        let mut seqs = Vec::with_capacity(members.len());
        for (label, seq) in members {
            if labels.contains(&label) {
                return Err(invalid(format!("duplicate label {label:?}")));
            }
            labels.push(label);
            seqs.push(seq);
        }
        Ok(Self { meta, labels, seqs, manifest: None })
    }

    /// Labels the sequences `prefix0`, `prefix1`, ...
    pub fn from_sequences(meta: SetMeta, prefix: &str, seqs: Vec<BinarySequence>) -> Result<Self> {
        let members = seqs
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("{prefix}{i}"), s))
            .collect();
        Self::new(meta, members)
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn period(&self) -> Option<usize> {
        self.seqs.first().map(BinarySequence::period)
    }

    pub fn sequences(&self) -> impl Iterator<Item = &BinarySequence> {
        self.seqs.iter()
    }

    pub fn as_slice(&self) -> &[BinarySequence] {
        &self.seqs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, idx: usize) -> Option<&BinarySequence> {
        self.seqs.get(idx)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn by_label(&self, label: &str) -> Option<&BinarySequence> {
        self.index_of(label).map(|i| &self.seqs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BinarySequence)> {
        self.labels.iter().map(String::as_str).zip(self.seqs.iter())
    }

    /// Sorted distinct weights of the members.
    pub fn weight_profile(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.seqs.iter().map(BinarySequence::weight).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    /// A subset, in the given label order.
    pub fn select(&self, labels: &[&str]) -> Result<SequenceSet> {
        let mut members = Vec::with_capacity(labels.len());
        for &l in labels {
            let seq = self
                .by_label(l)
                .ok_or_else(|| invalid(format!("label {l:?} not in set")))?;
            members.push((l.to_string(), seq.clone()));
        }
        SequenceSet::new(self.meta.clone(), members)
    }

    pub fn to_json(&self) -> String {
        let record = SetRecord {
            meta: self.meta.clone(),
            sequences: self
                .iter()
                .map(|(label, s)| SequenceRecord {
                    period: Some(s.period()),
                    ones: Some(s.ones().to_vec()),
                    dense: None,
                    label: label.to_string(),
                })
                .collect(),
            manifest: self.manifest.clone(),
        };
        serde_json::to_string_pretty(&record).expect("set serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: SetRecord =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut members = Vec::with_capacity(record.sequences.len());
        for (i, r) in record.sequences.into_iter().enumerate() {
            let seq = match (r.dense, r.period, r.ones) {
                (Some(text), _, _) => BinarySequence::parse_dense(&text)?,
                (None, Some(period), Some(ones)) => BinarySequence::new(period, ones)?,
                _ => {
                    return Err(Error::Parse(format!(
                        "sequence {i} needs either \"dense\" or \"period\" and \"ones\""
                    )))
                }
            };
            let label = if r.label.is_empty() { format!("#{i}") } else { r.label };
            members.push((label, seq));
        }
        let mut set = SequenceSet::new(record.meta, members)?;
        set.manifest = record.manifest;
        Ok(set)
    }

    /// Reads either set JSON or plain text with one dense sequence per line.
    pub fn parse_any(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Self::from_json(text);
        }
        let seqs = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(BinarySequence::parse_dense)
            .collect::<Result<Vec<_>>>()?;
        Self::from_sequences(SetMeta::named("text"), "#", seqs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(period: usize, ones: &[usize]) -> BinarySequence {
        BinarySequence::new(period, ones.iter().copied()).unwrap()
    }

    #[test]
    fn shift_examples() {
        let x = BinarySequence::parse_dense("100").unwrap();
        assert_eq!(x.shift(1).to_dense_string(), "010");
        assert_eq!(x.shift(3), x);
        assert_eq!(x.shift(-1).to_dense_string(), "001");
        assert_eq!(seq(15, &[0, 6, 12]).shift(2), seq(15, &[2, 8, 14]));
    }

    #[test]
    fn xcorr_examples() {
        let x = seq(15, &[0, 6, 12]);
        let y = seq(15, &[0, 5, 10]);
        assert_eq!(hamming_xcorr(&x, &x, 0).unwrap(), 3);
        assert_eq!(hamming_xcorr(&x, &y, 0).unwrap(), 1);
        assert_eq!(hamming_xcorr(&seq(2, &[0]), &seq(2, &[1]), 1).unwrap(), 1);
        assert_eq!(
            hamming_xcorr(&x, &seq(5, &[0]), 0),
            Err(Error::PeriodMismatch(15, 5))
        );
    }

    #[test]
    fn profile_matches_pointwise() {
        let x = seq(15, &[0, 6, 12]);
        let y = seq(15, &[0, 7, 11]);
        let profile = xcorr_profile(&x, &y).unwrap();
        for t in 0..15 {
            assert_eq!(profile[t], hamming_xcorr(&x, &y, t as i64).unwrap());
        }
    }

    #[test]
    fn min_distance_examples() {
        let set = SequenceSet::from_sequences(
            SetMeta::named("test"),
            "s",
            vec![seq(4, &[0]), seq(4, &[2])],
        )
        .unwrap();
        assert_eq!(cyclic_min_distance(&set).unwrap(), 0);
        let twins =
            SequenceSet::from_sequences(SetMeta::named("t"), "s", vec![seq(5, &[0, 1]), seq(5, &[0, 1])])
                .unwrap();
        assert_eq!(cyclic_min_distance(&twins).unwrap(), 0);
        let single = SequenceSet::from_sequences(SetMeta::named("t"), "s", vec![seq(5, &[0])]).unwrap();
        assert!(cyclic_min_distance(&single).is_err());
    }

    #[test]
    fn orders() {
        assert_eq!(BinarySequence::parse_dense("100").unwrap().cyclic_order(), 3);
        assert_eq!(BinarySequence::parse_dense("1010").unwrap().cyclic_order(), 2);
        assert_eq!(BinarySequence::zeros(6).unwrap().cyclic_order(), 1);
    }

    #[test]
    fn separation() {
        assert_eq!(seq(15, &[0, 5, 10]).min_separation().unwrap(), 5);
        assert_eq!(seq(10, &[0, 1]).min_separation().unwrap(), 1);
        assert!(seq(10, &[3]).min_separation().is_err());
    }

    #[test]
    fn crt_examples() {
        assert_eq!(crt_map(0, 3, 5).unwrap(), CrtIndexPair { row: 0, col: 0 });
        assert_eq!(crt_map(7, 3, 5).unwrap(), CrtIndexPair { row: 1, col: 2 });
        assert_eq!(crt_unmap(CrtIndexPair { row: 2, col: 1 }, 3, 5).unwrap(), 11);
        assert_eq!(crt_map(0, 4, 6), Err(Error::NotCoprime(4, 6)));
        assert!(crt_map(15, 3, 5).is_err());
    }

    #[test]
    fn crt_round_trip_exhaustive() {
        for (p, q) in [(1, 7), (2, 3), (3, 5), (7, 11), (8, 125), (97, 103)] {
            let c = CrtCorrespondence::new(p, q).unwrap();
            for l in 0..p * q {
                let pair = c.map(l).unwrap();
                assert_eq!(c.unmap(pair).unwrap(), l);
                let next = c.map((l + 1) % (p * q)).unwrap();
                assert_eq!(next.row, (pair.row + 1) % p);
                assert_eq!(next.col, (pair.col + 1) % q);
            }
        }
    }

    #[test]
    fn dense_text_and_json() {
        let s = BinarySequence::parse_dense("0110 0").unwrap();
        assert_eq!(s.ones(), &[1, 2]);
        assert_eq!(s.period(), 5);
        assert!(BinarySequence::parse_dense("01x").is_err());

        let json = r#"{"meta":{"construction":"manual"},
            "sequences":[{"dense":"1100","label":"a"},{"period":4,"ones":[3],"label":"b"}]}"#;
        let set = SequenceSet::from_json(json).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.by_label("b").unwrap().ones(), &[3]);
        let again = SequenceSet::from_json(&set.to_json()).unwrap();
        assert_eq!(again, set);

        let mixed = r#"{"meta":{"construction":"m"},
            "sequences":[{"dense":"10"},{"dense":"100"}]}"#;
        assert!(matches!(SequenceSet::from_json(mixed), Err(Error::PeriodMismatch(2, 3))));
    }

    #[test]
    fn rejects_bad_positions() {
        assert!(BinarySequence::new(3, [3]).is_err());
        assert!(BinarySequence::new(3, [1, 1]).is_err());
        assert!(BinarySequence::new(0, []).is_err());
    }
}
