use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, SuperframeState};
use super::sim::{neighbors, simulate_states, SimLog, OVERLAP_EPS};
use crate::error::{Error, Result};
use crate::verify::Verdict;

/// Contention-free receptions from one neighbour in one normal frame of
/// the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCount {
    pub superframe: u64,
    pub rx: u64,
    pub tx: u64,
    pub frame: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFreeReport {
    pub verdict: Verdict,
    pub superframes: u64,
    pub counts: Vec<FrameCount>,
    pub violations: Vec<FrameCount>,
}

impl BlockFreeReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn user_index(s: &Scenario) -> HashMap<u64, usize> {
    s.users.iter().enumerate().map(|(i, u)| (u.id, i)).collect()
}

/// Receiver-local frame containing slot-time `t`.
fn local_frame(t: f64, offset: f64, frame_len: usize) -> i64 {
    ((t - offset) / frame_len as f64 + OVERLAP_EPS).floor() as i64
}

/// Every user must hear at least one contention-free packet from every
/// neighbour (distance `< R` at the superframe start) in each normal frame,
/// frames being counted on the receiver's clock by arrival start.
pub fn check_block_free(log: &SimLog, s: &Scenario) -> Result<BlockFreeReport> {
    let frames = s.timing.frames;
    if frames < 3 {
        return Err(Error::InvalidScenario(format!(
            "F = {frames} leaves no normal frames to audit"
        )));
    }
    let index = user_index(s);
    let by_superframe: HashMap<u64, &SuperframeState> = log.states.iter().map(|st| (st.index, st)).collect();

    let mut tally: BTreeMap<(u64, u64, u64, u64), u64> = BTreeMap::new();
    for st in &log.states {
        for b in 0..s.users.len() {
            for a in neighbors(s, st, b) {
                for j in 1..frames as u64 - 1 {
                    tally.insert((st.index, s.users[b].id, s.users[a].id, j), 0);
                }
            }
        }
    }
    for r in log.receptions.iter().filter(|r| r.contention_free) {
        let st = by_superframe[&r.superframe];
        let offset = st.offsets[index[&r.rx]];
        let j = local_frame(r.arrive, offset, s.timing.frame_len);
        if j < 1 || j > frames as i64 - 2 {
            continue;
        }
        if let Some(c) = tally.get_mut(&(r.superframe, r.rx, r.tx, j as u64)) {
            *c += 1;
        }
    }
    let counts: Vec<FrameCount> = tally
        .into_iter()
        .map(|((superframe, rx, tx, frame), count)| FrameCount { superframe, rx, tx, frame, count })
        .collect();
    let violations: Vec<FrameCount> = counts.iter().filter(|c| c.count == 0).copied().collect();
    Ok(BlockFreeReport {
        verdict: if violations.is_empty() { Verdict::Holds } else { Verdict::Violated },
        superframes: log.states.len() as u64,
        counts,
        violations,
    })
}

/// Checks that each packet sent in normal frame `i` of its transmitter is
/// received entirely within the receiver's frames `i - 1 ..= i + 1`.
pub fn frame_offset_audit(log: &SimLog, s: &Scenario) -> bool {
    let index = user_index(s);
    let frames = s.timing.frames as u64;
    let len = s.timing.frame_len as f64;
    let by_superframe: HashMap<u64, &SuperframeState> = log.states.iter().map(|st| (st.index, st)).collect();
    log.receptions
        .iter()
        .filter(|r| r.frame >= 1 && r.frame + 1 < frames)
        .all(|r| {
            let offset = by_superframe[&r.superframe].offsets[index[&r.rx]];
            let start = r.arrive - offset;
            let i = r.frame as f64;
            start >= (i - 1.0) * len - OVERLAP_EPS && start + 1.0 <= (i + 2.0) * len + OVERLAP_EPS
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialOutcome {
    pub trials: u64,
    /// First offset vector (slots, one per user) that breaks block-free
    /// service, with its report.
    pub violation: Option<(Vec<f64>, BlockFreeReport)>,
}

/// Grid search over clock offsets `{0, dC/steps, ..., dC}` per user on the
/// first superframe drawn from `seed`, stopping at the first violation or
/// after `max_trials` assignments. The first user is pinned to offset 0.
pub fn adversarial_search(s: &Scenario, seed: u64, steps: u32, max_trials: u64) -> Result<AdversarialOutcome> {
    let mut states = s.states(seed)?;
    states.truncate(1);
    let base = states.pop().expect("at least one superframe");
    let users = s.users.len();
    let steps = steps.max(1);
    let grid: Vec<f64> = (0..=steps)
        .map(|i| s.timing.delta_c as f64 * i as f64 / steps as f64)
        .collect();
    let mut digits = vec![0usize; users];
    let mut trials = 0;
    loop {
        if trials >= max_trials {
            return Ok(AdversarialOutcome { trials, violation: None });
        }
        trials += 1;
        let mut st = base.clone();
        st.offsets = digits.iter().map(|&d| grid[d]).collect();
        let log = simulate_states(s, vec![st]);
        let report = check_block_free(&log, s)?;
        if !report.holds() {
            let offsets = log.states[0].offsets.clone();
            return Ok(AdversarialOutcome { trials, violation: Some((offsets, report)) });
        }
        // odometer over users 1.., last user fastest
        let mut pos = users;
        loop {
            if pos <= 1 {
                return Ok(AdversarialOutcome { trials, violation: None });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < grid.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}
