use serde::{Deserialize, Serialize};

use super::scenario::{distance, Scenario, SuperframeState};
use super::timing::SPEED_OF_LIGHT;
use crate::error::Result;

/// Overlaps shorter than this many slots are treated as touching.
pub const OVERLAP_EPS: f64 = 1e-9;

/// One packet as seen by one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reception {
    pub tx: u64,
    pub rx: u64,
    /// Slot index within the transmitter's superframe, `frame * L + s`.
    pub slot: u64,
    pub t_arrive_s: f64,
    pub t_end_s: f64,
    pub contention_free: bool,
    pub superframe: u64,
    /// Transmitter frame index.
    pub frame: u64,
    /// Arrival start in slots, relative to the nominal superframe start.
    #[serde(skip)]
    pub arrive: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub states: Vec<SuperframeState>,
    pub receptions: Vec<Reception>,
}

#[derive(Clone, Copy)]
struct Interval {
    start: f64,
    end: f64,
    /// Index into the pending receptions, `None` for the receiver's own slot.
    entry: Option<usize>,
}

/// Users strictly closer than `R` to user `b`.
pub fn neighbors(s: &Scenario, state: &SuperframeState, b: usize) -> Vec<usize> {
    (0..state.positions.len())
        .filter(|&a| a != b && distance(state.positions[a], state.positions[b]) < s.r)
        .collect()
}

/// Start times in slots of every transmission of user `a`.
fn transmissions<'a>(s: &'a Scenario, state: &SuperframeState, a: usize) -> impl Iterator<Item = (u64, u64, f64)> + 'a {
    let len = s.timing.frame_len;
    let seq = s.set.get(state.sequences[a]).expect("validated sequence index");
    let offset = state.offsets[a];
    (0..s.timing.frames).flat_map(move |f| {
        seq.ones()
            .iter()
            .map(move |&one| (f as u64, (f * len + one) as u64, offset + (f * len + one) as f64))
    })
}

/// Marks every interval that overlaps another by more than the tolerance.
fn mark_collisions(intervals: &mut [Interval]) -> Vec<bool> {
    intervals.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    let n = intervals.len();
    let mut hit = vec![false; n];
    let mut reach = f64::NEG_INFINITY;
    for i in 0..n {
        let iv = intervals[i];
        if reach > iv.start + OVERLAP_EPS {
            hit[i] = true;
        }
        if i + 1 < n && intervals[i + 1].start < iv.end - OVERLAP_EPS {
            hit[i] = true;
        }
        reach = reach.max(iv.end);
    }
    hit
}

/// Reception log of one superframe. Positions and offsets come from
/// `state`; times are reported in seconds from the start of superframe 0.
pub fn run_superframe(s: &Scenario, state: &SuperframeState) -> Vec<Reception> {
    let tau = s.timing.tau;
    let base = state.index as f64 * s.timing.superframe_slots();
    let users = &s.users;
    let mut out = Vec::new();
    for b in 0..users.len() {
        let mut pending: Vec<Reception> = Vec::new();
        let mut intervals: Vec<Interval> = Vec::new();
        for a in neighbors(s, state, b) {
            let delay = if s.slot_synchronized {
                0.0
            } else {
                distance(state.positions[a], state.positions[b]) / (SPEED_OF_LIGHT * tau)
            };
            for (frame, slot, start) in transmissions(s, state, a) {
                let arrive = start + delay;
                intervals.push(Interval { start: arrive, end: arrive + 1.0, entry: Some(pending.len()) });
                pending.push(Reception {
                    tx: users[a].id,
                    rx: users[b].id,
                    slot,
                    t_arrive_s: (base + arrive) * tau,
                    t_end_s: (base + arrive + 1.0) * tau,
                    contention_free: false,
                    superframe: state.index,
                    frame,
                    arrive,
                });
            }
        }
        if pending.is_empty() {
            continue;
        }
        for (_, _, start) in transmissions(s, state, b) {
            intervals.push(Interval { start, end: start + 1.0, entry: None });
        }
        let hit = mark_collisions(&mut intervals);
        for (iv, collided) in intervals.iter().zip(hit) {
            if let Some(e) = iv.entry {
                pending[e].contention_free = !collided;
            }
        }
        out.extend(pending);
    }
    out
}

/// Runs every superframe of the given states.
pub fn simulate_states(s: &Scenario, states: Vec<SuperframeState>) -> SimLog {
    let receptions = states.iter().flat_map(|st| run_superframe(s, st)).collect();
    SimLog { states, receptions }
}

/// Validates the scenario, draws positions and offsets from `seed` and
/// simulates all superframes.
pub fn simulate(s: &Scenario, seed: u64) -> Result<SimLog> {
    let states = s.states(seed)?;
    Ok(simulate_states(s, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(start: f64) -> Interval {
        Interval { start, end: start + 1.0, entry: None }
    }

    #[test]
    fn collision_marking() {
        let mut v = vec![iv(0.0), iv(1.0), iv(2.5), iv(3.0), iv(5.0)];
        assert_eq!(mark_collisions(&mut v), vec![false, false, true, true, false]);
        let mut same = vec![iv(4.0), iv(4.0)];
        assert_eq!(mark_collisions(&mut same), vec![true, true]);
        let mut touching = vec![iv(1.0 + 1e-12), iv(0.0)];
        assert_eq!(mark_collisions(&mut touching), vec![false, false]);
        // a long earlier interval still counts after a short gap
        let mut nested = vec![Interval { start: 0.0, end: 5.0, entry: None }, iv(1.0), iv(3.0)];
        assert_eq!(mark_collisions(&mut nested), vec![true, true, true]);
    }
}
