use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use seqreuse_core::cpc::{pad_set, tdma_set};
use seqreuse_core::crt::crt0_set;
use seqreuse_core::netsim::{
    adversarial_search, check_block_free, delta_p, frame_offset_audit, run_superframe, simulate, simulate_states,
    Scenario, SuperframeState, TimingModel, User,
};
use seqreuse_core::{BinarySequence, Error, SequenceSet, SetMeta};

fn build(set: SequenceSet, users: Vec<User>, tau: f64, frames: usize, delta_c: u64, r: f64, sync: bool) -> Scenario {
    let len = set.period().unwrap();
    let dp = if sync { 0 } else { delta_p(r, tau) };
    Scenario {
        timing: TimingModel::new(tau, len, frames, delta_c, dp).unwrap(),
        r,
        h: 10.0,
        max_users: users.len().max(1),
        speed: 0.0,
        users,
        set,
        plan: None,
        slot_synchronized: sync,
        superframes: 1,
    }
}

fn user(id: u64, x: f64, seq: usize) -> User {
    User { sequence: Some(seq), ..User::at(id, x, 0.0) }
}

fn dense_set(rows: &[&str]) -> SequenceSet {
    let seqs = rows.iter().map(|r| BinarySequence::parse_dense(r).unwrap()).collect();
    SequenceSet::from_sequences(SetMeta::named("test"), "x", seqs).unwrap()
}

#[test]
fn lone_user_hears_nothing() {
    let s = build(dense_set(&["1010"]), vec![user(0, 0.0, 0)], 1e-3, 3, 0, 500.0, false);
    let log = simulate(&s, 1).unwrap();
    assert!(log.receptions.is_empty());
    assert!(check_block_free(&log, &s).unwrap().holds());
}

#[test]
fn disjoint_schedules_are_clean() {
    let s = build(dense_set(&["1000", "0010"]), vec![user(0, 0.0, 0), user(1, 100.0, 1)], 1e-3, 3, 0, 500.0, false);
    let log = simulate(&s, 1).unwrap();
    assert_eq!(log.receptions.len(), 6);
    assert!(log.receptions.iter().all(|r| r.contention_free));
    // 100 m at the speed of light
    let r = log.receptions.iter().find(|r| r.rx == 1 && r.slot == 0).unwrap();
    assert!((r.t_arrive_s - 100.0 / 299_792_458.0).abs() < 1e-15);
    assert!(check_block_free(&log, &s).unwrap().holds());
}

#[test]
fn identical_schedules_collide() {
    let s = build(dense_set(&["1100"]), vec![user(0, 0.0, 0), user(1, 100.0, 0)], 1e-3, 4, 0, 500.0, true);
    let log = simulate(&s, 1).unwrap();
    assert!(!log.receptions.is_empty());
    assert!(log.receptions.iter().all(|r| !r.contention_free));
    let report = check_block_free(&log, &s).unwrap();
    assert!(!report.holds());
    // both directions, two normal frames each
    assert_eq!(report.violations.len(), 4);
}

#[test]
fn users_beyond_radius_are_ignored() {
    let s = build(dense_set(&["1100"]), vec![user(0, 0.0, 0), user(1, 500.0, 0)], 1e-3, 3, 0, 500.0, true);
    let log = simulate(&s, 1).unwrap();
    assert!(log.receptions.is_empty());
}

#[test]
fn too_few_frames_rejected() {
    let s = build(dense_set(&["10"]), vec![user(0, 0.0, 0)], 1e-3, 2, 0, 500.0, true);
    let log = simulate(&s, 1).unwrap();
    assert!(matches!(check_block_free(&log, &s), Err(Error::InvalidScenario(_))));
}

#[test]
fn crowded_disk_rejected() {
    let mut s = build(dense_set(&["1000", "0100", "0010"]), (0..3).map(|i| user(i, i as f64, i as usize)).collect(), 1e-3, 3, 0, 500.0, true);
    s.max_users = 2;
    assert!(matches!(simulate(&s, 0), Err(Error::InvalidScenario(_))));
}

#[test]
fn padded_crt0_pair_holds_for_any_offsets() {
    let tau = 1e-3;
    let delta_c = 2;
    let delta = delta_c + delta_p(500.0, tau);
    let set = pad_set(&crt0_set(3, 5).unwrap(), delta as usize).unwrap();
    let mut s = build(set, vec![user(0, 0.0, 0), user(1, 400.0, 1)], tau, 3, delta_c, 500.0, false);
    for seed in 0..200 {
        let log = simulate(&s, seed).unwrap();
        assert!(check_block_free(&log, &s).unwrap().holds(), "seed {seed}");
        assert!(frame_offset_audit(&log, &s));
    }
    s.users[1].sequence = Some(0);
    for u in &mut s.users {
        u.offset_s = Some(0.0);
    }
    let log = simulate(&s, 0).unwrap();
    let report = check_block_free(&log, &s).unwrap();
    assert_eq!(report.violations.len(), 2);
}

#[test]
fn synchronized_frames_line_up() {
    let s = build(crt0_set(3, 5).unwrap(), (0..3).map(|i| user(i, 10.0 * i as f64, i as usize)).collect(), 1e-3, 4, 0, 500.0, true);
    let log = simulate(&s, 3).unwrap();
    assert!(frame_offset_audit(&log, &s));
    for r in &log.receptions {
        assert_eq!((r.arrive / 15.0).floor() as u64, r.frame);
    }
}

#[test]
fn frame_offset_audit_at_delta_equal_frame_length() {
    // tdma G=2 padded by one slot: L = 4; delta_c 2 plus two slots of
    // propagation at 1 us gives delta = L
    let tau = 1e-6;
    let set = tdma_set(2, 1).unwrap();
    let s = build(set, vec![user(0, 0.0, 0), user(1, 450.0, 1)], tau, 5, 2, 500.0, false);
    assert_eq!(s.timing.delta(), 4);
    for seed in 0..50 {
        let log = simulate(&s, seed).unwrap();
        assert!(frame_offset_audit(&log, &s));
    }
    let mut extreme = s.states(0).unwrap();
    extreme[0].offsets = vec![2.0, 0.0];
    assert!(frame_offset_audit(&simulate_states(&s, extreme.clone()), &s));
    extreme[0].offsets = vec![0.0, 2.0];
    assert!(frame_offset_audit(&simulate_states(&s, extreme), &s));
}

#[test]
fn runs_are_deterministic() {
    let set = pad_set(&crt0_set(3, 5).unwrap(), 3).unwrap();
    let users = (0..3).map(|i| user(i, 120.0 * i as f64, i as usize)).collect();
    let mut s = build(set, users, 1e-6, 3, 1, 500.0, false);
    s.superframes = 3;
    s.speed = 30.0;
    let a = simulate(&s, 42).unwrap();
    let b = simulate(&s, 42).unwrap();
    assert_eq!(a, b);
    let c = simulate(&s, 43).unwrap();
    assert_ne!(a.states[0].offsets, c.states[0].offsets);
}

#[test]
fn adversarial_search_breaks_unpadded_tdma() {
    let set = tdma_set(2, 0).unwrap();
    let mut s = build(set, vec![user(0, 0.0, 0), user(1, 100.0, 1)], 1e-3, 3, 1, 500.0, false);
    // the timing itself is valid; only the missing padding breaks it
    assert!(s.timing.delta() <= s.timing.frame_len as u64);
    let found = adversarial_search(&s, 0, 4, 1000).unwrap();
    assert!(found.violation.is_some());
    // padding by the full bound closes the hole
    s.set = tdma_set(2, s.timing.delta() as usize).unwrap();
    s.timing.frame_len = s.set.period().unwrap();
    let clean = adversarial_search(&s, 0, 4, 1000).unwrap();
    assert!(clean.violation.is_none());
    assert_eq!(clean.trials, 5);
}

/// Block index of a time in a frame of padded slots of width `width`.
fn block(t: f64, width: f64) -> i64 {
    (t / width + 1e-9).floor() as i64
}

#[test]
fn padding_confines_collisions_to_one_block() {
    let tau = 1e-6;
    let delta_c = 1u64;
    let delta = delta_c + delta_p(500.0, tau);
    let width = (delta + 1) as f64;
    let set = pad_set(&crt0_set(3, 5).unwrap(), delta as usize).unwrap();
    let users = vec![user(0, 0.0, 0), user(1, 499.0, 1), user(2, 250.0, 2)];
    let s = build(set, users, tau, 3, delta_c, 500.0, false);
    let base = s.states(0).unwrap().remove(0);
    let steps = 6;
    for a in 0..=steps {
        for b in 0..=steps {
            for c in 0..=steps {
                let mut st = base.clone();
                st.offsets = [a, b, c].iter().map(|&d| delta_c as f64 * d as f64 / steps as f64).collect();
                let log = simulate_states(&s, vec![st.clone()]);
                assert!(check_block_free(&log, &s).unwrap().holds());
                // every collision shares a block with another arrival or
                // with the receiver's own slot
                let mut blocks: HashMap<(u64, i64), usize> = HashMap::new();
                for r in &log.receptions {
                    *blocks.entry((r.rx, block(r.arrive, width))).or_default() += 1;
                }
                for (i, u) in s.users.iter().enumerate() {
                    let seq = s.set.get(st.sequences[i]).unwrap();
                    for f in 0..s.timing.frames {
                        for &one in seq.ones() {
                            let t = st.offsets[i] + (f * s.timing.frame_len + one) as f64;
                            *blocks.entry((u.id, block(t, width))).or_default() += 1;
                        }
                    }
                }
                for r in log.receptions.iter().filter(|r| !r.contention_free) {
                    assert!(blocks[&(r.rx, block(r.arrive, width))] >= 2);
                }
            }
        }
    }
}

fn random_layout() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<usize>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|n| {
        (
            proptest::collection::vec((0.0f64..800.0, 0.0f64..800.0), n),
            proptest::collection::vec(0usize..3, n),
            proptest::collection::vec(0.0f64..2.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn removing_a_user_never_adds_collisions((pos, seqs, offs) in random_layout(), drop in 0usize..6) {
        let set = pad_set(&crt0_set(3, 5).unwrap(), 1).unwrap();
        let users: Vec<User> = pos.iter().enumerate().map(|(i, &(x, y))| User { sequence: Some(seqs[i]), ..User::at(i as u64, x, y) }).collect();
        let mut s = build(set, users, 1e-6, 3, 2, 500.0, false);
        s.max_users = pos.len();
        let state = SuperframeState { index: 0, positions: pos.clone(), offsets: offs.clone(), sequences: seqs.clone() };
        let full = run_superframe(&s, &state);

        let drop = drop % pos.len();
        let mut t = s.clone();
        t.users.remove(drop);
        let mut st = state.clone();
        st.positions.remove(drop);
        st.offsets.remove(drop);
        st.sequences.remove(drop);
        let fewer = run_superframe(&t, &st);
        let clean: HashSet<(u64, u64, u64)> = fewer.iter().filter(|r| r.contention_free).map(|r| (r.tx, r.rx, r.slot)).collect();
        for r in full.iter().filter(|r| r.contention_free && r.tx != drop as u64 && r.rx != drop as u64) {
            prop_assert!(clean.contains(&(r.tx, r.rx, r.slot)));
        }
    }

    #[test]
    fn every_transmission_reaches_each_neighbour_once((pos, seqs, offs) in random_layout()) {
        let set = crt0_set(3, 5).unwrap();
        let users: Vec<User> = pos.iter().enumerate().map(|(i, &(x, y))| User { sequence: Some(seqs[i]), ..User::at(i as u64, x, y) }).collect();
        let mut s = build(set, users, 1e-3, 3, 0, 500.0, false);
        s.max_users = pos.len();
        let state = SuperframeState { index: 0, positions: pos.clone(), offsets: offs.iter().map(|_| 0.0).collect(), sequences: seqs.clone() };
        let log = run_superframe(&s, &state);
        let mut expected = 0;
        for b in 0..pos.len() {
            for a in 0..pos.len() {
                let d = (pos[a].0 - pos[b].0).hypot(pos[a].1 - pos[b].1);
                if a != b && d < 500.0 {
                    expected += 3 * s.set.get(seqs[a]).unwrap().weight();
                }
            }
        }
        prop_assert_eq!(log.len(), expected);
        let keys: HashSet<(u64, u64, u64)> = log.iter().map(|r| (r.tx, r.rx, r.slot)).collect();
        prop_assert_eq!(keys.len(), log.len());
    }
}
