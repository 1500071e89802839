use std::collections::BTreeMap;

use forage_core::agents::{AgentKind, AgentParams};
use forage_core::analysis::{extract_encounters, quartile_split, PatchEncounter, DEFAULT_MARGIN};
use forage_core::batch::{simulate_batch, EvaluationConfig, RunConfig};
use forage_core::optimal::{empirical_mvt_leave_step, PatchSchedule};
use proptest::prelude::*;

fn threshold_logs() -> Vec<forage_core::episode_log::EpisodeLog> {
    let run = RunConfig {
        agent: AgentParams::of_kind(AgentKind::Threshold),
        evaluation: EvaluationConfig {
            episodes_per_distance: 2,
            ..EvaluationConfig::default()
        },
        ..RunConfig::default()
    };
    simulate_batch(&run, Some(2)).unwrap()
}

#[test]
fn threshold_leave_steps_match_the_crossing() {
    let params = AgentParams::of_kind(AgentKind::Threshold);
    let crossing = empirical_mvt_leave_step(params.theta, &PatchSchedule::default()).unwrap();
    let logs = threshold_logs();
    let enc = extract_encounters(&logs, DEFAULT_MARGIN);
    let done: Vec<&PatchEncounter> = enc.iter().filter(|e| !e.truncated).collect();
    assert!(done.len() > 40);
    for e in done {
        assert_eq!(e.leave_step, crossing, "{} m step {}", e.patch_distance, e.entry_step);
        assert!(e.exit_step > e.entry_step);
    }
}

#[test]
fn rewarded_steps_are_partitioned() {
    // every rewarded step is an encounter step, a re-entry of a depleted
    // patch, or part of the truncated tail; none is counted twice
    for log in threshold_logs() {
        let enc = extract_encounters(std::slice::from_ref(&log), DEFAULT_MARGIN);
        let mut owner = vec![0u32; log.records.len()];
        for e in &enc {
            for s in e.entry_step..e.entry_step + e.rewards.len() as u32 {
                owner[s as usize] += 1;
            }
        }
        for (rec, n) in log.records.iter().zip(&owner) {
            assert!(*n <= 1);
            if rec.reward > 0.0 && *n == 0 {
                let p = rec.inside.unwrap();
                assert!(rec.depletion[p] > 1, "fresh-patch reward outside any encounter");
            }
        }
        let covered: f64 = enc.iter().flat_map(|e| e.rewards.iter()).sum();
        assert!(covered <= log.score() + 1e-12);
    }
}

fn fake(distance: f64, leave: u32) -> PatchEncounter {
    PatchEncounter {
        agent: "a".into(),
        episode: 0,
        patch: 0,
        patch_distance: distance,
        entry_step: 0,
        exit_step: leave + 1,
        leave_step: leave,
        rewards: vec![],
        state_trace: vec![],
        pre_trace: vec![],
        post_trace: vec![],
        truncated: false,
    }
}

proptest! {
    #[test]
    fn quartiles_are_balanced(leaves in prop::collection::btree_set(1u32..5000, 4..200)) {
        let leaves: Vec<u32> = leaves.into_iter().collect();
        let enc: Vec<PatchEncounter> = leaves.iter().enumerate()
            .map(|(i, l)| fake(if i % 2 == 0 { 6.0 } else { 8.0 }, *l))
            .collect();
        prop_assume!(enc.iter().filter(|e| e.patch_distance == 8.0).count() >= 4);
        let labels = quartile_split(&enc).unwrap();
        let mut sizes: BTreeMap<(u64, usize), usize> = BTreeMap::new();
        for (e, q) in enc.iter().zip(&labels) {
            *sizes.entry((e.patch_distance.to_bits(), q.unwrap().index())).or_default() += 1;
        }
        for d in [6.0f64, 8.0] {
            let s: Vec<usize> = (1..=4).map(|q| *sizes.get(&(d.to_bits(), q)).unwrap_or(&0)).collect();
            let (lo, hi) = (s.iter().min().unwrap(), s.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "{d}: {s:?}");
        }
    }
}
