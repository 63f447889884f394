use proptest::prelude::*;

use byzline::engine::{Model, RobotKind};
use byzline::experiment::{run, ExperimentConfig, SchedulerKind};
use byzline::scheduler::{audit_fairness, audit_k_bounded, FairnessVerdict};
use byzline::trace::Trace;

/// Completion order of the correct robots.
fn completions(trace: &Trace) -> Vec<usize> {
    trace
        .steps()
        .iter()
        .filter(|s| s.kind == RobotKind::Correct && s.action.completes_cycle())
        .map(|s| s.robot.0)
        .collect()
}

/// Between two consecutive completions of any robot, no other robot
/// completes more than `k` cycles. Correct robots hold ids `0..n`.
fn k_bounded_oracle(order: &[usize], n: usize, k: usize) -> bool {
    for r in 0..n {
        let mut counts = vec![0usize; n];
        for &c in order {
            if c == r {
                counts = vec![0; n];
            } else {
                counts[c] += 1;
                if counts[c] > k {
                    return false;
                }
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn k_bounded_runs_respect_k(seed in 0u64..10_000, k in 1u32..4, atom in any::<bool>()) {
        let config = ExperimentConfig {
            seed,
            k,
            scheduler: SchedulerKind::KBounded,
            model: if atom { Model::Atom } else { Model::Corda },
            budget: 800,
            ..ExperimentConfig::default()
        };
        let trace = run(&config).unwrap().trace;
        prop_assert!(k_bounded_oracle(&completions(&trace), config.n - config.f, k as usize));
        prop_assert!(audit_k_bounded(&trace, k).is_ok());
    }

    #[test]
    fn synchronous_runs_are_lock_step(seed in 0u64..10_000, atom in any::<bool>()) {
        let config = ExperimentConfig {
            seed,
            scheduler: SchedulerKind::Sync,
            model: if atom { Model::Atom } else { Model::Corda },
            budget: 600,
            ..ExperimentConfig::default()
        };
        let trace = run(&config).unwrap().trace;
        let mut spread_ok = true;
        trace.replay(|_, state| {
            let cycles: Vec<u64> = state.robots().iter().filter(|r| r.is_correct()).map(|r| r.cycles_completed).collect();
            spread_ok &= cycles.iter().max().unwrap() - cycles.iter().min().unwrap() <= 1;
        });
        prop_assert!(spread_ok);
    }

    #[test]
    fn starved_iff_silent_in_final_window(seed in 0u64..10_000, window in 1usize..200) {
        let config = ExperimentConfig { seed, budget: 400, ..ExperimentConfig::default() };
        let trace = run(&config).unwrap().trace;
        prop_assume!(window <= trace.len());
        let tail = &trace.steps()[trace.len() - window..];
        let silent = trace.initial().correct_ids().any(|r| {
            !tail.iter().any(|s| s.robot == r && s.action.completes_cycle())
        });
        let report = audit_fairness(&trace, window).unwrap();
        prop_assert_eq!(matches!(report.verdict, FairnessVerdict::Starved(_)), silent);
    }
}

#[test]
fn weighted_async_still_completes_cycles() {
    let config = ExperimentConfig {
        seed: 4,
        weights: Some(vec![1, 1, 1, 1, 50, 1]),
        budget: 5_000,
        ..ExperimentConfig::default()
    };
    let trace = run(&config).unwrap().trace;
    let report = audit_fairness(&trace, trace.len()).unwrap();
    assert!(report.cycles.iter().all(|&(_, c)| c > 0));
}
