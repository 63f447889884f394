use byzline::analysis::{check_half_bound_epochs, epoch_boundaries};
use byzline::experiment::{run, ExperimentConfig};

// A Compute on a snapshot older than the last epoch boundary must only be
// held to the boundaries at or before that snapshot.
#[test]
fn stale_computes_are_bounded_by_their_own_snapshot() {
    let trace = run(&ExperimentConfig {
        seed: 13,
        ..ExperimentConfig::default()
    })
    .unwrap()
    .trace;
    let boundaries = epoch_boundaries(&trace);
    let stale = trace.steps().iter().any(|s| {
        s.observed
            .is_some_and(|o| boundaries.iter().any(|&b| b > o && b < s.step))
    });
    assert!(stale, "trace no longer contains a compute across an epoch boundary");
    assert!(check_half_bound_epochs(&trace).is_empty());
}
