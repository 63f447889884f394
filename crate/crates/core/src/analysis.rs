//! Trace checkers: cautiousness, non-triviality, epsilon-convergence,
//! shrinking over epochs and the half-distance destination bound.
//!
//! All checks are pure functions over a [`Trace`] and use exact arithmetic.
//! They only look at correct robots. `D_i` for a robot that has neither
//! looked nor computed yet is its own position.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{ActionKind, RobotId, RobotKind, StepRecord};
use crate::trace::Trace;
use crate::{Interval, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(Scalar),
    #[error("need at least {needed} epochs, trace has {got}")]
    TooFewEpochs { needed: usize, got: usize },
    #[error("state index {index} is past the end of the trace ({len} steps)")]
    StateOutOfRange { index: usize, len: usize },
    #[error("window must be positive")]
    ZeroWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CautiousViolation {
    /// A destination outside `range(U)` of the state the robot looked at.
    OutOfRange {
        step: usize,
        robot: RobotId,
        destination: Scalar,
        range: Interval,
        observed: usize,
    },
    /// A full window in which no correct robot chose to move although the
    /// correct robots were not gathered.
    Trivial { from: usize, to: usize, diam: Scalar },
}

impl std::fmt::Display for CautiousViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CautiousViolation::OutOfRange {
                step,
                robot,
                destination,
                range,
                observed,
            } => write!(
                f,
                "step {step}: robot {robot} chose {destination} outside {range} (state {observed})"
            ),
            CautiousViolation::Trivial { from, to, diam } => {
                write!(f, "steps {from}..{to}: nobody moves while diam(U) = {diam}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CautiousReport {
    pub out_of_range: Vec<CautiousViolation>,
    pub trivial: Vec<CautiousViolation>,
}

impl CautiousReport {
    pub fn passed(&self) -> bool {
        self.out_of_range.is_empty() && self.trivial.is_empty()
    }

    pub fn violations(&self) -> impl Iterator<Item = &CautiousViolation> {
        self.out_of_range.iter().chain(&self.trivial)
    }
}

/// `range(U)` for every state index of the trace.
pub fn correct_ranges(trace: &Trace) -> Vec<Interval> {
    let mut ranges = Vec::with_capacity(trace.len() + 1);
    trace.replay(|_, state| ranges.push(state.correct_range()));
    ranges
}

/// Steps in which a correct robot fixes a destination.
fn decisions(trace: &Trace) -> impl Iterator<Item = &StepRecord> {
    trace
        .steps()
        .iter()
        .filter(|s| s.kind == RobotKind::Correct && matches!(s.action, ActionKind::Compute | ActionKind::FullCycle))
}

/// Checks both cautiousness conditions. Non-triviality is checked over the
/// consecutive complete windows of `window` steps.
pub fn check_cautious(trace: &Trace, window: usize) -> Result<CautiousReport, AnalysisError> {
    if window == 0 {
        return Err(AnalysisError::ZeroWindow);
    }
    let ranges = correct_ranges(trace);
    let mut report = CautiousReport::default();
    for step in decisions(trace) {
        let observed = step.observed.expect("decisions carry their snapshot index");
        let destination = step.destination().expect("decisions carry an outcome");
        let range = &ranges[observed];
        if !range.contains(destination) {
            report.out_of_range.push(CautiousViolation::OutOfRange {
                step: step.step,
                robot: step.robot,
                destination: destination.clone(),
                range: range.clone(),
                observed,
            });
        }
    }
    let steps = trace.steps();
    for from in (0..steps.len() / window).map(|w| w * window) {
        let diam = ranges[from].width();
        if diam.is_zero() {
            continue;
        }
        let moved = steps[from..from + window].iter().any(|s| {
            s.kind == RobotKind::Correct
                && matches!(s.action, ActionKind::Compute | ActionKind::FullCycle)
                && s.destination() != Some(&s.position_before)
        });
        if !moved {
            report.trivial.push(CautiousViolation::Trivial {
                from,
                to: from + window,
                diam,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvergenceVerdict {
    pub epsilon: Scalar,
    /// First state index from which `diam(U) < epsilon` holds to the end of
    /// the trace.
    pub t_epsilon: Option<usize>,
    pub converged: bool,
    pub final_diam: Scalar,
    /// Number of recorded steps; convergence is only claimed up to here.
    pub trace_len: usize,
}

pub fn check_convergence(trace: &Trace, epsilon: &Scalar) -> Result<ConvergenceVerdict, AnalysisError> {
    if !epsilon.is_positive() {
        return Err(AnalysisError::NonPositiveEpsilon(epsilon.clone()));
    }
    let len = trace.len();
    let last_wide = (0..=len).rev().find(|&i| &trace.diam_u(i) >= epsilon);
    let t_epsilon = match last_wide {
        None => Some(0),
        Some(i) if i == len => None,
        Some(i) => Some(i + 1),
    };
    Ok(ConvergenceVerdict {
        epsilon: epsilon.clone(),
        t_epsilon,
        converged: t_epsilon.is_some(),
        final_diam: trace.diam_u(len),
        trace_len: len,
    })
}

/// Epoch boundaries: state 0, then every state at which each correct robot
/// has completed a cycle that it started at or after the previous boundary.
pub fn epoch_boundaries(trace: &Trace) -> Vec<usize> {
    let correct: Vec<bool> = trace.initial().robots().iter().map(|r| r.is_correct()).collect();
    let total = correct.iter().filter(|&&c| c).count();
    let mut boundaries = vec![0];
    let mut done = vec![false; correct.len()];
    let mut remaining = total;
    for step in trace.steps() {
        let id = step.robot.0;
        let start = *boundaries.last().unwrap();
        if correct[id] && step.action.completes_cycle() && !done[id] && step.observed.is_some_and(|o| o >= start) {
            done[id] = true;
            remaining -= 1;
            if remaining == 0 {
                boundaries.push(step.step);
                done.iter_mut().for_each(|d| *d = false);
                remaining = total;
            }
        }
    }
    boundaries
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShrinkReport {
    /// `(state index, diam(U ∪ D))` at each epoch boundary.
    pub checkpoints: Vec<(usize, Scalar)>,
    /// Ratio of consecutive checkpoint diameters, while the earlier one is
    /// positive.
    pub ratios: Vec<Scalar>,
    pub observed_alpha: Option<Scalar>,
    /// Indices into `ratios` whose value is at least 1.
    pub non_shrinking: Vec<usize>,
    /// The correct robots were gathered (with their destinations) at the
    /// first checkpoint.
    pub degenerate: bool,
}

impl ShrinkReport {
    /// Whether every epoch ratio is at most `alpha`.
    pub fn bounded_by(&self, alpha: &Scalar) -> bool {
        self.ratios.iter().all(|r| r <= alpha)
    }
}

pub fn measure_shrinking(trace: &Trace) -> Result<ShrinkReport, AnalysisError> {
    let boundaries = epoch_boundaries(trace);
    let degenerate = trace.diam_ud(0).is_zero();
    if boundaries.len() < 2 && !degenerate {
        return Err(AnalysisError::TooFewEpochs {
            needed: 2,
            got: boundaries.len(),
        });
    }
    let checkpoints: Vec<(usize, Scalar)> = boundaries.iter().map(|&b| (b, trace.diam_ud(b))).collect();
    let ratios: Vec<Scalar> = checkpoints
        .windows(2)
        .take_while(|w| w[0].1.is_positive())
        .map(|w| &w[1].1 / &w[0].1)
        .collect();
    let non_shrinking = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| *r >= &Scalar::one())
        .map(|(i, _)| i)
        .collect();
    Ok(ShrinkReport {
        observed_alpha: ratios.iter().max().cloned(),
        checkpoints,
        ratios,
        non_shrinking,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HalfBoundViolation {
    pub step: usize,
    pub robot: RobotId,
    pub destination: Scalar,
    pub bound: Interval,
    pub t0: usize,
}

impl std::fmt::Display for HalfBoundViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {}: robot {} chose {} outside {} (t0 = {})",
            self.step, self.robot, self.destination, self.bound, self.t0
        )
    }
}

/// The interval `[(x + lo)/2, (x + hi)/2]` a destination chosen at `x` must
/// fall in when `[lo, hi]` is `range(U ∪ D)` at an earlier time.
pub fn half_bound(position: &Scalar, ud_range: &Interval) -> Interval {
    Interval::new(
        Scalar::midpoint(position, &ud_range.lo),
        Scalar::midpoint(position, &ud_range.hi),
    )
}

/// `range(U ∪ D)` at the given (sorted) state indices, where a robot that
/// has looked but not computed yet already counts with the destination its
/// snapshot determines.
fn ud_ranges_at(trace: &Trace, indices: &[usize]) -> Vec<Interval> {
    let steps = trace.steps();
    // destination fixed by the Look at step `i`, if the trace computes it
    let mut committed_by_look: Vec<Option<Scalar>> = vec![None; steps.len()];
    let mut open_look: Vec<Option<usize>> = vec![None; trace.params().n];
    for (i, step) in steps.iter().enumerate() {
        match step.action {
            ActionKind::Look => open_look[step.robot.0] = Some(i),
            ActionKind::Compute => {
                if let Some(look) = open_look[step.robot.0].take() {
                    committed_by_look[look] = step.destination().cloned();
                }
            }
            _ => {}
        }
    }
    let mut committed: Vec<Option<Scalar>> = vec![None; trace.params().n];
    let mut out = Vec::with_capacity(indices.len());
    let mut next = 0;
    trace.replay(|step, state| {
        if let Some(step) = step {
            let r = step.robot.0;
            committed[r] = match step.action {
                ActionKind::Look => committed_by_look[step.step - 1].clone(),
                _ => None,
            };
        }
        while next < indices.len() && indices[next] == state.time() {
            let mut lo: Option<&Scalar> = None;
            let mut hi: Option<&Scalar> = None;
            for robot in state.robots().iter().filter(|r| r.is_correct()) {
                let dest = committed[robot.id.0].as_ref().unwrap_or(robot.destination());
                for p in [&robot.position, dest] {
                    lo = Some(lo.map_or(p, |l| l.min(p)));
                    hi = Some(hi.map_or(p, |h| h.max(p)));
                }
            }
            out.push(Interval::new(
                lo.expect("correct robots exist").clone(),
                hi.expect("correct robots exist").clone(),
            ));
            next += 1;
        }
    });
    out
}

fn check_bounds(trace: &Trace, t0s: &[usize]) -> Vec<HalfBoundViolation> {
    let ranges = ud_ranges_at(trace, t0s);
    let mut violations = Vec::new();
    // Tightest combined bound over t0s[..=k], for every k.
    let mut prefix: Vec<Interval> = Vec::with_capacity(ranges.len());
    for r in &ranges {
        let next = match prefix.last() {
            Some(p) => Interval {
                lo: p.lo.clone().max(r.lo.clone()),
                hi: p.hi.clone().min(r.hi.clone()),
            },
            None => r.clone(),
        };
        prefix.push(next);
    }
    for step in decisions(trace) {
        let observed = step.observed.expect("decisions carry their snapshot index");
        // Snapshots are not taken in step order, so look the bound up per decision.
        let k = t0s.partition_point(|&t| t <= observed);
        if k == 0 {
            continue;
        }
        let (l, h) = (&prefix[k - 1].lo, &prefix[k - 1].hi);
        let x = &step.position_before;
        let bound = Interval {
            lo: Scalar::midpoint(x, l),
            hi: Scalar::midpoint(x, h),
        };
        let destination = step.destination().expect("decisions carry an outcome");
        if !(bound.lo <= *destination && *destination <= bound.hi) {
            violations.push(HalfBoundViolation {
                step: step.step,
                robot: step.robot,
                destination: destination.clone(),
                bound,
                t0: t0s[k - 1],
            });
        }
    }
    violations
}

/// Every destination chosen in a cycle that starts at or after state `t0`
/// must lie in [`half_bound`] of the chooser's position and
/// `range(U ∪ D)` at `t0`.
pub fn check_half_bound(trace: &Trace, t0: usize) -> Result<Vec<HalfBoundViolation>, AnalysisError> {
    if t0 > trace.len() {
        return Err(AnalysisError::StateOutOfRange {
            index: t0,
            len: trace.len(),
        });
    }
    Ok(check_bounds(trace, &[t0]))
}

/// [`check_half_bound`] with `t0` at every epoch boundary.
pub fn check_half_bound_epochs(trace: &Trace) -> Vec<HalfBoundViolation> {
    check_bounds(trace, &epoch_boundaries(trace))
}

/// Summary written by the command line tool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub verdict: &'static str,
    pub t_epsilon: Option<usize>,
    pub final_diam: Scalar,
    pub final_diam_decimal: f64,
    pub epsilon: Scalar,
    pub trace_len: usize,
    pub epochs: usize,
    pub observed_alpha: Option<Scalar>,
    pub violations: Vec<String>,
}

impl AnalysisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs every applicable check. The half-distance bound is specific to the
/// trimmed-center algorithm and is only checked when `half_bound` is set.
pub fn analyze(
    trace: &Trace,
    epsilon: &Scalar,
    window: usize,
    half_bound: bool,
) -> Result<AnalysisReport, AnalysisError> {
    let convergence = check_convergence(trace, epsilon)?;
    let cautious = check_cautious(trace, window)?;
    let mut violations: Vec<String> = cautious.violations().map(|v| v.to_string()).collect();
    if half_bound {
        violations.extend(check_half_bound_epochs(trace).iter().map(|v| v.to_string()));
    }
    let shrink = measure_shrinking(trace).ok();
    let verdict = if !violations.is_empty() {
        "violations"
    } else if convergence.converged {
        "converged"
    } else {
        "not_converged"
    };
    Ok(AnalysisReport {
        verdict,
        t_epsilon: convergence.t_epsilon,
        final_diam_decimal: convergence.final_diam.to_f64(),
        final_diam: convergence.final_diam,
        epsilon: epsilon.clone(),
        trace_len: convergence.trace_len,
        epochs: epoch_boundaries(trace).len() - 1,
        observed_alpha: shrink.and_then(|s| s.observed_alpha),
        violations,
    })
}
