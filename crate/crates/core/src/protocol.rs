//! The position-dependent trimming convergence algorithm and the interface
//! shared by every algorithm the simulator can run or attack.
//!
//! Algorithms see a [`RobotView`]: the full multiset of positions observed at
//! Look time plus the caller's own position. Robots are anonymous, so the
//! caller's index in the sorted snapshot is resolved from its value.

use serde::Serialize;
use thiserror::Error;

use crate::{PositionMultiset, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("trim_2f undefined for n = {n}, f = {f}: requires n > 4f")]
    TrimUndefined { n: usize, f: usize },
    #[error("election undefined for n = {n}, f = {f}: requires n >= f + 1")]
    ElectionUndefined { n: usize, f: usize },
    #[error("algorithm `{algorithm}` requires {requirement}, got n = {n}, f = {f}")]
    Unsupported {
        algorithm: String,
        requirement: &'static str,
        n: usize,
        f: usize,
    },
    #[error("snapshot holds {actual} positions, expected n = {expected}")]
    SnapshotSize { expected: usize, actual: usize },
    #[error("own position {0} is not part of the snapshot")]
    SelfNotObserved(Scalar),
}

/// Network size and Byzantine bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Params {
    pub n: usize,
    pub f: usize,
}

impl Params {
    pub fn new(n: usize, f: usize) -> Self {
        Params { n, f }
    }

    /// Number of correct robots when exactly `f` are Byzantine.
    pub fn correct(&self) -> usize {
        self.n - self.f
    }
}

/// What a robot observed: every position in the network (with
/// multiplicity) and where it stands itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotView {
    snapshot: PositionMultiset,
    self_position: Scalar,
    params: Params,
}

impl RobotView {
    pub fn new(snapshot: PositionMultiset, self_position: Scalar, params: Params) -> Result<Self, ProtocolError> {
        if snapshot.len() != params.n {
            return Err(ProtocolError::SnapshotSize {
                expected: params.n,
                actual: snapshot.len(),
            });
        }
        if !snapshot.contains(&self_position) {
            return Err(ProtocolError::SelfNotObserved(self_position));
        }
        Ok(RobotView {
            snapshot,
            self_position,
            params,
        })
    }

    pub fn snapshot(&self) -> &PositionMultiset {
        &self.snapshot
    }

    pub fn self_position(&self) -> &Scalar {
        &self.self_position
    }

    pub fn params(&self) -> Params {
        self.params
    }

    /// The same view expressed in a frame shifted by `offset`.
    pub fn translated(&self, offset: &Scalar) -> RobotView {
        RobotView {
            snapshot: self.snapshot.translated(offset),
            self_position: &self.self_position + offset,
            params: self.params,
        }
    }

    /// The same view expressed in a mirrored frame.
    pub fn reflected(&self) -> RobotView {
        RobotView {
            snapshot: self.snapshot.reflected(),
            self_position: -&self.self_position,
            params: self.params,
        }
    }

    fn pos(&self, k: usize) -> &Scalar {
        self.snapshot.kth(k).expect("index validated against params before use")
    }
}

/// Result of a Compute phase. `Stay` means "not allowed to move", which the
/// trace keeps apart from a move whose destination is the current position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ComputeOutcome {
    Stay,
    MoveTo(Scalar),
}

impl ComputeOutcome {
    /// Where the robot is heading, given where it currently is.
    pub fn destination<'a>(&'a self, position: &'a Scalar) -> &'a Scalar {
        match self {
            ComputeOutcome::Stay => position,
            ComputeOutcome::MoveTo(d) => d,
        }
    }

    pub fn is_stay(&self) -> bool {
        matches!(self, ComputeOutcome::Stay)
    }
}

/// Position-dependent trimming: drops up to `2f` of the smallest positions
/// that lie below the caller and up to `2f` of the largest that lie above it.
///
/// Returns `{P_lo, ..., P_hi}` where `lo` is the caller's index when it is
/// below `P_{2f+1}` (else `2f+1`) and `hi` is the caller's index when it is
/// above `P_{n-2f}` (else `n-2f`). Copies of the caller's own value are never
/// trimmed away on the side the caller sits on.
pub fn trim_2f(view: &RobotView) -> Result<PositionMultiset, ProtocolError> {
    let Params { n, f } = view.params;
    if n <= 4 * f {
        return Err(ProtocolError::TrimUndefined { n, f });
    }
    let me = &view.self_position;
    let snapshot = &view.snapshot;
    let low_cut = 2 * f + 1;
    let high_cut = n - 2 * f;

    let lo = if me < view.pos(low_cut) {
        snapshot.first_index_of(me).expect("validated in RobotView::new")
    } else {
        low_cut
    };
    let hi = if me > view.pos(high_cut) {
        snapshot.last_index_of(me).expect("validated in RobotView::new")
    } else {
        high_cut
    };
    Ok(snapshot.slice(lo, hi).expect("2f+1 <= n-2f whenever n > 4f"))
}

/// Midpoint of the range of a nonempty multiset.
pub fn center(s: &PositionMultiset) -> Result<Scalar, crate::CoreError> {
    Ok(s.range()?.center())
}

/// True iff the caller is at or below `P_{f+1}` or at or above `P_{n-f}`.
pub fn elected(view: &RobotView) -> Result<bool, ProtocolError> {
    let Params { n, f } = view.params;
    if n < f + 1 {
        return Err(ProtocolError::ElectionUndefined { n, f });
    }
    let me = &view.self_position;
    Ok(me <= view.pos(f + 1) || me >= view.pos(n - f))
}

/// One Compute phase of the convergence algorithm: elected robots head to
/// `center(trim_2f(P))`, the others stay.
pub fn convergence_compute(view: &RobotView) -> Result<ComputeOutcome, ProtocolError> {
    if !elected(view)? {
        return Ok(ComputeOutcome::Stay);
    }
    let trimmed = trim_2f(view)?;
    let target = center(&trimmed).expect("trim keeps the caller, so it is nonempty");
    Ok(ComputeOutcome::MoveTo(target))
}

/// A deterministic, oblivious algorithm a correct robot runs in its Compute
/// phase. Cautiousness is not assumed here; `analysis` checks it on traces.
pub trait CautiousAlgorithm: Send + Sync {
    fn name(&self) -> &str;

    /// Rejects network sizes the algorithm is not defined for.
    fn validate(&self, params: Params) -> Result<(), ProtocolError>;

    fn compute(&self, view: &RobotView) -> Result<ComputeOutcome, ProtocolError>;
}

/// The trim/center/elect algorithm, correct for `n > 5f`. Executable (but
/// without guarantees) for `4f < n <= 5f`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrimmedCenter;

impl CautiousAlgorithm for TrimmedCenter {
    fn name(&self) -> &str {
        "algo4"
    }

    fn validate(&self, params: Params) -> Result<(), ProtocolError> {
        if params.n <= 4 * params.f {
            return Err(ProtocolError::TrimUndefined {
                n: params.n,
                f: params.f,
            });
        }
        Ok(())
    }

    fn compute(&self, view: &RobotView) -> Result<ComputeOutcome, ProtocolError> {
        convergence_compute(view)
    }
}

/// Comparison algorithm: every robot drops the `f` smallest and `f` largest
/// positions unconditionally and moves to the midpoint of what is left.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullTrimMidpoint;

impl CautiousAlgorithm for FullTrimMidpoint {
    fn name(&self) -> &str {
        "fulltrim"
    }

    fn validate(&self, params: Params) -> Result<(), ProtocolError> {
        if params.n <= 2 * params.f {
            return Err(ProtocolError::Unsupported {
                algorithm: self.name().to_string(),
                requirement: "n > 2f",
                n: params.n,
                f: params.f,
            });
        }
        Ok(())
    }

    fn compute(&self, view: &RobotView) -> Result<ComputeOutcome, ProtocolError> {
        self.validate(view.params)?;
        let Params { n, f } = view.params;
        let target = Scalar::midpoint(view.pos(f + 1), view.pos(n - f));
        Ok(ComputeOutcome::MoveTo(target))
    }
}

/// Never moves. Useful only as a negative control for the non-triviality
/// checker.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysStay;

impl CautiousAlgorithm for AlwaysStay {
    fn name(&self) -> &str {
        "stay"
    }

    fn validate(&self, _params: Params) -> Result<(), ProtocolError> {
        Ok(())
    }

    fn compute(&self, _view: &RobotView) -> Result<ComputeOutcome, ProtocolError> {
        Ok(ComputeOutcome::Stay)
    }
}

/// Looks up a built-in algorithm by its CLI name.
pub fn algorithm_by_name(name: &str) -> Option<Box<dyn CautiousAlgorithm>> {
    match name {
        "algo4" => Some(Box::new(TrimmedCenter)),
        "fulltrim" => Some(Box::new(FullTrimMidpoint)),
        "stay" => Some(Box::new(AlwaysStay)),
        _ => None,
    }
}
