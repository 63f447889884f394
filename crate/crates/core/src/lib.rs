//! Deterministic simulator for anonymous, oblivious robots on a line that
//! must converge despite up to `f` Byzantine robots.
//!
//! The crate is layered bottom-up:
//!
//! - [`scalar`] and [`multiset`]: exact rationals and sorted position
//!   multisets.
//! - [`protocol`]: the trim/center/elect convergence algorithm and the
//!   [`CautiousAlgorithm`] trait.
//! - [`engine`]: the Look-Compute-Move state machine under ATOM or CORDA.
//! - [`scheduler`]: synchronous, k-bounded, random asynchronous and scripted
//!   schedulers plus the fairness auditor.
//! - [`adversary`]: the lower-bound construction for `3f < n <= 5f`.
//! - [`analysis`]: trace checkers for cautiousness, convergence, shrinking
//!   and the destination half-bound.
//! - [`experiment`]: configuration, single runs and parameter sweeps.

// Errors carry exact positions and are off the hot path.
#![allow(clippy::result_large_err)]

pub mod adversary;
pub mod analysis;
pub mod engine;
pub mod experiment;
pub mod multiset;
pub mod protocol;
pub mod scalar;
pub mod scheduler;
pub mod trace;

pub use multiset::{Interval, PositionMultiset};
pub use protocol::CautiousAlgorithm;
pub use scalar::Scalar;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("operation on an empty multiset")]
    EmptyMultiset,
    #[error("index {k} out of range for multiset of size {len}")]
    IndexOutOfRange { k: usize, len: usize },
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse `{0}` as a rational")]
    Parse(String),
}
