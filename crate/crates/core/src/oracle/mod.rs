//! Exact geometric routing oracle.
//!
//! The policy simulation walks a decision tree over a handful of summary
//! distances. This module independently answers the same questions by brute
//! force: embed a sampled realization as an explicit crossing graph on an
//! integer micrometer lattice, find the policy-optimal route (shortest, then
//! maximum charging length, ties broken by lexicographic node order), and
//! read the charging outcome directly off the winning polyline.
//!
//! Integer coordinates make equal-length ties exact, so the charging
//! tie-break fires deterministically instead of depending on float summation
//! order.

mod check;
mod grid;
mod route;

pub use check::{cross_check, CrossCheckReport, Discrepancy};
pub use grid::{build_grid, Axis, GridGraph};
pub use route::{best_route, enumerate_best, PairCost, RouteResult};

/// Failures of the oracle itself. Both indicate an internal invariant break:
/// crossing graphs of a realization are always connected.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("destination unreachable from source in crossing graph")]
    Unreachable,
    #[error("optimal route walk found no continuation")]
    NoContinuation,
}
