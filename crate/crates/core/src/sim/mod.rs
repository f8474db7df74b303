//! Monte-Carlo engine: executes the routing decision trees on sampled grid
//! realizations to estimate the nearest-charging-road distance law and the
//! charging-road usage probability, including per-event conditional estimates
//! for cross-validation against the integral forms.

mod estimate;
mod walk;

pub use estimate::{
    estimate_cdf_dn, estimate_conditional, estimate_prob_tc, rejection_sample_x1,
    rejection_sample_x2, sample_nearest_road_distance, EstimateResult,
};
pub use walk::{walk_tree, Leaf, TripOutcome};

use thiserror::Error;

use crate::mplp::ParamError;

/// Failure modes of the simulation estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] ParamError),
    /// The requested conditioning cannot be sampled at this charging fraction
    /// (for example, conditioning on a charging road when p = 0).
    #[error("charging fraction {p} makes the requested conditioning impossible")]
    DegenerateFraction { p: f64 },
    /// Too few acceptances to continue rejection sampling: the estimated
    /// acceptance probability fell below 1e-6 over the first 1e5 attempts.
    #[error("rejection sampling starved: {accepted} acceptances in {attempts} attempts")]
    AcceptanceStarvation { attempts: u64, accepted: u64 },
    #[error("evaluation grid must be finite and sorted ascending")]
    InvalidGrid,
    #[error("at least one trial is required")]
    NoTrials,
    /// The realization contradicts the event context it was paired with; the
    /// trial cannot be interpreted.
    #[error("realization inconsistent with event context: {0}")]
    InconsistentRealization(&'static str),
}
