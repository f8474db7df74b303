//! Street grids as a Manhattan Poisson line process in which a fraction `p`
//! of roads carry dynamic-charging hardware.
//!
//! The crate answers two questions about a trip across such a grid, both by
//! numerical evaluation of closed/integral forms and by Monte-Carlo
//! simulation of the routing policy, so the two can be cross-validated:
//!
//! * how far a driver travels before first driving on a charging road
//!   ([`analytic::cdf_dn`] vs [`sim::estimate_cdf_dn`]);
//! * whether the trip uses a charging road at all ([`analytic::prob_tc`] vs
//!   [`sim::estimate_prob_tc`]).
//!
//! [`oracle`] adds an independent geometric validator: it materializes a
//! sampled grid as a graph and finds the best route (shortest, then maximum
//! charging length) by search, with no knowledge of the policy case analysis.

pub mod analytic;
pub mod mplp;
pub mod oracle;
pub mod sim;
pub mod stats;

pub use mplp::{
    classify_event, generate_realization, sample_exponential_gap, trial_rng, Event, EventContext,
    ModelParams, Orientation, ParamError, Road, RoadRealization, SpanPolicy, TripGeometry,
};
