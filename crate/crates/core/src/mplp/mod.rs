//! Model primitives: parameters, reproducible road sampling, and trip event
//! classification.

mod events;
mod params;
mod realization;
mod rng;

pub use events::{classify_event, Event, EventContext};
pub use params::{ModelParams, Orientation, ParamError, TripGeometry};
pub use realization::{generate_realization, Road, RoadRealization, SpanPolicy};
pub use rng::{sample_exponential_gap, trial_rng};
