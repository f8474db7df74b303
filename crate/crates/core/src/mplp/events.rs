use serde::Serialize;

use super::{Orientation, Road, RoadRealization};

/// Trip class: orientation of the destination road relative to the source
/// road crossed with which endpoint roads charge. E1..E4 are the parallel
/// classes, E5..E8 the perpendicular ones, each block ordered (source, dest)
/// = (charging, charging), (charging, not), (not, charging), (not, not).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Event {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
}

impl Event {
    pub const ALL: [Event; 8] = [
        Event::E1,
        Event::E2,
        Event::E3,
        Event::E4,
        Event::E5,
        Event::E6,
        Event::E7,
        Event::E8,
    ];

    pub fn index(self) -> usize {
        match self {
            Event::E1 => 0,
            Event::E2 => 1,
            Event::E3 => 2,
            Event::E4 => 3,
            Event::E5 => 4,
            Event::E6 => 5,
            Event::E7 => 6,
            Event::E8 => 7,
        }
    }

    /// 1-based number, matching the display form "E3".
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_flags(orientation: Orientation, source_charging: bool, dest_charging: bool) -> Self {
        match (orientation, source_charging, dest_charging) {
            (Orientation::Parallel, true, true) => Event::E1,
            (Orientation::Parallel, true, false) => Event::E2,
            (Orientation::Parallel, false, true) => Event::E3,
            (Orientation::Parallel, false, false) => Event::E4,
            (Orientation::Perpendicular, true, true) => Event::E5,
            (Orientation::Perpendicular, true, false) => Event::E6,
            (Orientation::Perpendicular, false, true) => Event::E7,
            (Orientation::Perpendicular, false, false) => Event::E8,
        }
    }

    pub fn orientation(self) -> Orientation {
        if self.index() < 4 {
            Orientation::Parallel
        } else {
            Orientation::Perpendicular
        }
    }

    pub fn source_charging(self) -> bool {
        matches!(self, Event::E1 | Event::E2 | Event::E5 | Event::E6)
    }

    pub fn dest_charging(self) -> bool {
        matches!(self, Event::E1 | Event::E3 | Event::E5 | Event::E7)
    }

    /// Event mass at charging fraction `p`, including the 1/2 orientation
    /// coin: p^2/2, p(1-p)/2, p(1-p)/2 or (1-p)^2/2 per block.
    pub fn probability(self, p: f64) -> f64 {
        let src = if self.source_charging() { p } else { 1.0 - p };
        let dst = if self.dest_charging() { p } else { 1.0 - p };
        0.5 * src * dst
    }
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "E{}", self.number())
    }
}

/// Event classification plus the nearest-road distance bundle the routing
/// decisions read. Distances are absent when no qualifying road lies within
/// the relevant span: `(0, d_v)` for the family parallel to the source road
/// (`d_nhc`, `d_nhnc`), `(0, d_h)` for the perpendicular family (`d_nvc`,
/// `d_nvnc`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventContext {
    pub event: Event,
    /// Nearest charging road of the parallel family toward the destination.
    pub d_nhc: Option<f64>,
    /// Nearest charging road of the perpendicular family toward the destination.
    pub d_nvc: Option<f64>,
    /// Non-charging counterpart of `d_nhc`.
    pub d_nhnc: Option<f64>,
    /// Non-charging counterpart of `d_nvc`.
    pub d_nvnc: Option<f64>,
    /// Nearest parallel-family road away from the destination; always exists.
    pub d_l: f64,
    /// Gap `d_nvc - d_nvnc`, present when the non-charging road is closer and
    /// both are in span.
    pub x1: Option<f64>,
    /// Gap `d_nhc - d_nhnc`, same convention for the parallel family.
    pub x2: Option<f64>,
}

fn nearest_in_span(roads: &[Road], span: f64, charging: bool) -> Option<f64> {
    roads
        .iter()
        .take_while(|r| r.offset < span)
        .find(|r| r.charging == charging)
        .map(|r| r.offset)
}

fn gap(near_charging: Option<f64>, near_noncharging: Option<f64>) -> Option<f64> {
    match (near_charging, near_noncharging) {
        (Some(c), Some(nc)) if nc < c => Some(c - nc),
        _ => None,
    }
}

/// Classifies a realization into its event and extracts the distance bundle.
pub fn classify_event(realization: &RoadRealization) -> EventContext {
    let geo = &realization.geometry;
    let event = Event::from_flags(
        geo.orientation(),
        realization.source_charging,
        realization.dest_charging,
    );
    let d_nhc = nearest_in_span(realization.h_toward(), geo.d_v(), true);
    let d_nhnc = nearest_in_span(realization.h_toward(), geo.d_v(), false);
    let d_nvc = nearest_in_span(realization.v_toward(), geo.d_h(), true);
    let d_nvnc = nearest_in_span(realization.v_toward(), geo.d_h(), false);
    let (d_l, _) = realization.opposite_nearest();
    EventContext {
        event,
        d_nhc,
        d_nvc,
        d_nhnc,
        d_nvnc,
        d_l,
        x1: gap(d_nvc, d_nvnc),
        x2: gap(d_nhc, d_nhnc),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{generate_realization, trial_rng, ModelParams, SpanPolicy, TripGeometry};
    use super::*;
    use rand::Rng;

    #[test]
    fn flag_table() {
        use Orientation::*;
        assert_eq!(Event::from_flags(Parallel, true, false), Event::E2);
        assert_eq!(Event::from_flags(Parallel, false, true), Event::E3);
        assert_eq!(Event::from_flags(Perpendicular, true, true), Event::E5);
        assert_eq!(Event::from_flags(Perpendicular, false, false), Event::E8);
        for e in Event::ALL {
            assert_eq!(
                Event::from_flags(e.orientation(), e.source_charging(), e.dest_charging()),
                e
            );
        }
    }

    #[test]
    fn masses_sum_to_one() {
        for p in [0.0, 0.2, 0.5, 1.0] {
            let total: f64 = Event::ALL.iter().map(|e| e.probability(p)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_event_frequencies() {
        // Event masses do not depend on the spans, so small spans keep this cheap.
        let params = ModelParams::new(0.016, 0.3).unwrap();
        let trials = 1_000_000u64;
        let mut counts = [0u64; 8];
        for seed in 0..trials {
            let mut rng = trial_rng(31, seed);
            let orientation = if rng.gen_bool(0.5) {
                Orientation::Parallel
            } else {
                Orientation::Perpendicular
            };
            let geo = TripGeometry::new(orientation, 200.0, 300.0).unwrap();
            let real = generate_realization(&params, &geo, SpanPolicy::Minimal, &mut rng);
            counts[classify_event(&real).event.index()] += 1;
        }
        for e in Event::ALL {
            let want = e.probability(0.3);
            let got = counts[e.index()] as f64 / trials as f64;
            let sigma = (want * (1.0 - want) / trials as f64).sqrt();
            assert!(
                (got - want).abs() < 3.0 * sigma + 1e-12,
                "{e}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn distance_bundle_respects_spans() {
        let params = ModelParams::new(0.01, 0.4).unwrap();
        let geo = TripGeometry::new(Orientation::Parallel, 500.0, 800.0).unwrap();
        for seed in 0..500 {
            let mut rng = trial_rng(17, seed);
            let real = generate_realization(&params, &geo, SpanPolicy::Minimal, &mut rng);
            let ctx = classify_event(&real);
            for d in [ctx.d_nhc, ctx.d_nhnc] {
                if let Some(d) = d {
                    assert!(d > 0.0 && d < geo.d_v());
                }
            }
            for d in [ctx.d_nvc, ctx.d_nvnc] {
                if let Some(d) = d {
                    assert!(d > 0.0 && d < geo.d_h());
                }
            }
            assert!(ctx.d_l > 0.0);
            match (ctx.d_nhc, ctx.d_nhnc) {
                (Some(c), Some(nc)) if nc < c => assert_eq!(ctx.x2, Some(c - nc)),
                _ => assert_eq!(ctx.x2, None),
            }
            if let Some(x2) = ctx.x2 {
                assert!(x2 > 0.0 && x2 < geo.d_v());
            }
            if let Some(x1) = ctx.x1 {
                assert!(x1 > 0.0 && x1 < geo.d_h());
            }
        }
    }
}
