use rand::Rng;
use serde::Serialize;

use super::rng::sample_exponential_gap;
use super::{ModelParams, TripGeometry};

/// One road of a sampled grid: signed perpendicular offset from the source
/// and the charging flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Road {
    pub offset: f64,
    pub charging: bool,
}

/// How far beyond the trip span road sampling continues on every side.
///
/// The routing decisions read at most the first road past each span boundary
/// (detours use the nearest road outside the span), so `Minimal` is enough
/// for simulation; `Extended` exists for denser validation graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpanPolicy {
    Minimal,
    Extended { extra: usize },
}

impl SpanPolicy {
    fn extra(self) -> usize {
        match self {
            SpanPolicy::Minimal => 1,
            SpanPolicy::Extended { extra } => extra.max(1),
        }
    }
}

/// One sampled grid around a trip.
///
/// `h_roads` holds the roads parallel to the source road, keyed by signed
/// offset (positive = toward the destination, span of interest `(0, d_v)`).
/// `v_roads` holds the perpendicular family, span `(0, d_h)`. Offsets are
/// strictly increasing and never exactly 0; the source and destination roads
/// are not in the lists, only their charging flags are stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoadRealization {
    pub geometry: TripGeometry,
    pub source_charging: bool,
    pub dest_charging: bool,
    pub h_roads: Vec<Road>,
    pub v_roads: Vec<Road>,
}

impl RoadRealization {
    fn split(roads: &[Road]) -> (&[Road], &[Road]) {
        let i = roads.partition_point(|r| r.offset < 0.0);
        (&roads[..i], &roads[i..])
    }

    /// Roads parallel to the source road on the destination side, ascending.
    pub fn h_toward(&self) -> &[Road] {
        Self::split(&self.h_roads).1
    }

    /// Roads parallel to the source road on the opposite side, ascending
    /// (the nearest one is last).
    pub fn h_opposite(&self) -> &[Road] {
        Self::split(&self.h_roads).0
    }

    /// Perpendicular-family roads on the destination side, ascending.
    pub fn v_toward(&self) -> &[Road] {
        Self::split(&self.v_roads).1
    }

    /// Perpendicular-family roads on the opposite side, ascending.
    pub fn v_opposite(&self) -> &[Road] {
        Self::split(&self.v_roads).0
    }

    /// Nearest opposite-side road parallel to the source road, as (distance,
    /// charging). Sampling guarantees one exists.
    pub fn opposite_nearest(&self) -> (f64, bool) {
        let road = self
            .h_opposite()
            .last()
            .expect("sampling always places a road on the opposite side");
        (-road.offset, road.charging)
    }
}

/// Samples a grid realization around the trip.
///
/// Both road families are 1-D Poisson point processes of intensity `lambda`,
/// thinned into charging roads with probability `p`; the source and
/// destination road flags are independent Bernoulli(p) draws. Gap-by-gap
/// sampling extends past each span boundary until `span_policy` is satisfied,
/// so every quantity the routing decisions can read exists; there is no fixed
/// sampling box. Offsets that collide exactly with a span boundary (ties are
/// measure zero but floats can produce them) are redrawn.
pub fn generate_realization<R: Rng + ?Sized>(
    params: &ModelParams,
    geometry: &TripGeometry,
    span_policy: SpanPolicy,
    rng: &mut R,
) -> RoadRealization {
    let extra = span_policy.extra();
    let source_charging = rng.gen_bool(params.p());
    let dest_charging = rng.gen_bool(params.p());
    let h_toward = sample_side(params, geometry.d_v(), extra, rng);
    let h_opposite = sample_side(params, 0.0, extra, rng);
    let v_toward = sample_side(params, geometry.d_h(), extra, rng);
    let v_opposite = sample_side(params, 0.0, extra, rng);
    RoadRealization {
        geometry: *geometry,
        source_charging,
        dest_charging,
        h_roads: merge_signed(h_opposite, h_toward),
        v_roads: merge_signed(v_opposite, v_toward),
    }
}

/// One side of one family: cumulative exponential gaps from the source road
/// outward, stopping once `extra` roads lie strictly past `boundary`.
fn sample_side<R: Rng + ?Sized>(
    params: &ModelParams,
    boundary: f64,
    extra: usize,
    rng: &mut R,
) -> Vec<Road> {
    let mut roads = Vec::new();
    let mut at = 0.0;
    let mut beyond = 0;
    while beyond < extra {
        let gap = sample_exponential_gap(rng, params.lambda()).expect("params are validated");
        if gap <= 0.0 {
            continue;
        }
        let offset = at + gap;
        if offset == boundary {
            continue;
        }
        let charging = rng.gen_bool(params.p());
        roads.push(Road { offset, charging });
        at = offset;
        if offset > boundary {
            beyond += 1;
        }
    }
    roads
}

fn merge_signed(opposite: Vec<Road>, toward: Vec<Road>) -> Vec<Road> {
    let mut roads: Vec<Road> = opposite
        .into_iter()
        .rev()
        .map(|r| Road {
            offset: -r.offset,
            charging: r.charging,
        })
        .collect();
    roads.extend(toward);
    roads
}

#[cfg(test)]
mod tests {
    use super::super::trial_rng;
    use super::*;
    use crate::mplp::Orientation;

    fn geometry() -> TripGeometry {
        TripGeometry::new(Orientation::Parallel, 2000.0, 3000.0).unwrap()
    }

    fn check_invariants(real: &RoadRealization, extra: usize) {
        let geo = &real.geometry;
        for (roads, span) in [(&real.h_roads, geo.d_v()), (&real.v_roads, geo.d_h())] {
            for w in roads.windows(2) {
                assert!(w[0].offset < w[1].offset, "offsets not increasing");
            }
            for r in roads.iter() {
                assert!(r.offset != 0.0 && r.offset != span);
            }
            let past = roads.iter().filter(|r| r.offset > span).count();
            assert!(past >= extra, "need {extra} roads past the span, got {past}");
            let below = roads.iter().filter(|r| r.offset < 0.0).count();
            assert!(below >= extra);
        }
    }

    #[test]
    fn invariants_hold_across_seeds() {
        let params = ModelParams::new(0.016, 0.3).unwrap();
        for seed in 0..200 {
            let mut rng = trial_rng(11, seed);
            let real = generate_realization(&params, &geometry(), SpanPolicy::Minimal, &mut rng);
            check_invariants(&real, 1);
        }
        for seed in 0..50 {
            let mut rng = trial_rng(12, seed);
            let real = generate_realization(
                &params,
                &geometry(),
                SpanPolicy::Extended { extra: 3 },
                &mut rng,
            );
            check_invariants(&real, 3);
        }
    }

    #[test]
    fn degenerate_fractions() {
        let geo = geometry();
        let all = ModelParams::new(0.01, 1.0).unwrap();
        let none = ModelParams::new(0.01, 0.0).unwrap();
        for seed in 0..20 {
            let mut rng = trial_rng(3, seed);
            let real = generate_realization(&all, &geo, SpanPolicy::Minimal, &mut rng);
            assert!(real.source_charging && real.dest_charging);
            assert!(real.h_roads.iter().chain(&real.v_roads).all(|r| r.charging));

            let mut rng = trial_rng(4, seed);
            let real = generate_realization(&none, &geo, SpanPolicy::Minimal, &mut rng);
            assert!(!real.source_charging);
            assert!(real.h_roads.iter().chain(&real.v_roads).all(|r| !r.charging));
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let params = ModelParams::new(0.016, 0.2).unwrap();
        let a = generate_realization(&params, &geometry(), SpanPolicy::Minimal, &mut trial_rng(9, 77));
        let b = generate_realization(&params, &geometry(), SpanPolicy::Minimal, &mut trial_rng(9, 77));
        assert_eq!(a, b);
    }

    #[test]
    fn span_road_count_matches_poisson_mean() {
        // E[# roads in (0, d_v)] = lambda * d_v = 48.
        let params = ModelParams::new(0.016, 0.2).unwrap();
        let geo = geometry();
        let trials = 10_000u64;
        let mut total = 0usize;
        for seed in 0..trials {
            let mut rng = trial_rng(21, seed);
            let real = generate_realization(&params, &geo, SpanPolicy::Minimal, &mut rng);
            total += real
                .h_toward()
                .iter()
                .filter(|r| r.offset < geo.d_v())
                .count();
        }
        let mean = total as f64 / trials as f64;
        // var of a Poisson(48) mean over 1e4 trials: sqrt(48/1e4) ~ 0.069
        let sigma = (48.0f64 / trials as f64).sqrt();
        assert!(
            (mean - 48.0).abs() < 3.0 * sigma,
            "mean {mean}, want 48 +/- {}",
            3.0 * sigma
        );
    }

    #[test]
    fn opposite_nearest_reads_last_negative_road() {
        let params = ModelParams::new(0.016, 0.5).unwrap();
        let mut rng = trial_rng(2, 5);
        let real = generate_realization(&params, &geometry(), SpanPolicy::Minimal, &mut rng);
        let (d_l, _) = real.opposite_nearest();
        assert!(d_l > 0.0);
        assert!(real.h_opposite().iter().all(|r| -r.offset >= d_l));
    }
}
