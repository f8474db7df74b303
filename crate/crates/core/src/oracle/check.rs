use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use super::{best_route, build_grid};
use crate::mplp::{
    classify_event, generate_realization, trial_rng, Event, ModelParams, Orientation,
    RoadRealization, SpanPolicy, TripGeometry,
};
use crate::sim::walk_tree;
use rand::Rng;

/// Roads kept beyond each span boundary. A detour past the nearest
/// out-of-span road always adds length, so one per side already exposes every
/// route the optimum can use.
const MARGIN: usize = 1;

/// Two distances count as equal when they differ by less than a tenth of a
/// millimeter: the lattice quantizes road offsets to the micrometer, and a
/// route prefix sums only a handful of segments.
const DN_TOL: f64 = 1e-4;

/// One trial where the decision tree and the route oracle disagreed.
#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    pub trial: u64,
    pub event: Event,
    pub leaf: String,
    pub tree_d_n: Option<f64>,
    pub tree_passes: bool,
    pub route_d_n: Option<f64>,
    pub route_passes: bool,
    pub route_length: f64,
    pub route_charging_length: f64,
    /// Full sampled grid, sufficient to replay the trial.
    pub realization: RoadRealization,
}

/// Tallies from [`cross_check`].
#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckReport {
    pub trials: u64,
    /// Trials the tree walk or the route search refused to interpret.
    pub aborts: u64,
    /// Trials where both sides returned the same passes_charging.
    pub passes_agree: u64,
    /// Trials where both sides produced a nearest-charging distance.
    pub dn_compared: u64,
    /// Of those, trials where the distances matched within tolerance.
    pub dn_agree: u64,
    pub disagreements: Vec<Discrepancy>,
}

impl CrossCheckReport {
    /// Fraction of interpreted trials agreeing on passes_charging.
    pub fn passes_agreement_rate(&self) -> f64 {
        let compared = self.trials - self.aborts;
        if compared == 0 {
            return 1.0;
        }
        self.passes_agree as f64 / compared as f64
    }

    /// Fraction of jointly-defined nearest distances agreeing within
    /// tolerance; 1.0 when no trial produced a comparable pair.
    pub fn dn_agreement_rate(&self) -> f64 {
        if self.dn_compared == 0 {
            return 1.0;
        }
        self.dn_agree as f64 / self.dn_compared as f64
    }

    /// Writes the disagreement catalog as JSON lines, one realization per
    /// line, for offline triage.
    pub fn write_catalog<W: Write>(&self, mut out: W) -> io::Result<()> {
        for d in &self.disagreements {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct TrialTally {
    aborted: bool,
    passes_match: bool,
    dn_compared: bool,
    dn_match: bool,
    discrepancy: Option<Discrepancy>,
}

/// Runs `n` independent trials, resolving each sampled realization twice:
/// once through the routing decision tree and once through the exact route
/// oracle, and tallies how often the two answers coincide.
///
/// Trials reuse the simulation engine's reproducible stream layout, so trial
/// `i` here sees exactly the realization trial `i` of the estimator would
/// see for the same seed. Trials run in parallel; the report merge is
/// sequential in trial order, so reports are deterministic for a given seed.
pub fn cross_check(
    params: &ModelParams,
    geometry: &TripGeometry,
    n: u64,
    seed: u64,
) -> CrossCheckReport {
    let tallies: Vec<TrialTally> = (0..n)
        .into_par_iter()
        .map(|trial| run_trial(params, geometry, seed, trial))
        .collect();

    let mut report = CrossCheckReport {
        trials: n,
        aborts: 0,
        passes_agree: 0,
        dn_compared: 0,
        dn_agree: 0,
        disagreements: Vec::new(),
    };
    for t in tallies {
        if t.aborted {
            report.aborts += 1;
            continue;
        }
        report.passes_agree += t.passes_match as u64;
        report.dn_compared += t.dn_compared as u64;
        report.dn_agree += t.dn_match as u64;
        if let Some(d) = t.discrepancy {
            report.disagreements.push(d);
        }
    }
    report
}

fn run_trial(params: &ModelParams, base: &TripGeometry, seed: u64, trial: u64) -> TrialTally {
    let abort = TrialTally {
        aborted: true,
        passes_match: false,
        dn_compared: false,
        dn_match: false,
        discrepancy: None,
    };

    let mut rng = trial_rng(seed, trial);
    let orientation = if rng.gen_bool(0.5) {
        Orientation::Parallel
    } else {
        Orientation::Perpendicular
    };
    let geometry = base.with_orientation(orientation);
    let realization = generate_realization(params, &geometry, SpanPolicy::Minimal, &mut rng);
    let context = classify_event(&realization);
    let outcome = match walk_tree(&context, &realization, &mut rng) {
        Ok(o) => o,
        Err(_) => return abort,
    };
    let route = match best_route(&build_grid(&realization, MARGIN)) {
        Ok(r) => r,
        Err(_) => return abort,
    };

    let passes_match = outcome.passes_charging == route.passes_charging;
    let (dn_compared, dn_match) = match (outcome.d_n, route.d_n) {
        (Some(a), Some(b)) => (true, (a - b).abs() <= DN_TOL),
        (None, None) => (false, false),
        _ => (false, false),
    };
    let presence_match = outcome.d_n.is_some() == route.d_n.is_some();
    let agreed = passes_match && presence_match && (!dn_compared || dn_match);

    TrialTally {
        aborted: false,
        passes_match,
        dn_compared,
        dn_match,
        discrepancy: (!agreed).then(|| Discrepancy {
            trial,
            event: outcome.event,
            leaf: outcome.leaf.to_string(),
            tree_d_n: outcome.d_n,
            tree_passes: outcome.passes_charging,
            route_d_n: route.d_n,
            route_passes: route.passes_charging,
            route_length: route.length,
            route_charging_length: route.charging_length,
            realization,
        }),
    }
}
