use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::walk::{walk_tree, TripOutcome};
use super::SimError;
use crate::mplp::{
    classify_event, generate_realization, sample_exponential_gap, trial_rng, Event, ModelParams,
    Orientation, ParamError, SpanPolicy, TripGeometry,
};
use crate::stats::{bernoulli_stderr, EmpiricalCdf};

/// Abort threshold for rejection sampling: if nothing is accepted within this
/// many attempts the acceptance probability is below 1e-5, well under the
/// 1e-6 floor the estimators promise to detect.
const STARVATION_WINDOW: u64 = 100_000;

/// One Monte-Carlo probability estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateResult {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

fn bernoulli(successes: u64, n: u64, seed: u64) -> EstimateResult {
    let value = successes as f64 / n as f64;
    EstimateResult {
        value,
        stderr: bernoulli_stderr(value, n),
        n,
        seed,
    }
}

fn validate_grid(xs: &[f64]) -> Result<(), SimError> {
    let ok = xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(SimError::InvalidGrid)
    }
}

/// Adds 1 to every grid slot strictly above `d`. `xs` is sorted, so the
/// affected slots form a suffix.
fn count_below(counts: &mut [u64], xs: &[f64], d: f64) {
    let start = xs.partition_point(|&x| x <= d);
    for c in &mut counts[start..] {
        *c += 1;
    }
}

/// One full trial: orientation coin, realization, classification, tree walk.
fn run_trial(
    params: &ModelParams,
    base: TripGeometry,
    seed: u64,
    trial: u64,
) -> Result<TripOutcome, SimError> {
    let mut rng = trial_rng(seed, trial);
    let orientation = if rng.gen_bool(0.5) {
        Orientation::Parallel
    } else {
        Orientation::Perpendicular
    };
    let geometry = base.with_orientation(orientation);
    let realization = generate_realization(params, &geometry, SpanPolicy::Minimal, &mut rng);
    let context = classify_event(&realization);
    walk_tree(&context, &realization, &mut rng)
}

/// Estimates P(D_n < x) at each grid point by `n` independent trials.
///
/// Each trial draws the trip orientation with probability 1/2 each, samples a
/// grid realization, and walks the routing tree. Trials fan out across the
/// rayon pool; per-trial generators are derived from `(seed, trial)` and the
/// per-grid-point hit counts are merged associatively, so the result is
/// identical for any worker count.
pub fn estimate_cdf_dn(
    params: &ModelParams,
    d_h: f64,
    d_v: f64,
    xs: &[f64],
    n: u64,
    seed: u64,
) -> Result<Vec<EstimateResult>, SimError> {
    validate_grid(xs)?;
    if n == 0 {
        return Err(SimError::NoTrials);
    }
    let base = TripGeometry::new(Orientation::Parallel, d_h, d_v)?;
    let counts = (0..n)
        .into_par_iter()
        .try_fold(
            || vec![0u64; xs.len()],
            |mut counts, trial| {
                let outcome = run_trial(params, base, seed, trial)?;
                if let Some(d) = outcome.d_n {
                    count_below(&mut counts, xs, d);
                }
                Ok::<_, SimError>(counts)
            },
        )
        .try_reduce(
            || vec![0u64; xs.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += *y;
                }
                Ok(a)
            },
        )?;
    Ok(counts.iter().map(|&c| bernoulli(c, n, seed)).collect())
}

/// Estimates P(T_c), the probability the trip drives on at least one charging
/// road. Same trial scheme as [`estimate_cdf_dn`].
pub fn estimate_prob_tc(
    params: &ModelParams,
    d_h: f64,
    d_v: f64,
    n: u64,
    seed: u64,
) -> Result<EstimateResult, SimError> {
    if n == 0 {
        return Err(SimError::NoTrials);
    }
    let base = TripGeometry::new(Orientation::Parallel, d_h, d_v)?;
    let hits = (0..n)
        .into_par_iter()
        .try_fold(
            || 0u64,
            |acc, trial| {
                let outcome = run_trial(params, base, seed, trial)?;
                Ok::<_, SimError>(acc + u64::from(outcome.passes_charging))
            },
        )
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(bernoulli(hits, n, seed))
}

/// Estimates P(D_n < x | event) by rejection: realizations are sampled until
/// `n_accepted` fall in the requested event.
///
/// The orientation coin is independent of the endpoint flags and the roads,
/// so conditioning on the event fixes the orientation outright; only the
/// endpoint flags are rejected on. Runs sequentially: acceptance runs are
/// cheap at the intended scale and a data-dependent stopping rule does not
/// parallelize deterministically.
pub fn estimate_conditional(
    event: Event,
    params: &ModelParams,
    d_h: f64,
    d_v: f64,
    xs: &[f64],
    n_accepted: u64,
    seed: u64,
) -> Result<Vec<EstimateResult>, SimError> {
    validate_grid(xs)?;
    if n_accepted == 0 {
        return Err(SimError::NoTrials);
    }
    if event.probability(params.p()) == 0.0 {
        return Err(SimError::DegenerateFraction { p: params.p() });
    }
    let geometry = TripGeometry::new(event.orientation(), d_h, d_v)?;
    let mut counts = vec![0u64; xs.len()];
    let mut accepted = 0u64;
    let mut attempts = 0u64;
    while accepted < n_accepted {
        if attempts == STARVATION_WINDOW && accepted == 0 {
            return Err(SimError::AcceptanceStarvation { attempts, accepted });
        }
        let mut rng = trial_rng(seed, attempts);
        attempts += 1;
        let realization = generate_realization(params, &geometry, SpanPolicy::Minimal, &mut rng);
        let context = classify_event(&realization);
        if context.event != event {
            continue;
        }
        let outcome = walk_tree(&context, &realization, &mut rng)?;
        accepted += 1;
        if let Some(d) = outcome.d_n {
            count_below(&mut counts, xs, d);
        }
    }
    Ok(counts
        .iter()
        .map(|&c| bernoulli(c, n_accepted, seed))
        .collect())
}

/// Draws `n` samples of the charging/non-charging gap over `span` by
/// rejection: nearest-road distances of both kinds are drawn and a pair is
/// accepted when the non-charging road is closer and the charging road lies
/// within the span.
fn rejection_sample_gap(
    params: &ModelParams,
    span: f64,
    n: u64,
    seed: u64,
) -> Result<EmpiricalCdf, SimError> {
    if n == 0 {
        return Err(SimError::NoTrials);
    }
    if !span.is_finite() || span <= 0.0 {
        return Err(SimError::Param(ParamError::Distance(span)));
    }
    let p = params.p();
    if p <= 0.0 || p >= 1.0 {
        return Err(SimError::DegenerateFraction { p });
    }
    let mut samples = Vec::with_capacity(n as usize);
    let mut attempts = 0u64;
    while (samples.len() as u64) < n {
        if attempts == STARVATION_WINDOW && samples.is_empty() {
            return Err(SimError::AcceptanceStarvation {
                attempts,
                accepted: 0,
            });
        }
        let mut rng = trial_rng(seed, attempts);
        attempts += 1;
        let near_noncharging = sample_exponential_gap(&mut rng, params.noncharging_rate())?;
        let near_charging = sample_exponential_gap(&mut rng, params.charging_rate())?;
        if near_noncharging < near_charging && near_charging < span {
            samples.push(near_charging - near_noncharging);
        }
    }
    Ok(EmpiricalCdf::new(samples))
}

/// Rejection sampler for the perpendicular-family gap X1 over `(0, d_h)`.
pub fn rejection_sample_x1(
    params: &ModelParams,
    d_h: f64,
    n: u64,
    seed: u64,
) -> Result<EmpiricalCdf, SimError> {
    rejection_sample_gap(params, d_h, n, seed)
}

/// Rejection sampler for the parallel-family gap X2 over `(0, d_v)`.
pub fn rejection_sample_x2(
    params: &ModelParams,
    d_v: f64,
    n: u64,
    seed: u64,
) -> Result<EmpiricalCdf, SimError> {
    rejection_sample_gap(params, d_v, n, seed)
}

/// Samples the distance from the source to the nearest road of the requested
/// kind (`None` = any road) by walking the road process gap by gap.
///
/// This is a construction-level oracle: it never uses the closed-form law of
/// the thinned process, only per-road exponential gaps and charging flags.
pub fn sample_nearest_road_distance<R: Rng + ?Sized>(
    params: &ModelParams,
    want_charging: Option<bool>,
    rng: &mut R,
) -> Result<f64, SimError> {
    let p = params.p();
    let impossible = matches!(want_charging, Some(true) if p == 0.0)
        || matches!(want_charging, Some(false) if p == 1.0);
    if impossible {
        return Err(SimError::DegenerateFraction { p });
    }
    let mut at = 0.0;
    loop {
        at += sample_exponential_gap(rng, params.lambda())?;
        let charging = rng.gen_bool(p);
        match want_charging {
            None => return Ok(at),
            Some(want) if want == charging => return Ok(at),
            Some(_) => {}
        }
    }
}
