use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ParamError;

/// Per-trial generator: one key per master seed, one counter stream per trial
/// index. Streams are independent, so trials can be partitioned across
/// workers in any order without changing any trial's draws.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws one inter-road gap of an intensity-`rate` Poisson point process.
pub fn sample_exponential_gap<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> Result<f64, ParamError> {
    // 1 - gen::<f64>() lies in (0, 1], so the log is finite.
    exponential_gap_from_uniform(1.0 - rng.gen::<f64>(), rate)
}

/// Inverse survival function of Exp(rate): maps u in (0, 1] to -ln(u)/rate.
fn exponential_gap_from_uniform(u: f64, rate: f64) -> Result<f64, ParamError> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(ParamError::Intensity(rate));
    }
    Ok(-u.ln() / rate)
}
