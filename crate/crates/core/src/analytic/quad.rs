use super::AnalyticError;

/// Truncation rule for infinite integration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailRule {
    /// Cut an infinite upper limit at `lower + exponent / slowest_rate`. For
    /// integrands that decay at least as fast as e^{-slowest_rate * t}, the
    /// discarded mass is below e^{-exponent}.
    ExpDecay { exponent: f64 },
}

impl Default for TailRule {
    fn default() -> Self {
        TailRule::ExpDecay { exponent: 50.0 }
    }
}

impl TailRule {
    pub fn truncate(&self, lower: f64, slowest_rate: f64) -> f64 {
        match self {
            // rate floor keeps the window finite if a caller evaluates a
            // degenerate fraction directly
            TailRule::ExpDecay { exponent } => lower + exponent / slowest_rate.max(1e-9),
        }
    }
}

/// Adaptive Simpson settings shared by every integral evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    pub tail_rule: TailRule,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_depth: 30,
            tail_rule: TailRule::default(),
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(AnalyticError::Config("abs_tol must be positive"));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(AnalyticError::Config("rel_tol must be positive"));
        }
        if self.max_depth < 10 {
            return Err(AnalyticError::Config("max_depth must be at least 10"));
        }
        Ok(())
    }

    /// Tightened settings for the inner integral of a nested pair, so inner
    /// noise stays below the outer refinement signal.
    pub(crate) fn inner(&self) -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: (self.abs_tol * 1e-3).max(1e-14),
            rel_tol: (self.rel_tol * 1e-3).max(1e-12),
            ..*self
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    noise: f64,
    depth: u32,
    leftover: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    let at_machine_width = (b - a) <= f64::EPSILON * (a.abs().max(b.abs()) + 1.0);
    // once delta is at rounding-noise level relative to the integral scale,
    // further subdivision carries no information; without this floor an
    // absolute tolerance below eps * |value| would recurse to max_depth
    // over the whole interval
    let floor = noise + 8.0 * f64::EPSILON * (whole.abs() + left.abs() + right.abs());
    // acceptance at |delta| <= tol rather than the classical 15*tol: one
    // subdivision level more, two orders of headroom after the delta/15
    // correction, which the tight normalization checks downstream rely on
    if delta.abs() <= tol.max(floor) || at_machine_width {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *leftover += delta.abs();
        return left + right + delta / 15.0;
    }
    let half = 0.5 * tol;
    adapt(f, a, m, fa, flm, fm, left, half, noise, depth - 1, leftover)
        + adapt(f, m, b, fm, frm, fb, right, half, noise, depth - 1, leftover)
}

/// Integral with an error tally: returns (value, unconverged error estimate).
///
/// The relative-tolerance anchor starts at the crude whole-interval estimate,
/// which overshoots badly on decaying tails; whenever the converged value
/// comes out much smaller than the anchor, the pass is repeated with the
/// tolerance re-anchored to it.
fn integrate_est<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadratureConfig) -> (f64, f64) {
    if !(b > a) {
        return (0.0, 0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    let mut anchor = whole.abs();
    let mut result = (0.0, 0.0);
    for _ in 0..4 {
        let tol = cfg.abs_tol.max(cfg.rel_tol * anchor);
        // rounding-noise scale of the whole integral; panels whose delta sits
        // below it are refined no further even when tol is far tighter
        let noise = 8.0 * f64::EPSILON * anchor;
        let mut leftover = 0.0;
        let value = adapt(
            f,
            a,
            b,
            fa,
            fm,
            fb,
            whole,
            tol,
            noise,
            cfg.max_depth,
            &mut leftover,
        );
        result = (value, leftover);
        if !value.is_finite() || value.abs() >= 0.25 * anchor {
            break;
        }
        anchor = value.abs();
    }
    result
}

/// Adaptive Simpson over [a, b]; an empty interval (b <= a) integrates to 0.
pub(crate) fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    let (value, leftover) = integrate_est(f, a, b, cfg);
    if !value.is_finite() {
        return Err(AnalyticError::Nonconvergence {
            estimate: f64::INFINITY,
        });
    }
    let budget = 100.0 * (cfg.abs_tol + cfg.rel_tol * value.abs());
    if leftover > budget {
        return Err(AnalyticError::Nonconvergence { estimate: leftover });
    }
    Ok(value)
}

/// Like [`integrate`] but with the interval pre-cut at the given points
/// (integrand kinks from min/max/indicator arguments); out-of-range or
/// non-finite cut points are ignored.
pub(crate) fn integrate_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    splits: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    if !(b > a) {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = splits
        .iter()
        .copied()
        .filter(|s| s.is_finite() && *s > a && *s < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut lo = a;
    let mut total = 0.0;
    for c in cuts {
        total += integrate(f, lo, c, cfg)?;
        lo = c;
    }
    total += integrate(f, lo, b, cfg)?;
    Ok(total)
}
