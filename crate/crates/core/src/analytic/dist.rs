use serde::Serialize;

use super::quad::{integrate, QuadratureConfig};
use super::AnalyticError;
use crate::mplp::ModelParams;

/// Which nearest-road distance law: road family (parallel to the source road
/// = "horizontal", perpendicular = "vertical") crossed with charging or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NearestKind {
    HorizontalCharging,
    VerticalCharging,
    HorizontalNoncharging,
    VerticalNoncharging,
}

impl NearestKind {
    pub fn charging(self) -> bool {
        matches!(
            self,
            NearestKind::HorizontalCharging | NearestKind::VerticalCharging
        )
    }

    /// Intensity of the thinned point process this law describes.
    pub fn rate(self, params: &ModelParams) -> f64 {
        if self.charging() {
            params.charging_rate()
        } else {
            params.noncharging_rate()
        }
    }
}

fn check_threshold(x: f64) -> Result<(), AnalyticError> {
    if !x.is_finite() || x < 0.0 {
        return Err(AnalyticError::InvalidThreshold(x));
    }
    Ok(())
}

/// 1 - e^{-rate x} for x >= 0 and 0 below: every distance law here clamps
/// this way so integral kernels can feed shifted arguments directly.
pub(crate) fn cdf_exp(rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-rate * x).exp_m1()
    }
}

pub(crate) fn pdf_exp(rate: f64, x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        rate * (-rate * x).exp()
    }
}

/// P(nearest road of the given kind is closer than x): 1 - e^{-lambda p x}
/// for charging kinds, 1 - e^{-lambda (1-p) x} otherwise.
pub fn cdf_nearest(kind: NearestKind, params: &ModelParams, x: f64) -> Result<f64, AnalyticError> {
    check_threshold(x)?;
    Ok(cdf_exp(kind.rate(params), x))
}

/// Density of the law in [`cdf_nearest`].
pub fn pdf_nearest(kind: NearestKind, params: &ModelParams, x: f64) -> Result<f64, AnalyticError> {
    check_threshold(x)?;
    Ok(pdf_exp(kind.rate(params), x))
}

/// P(nearest opposite-direction road is closer than x) = 1 - e^{-lambda x}.
pub fn cdf_dl(params: &ModelParams, x: f64) -> Result<f64, AnalyticError> {
    check_threshold(x)?;
    Ok(cdf_exp(params.lambda(), x))
}

/// Density of the law in [`cdf_dl`].
pub fn pdf_dl(params: &ModelParams, x: f64) -> Result<f64, AnalyticError> {
    check_threshold(x)?;
    Ok(pdf_exp(params.lambda(), x))
}

fn check_conditional(params: &ModelParams, span: f64) -> Result<(), AnalyticError> {
    if params.p() == 0.0 || params.p() == 1.0 {
        return Err(AnalyticError::UndefinedConditional { p: params.p() });
    }
    if !span.is_finite() || span <= 0.0 {
        return Err(AnalyticError::Param(crate::mplp::ParamError::Distance(
            span,
        )));
    }
    Ok(())
}

/// P(nearest non-charging < nearest charging < span): normalizer shared by
/// [`cdf_gap`] and [`pdf_gap`]. Strictly positive whenever 0 < p < 1 and
/// span > 0.
fn gap_norm(params: &ModelParams, span: f64) -> f64 {
    let c = params.charging_rate();
    let lambda = params.lambda();
    -(-c * span).exp_m1() + c / lambda * (-lambda * span).exp_m1()
}

/// CDF of the charging/non-charging gap: the distance from the nearest
/// non-charging road to the nearest charging road, conditioned on the
/// non-charging one being closer and both lying within `span`.
///
/// The two thinned road processes are independent, so the conditional joint
/// density of (non-charging, charging) positions (s, t) on {s < t < span} is
/// proportional to nc e^{-nc s} c e^{-c t}; integrating out s gives the gap
/// survival integrand below. Shared integral for both road families; only
/// the span differs.
fn cdf_gap(
    params: &ModelParams,
    span: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    check_conditional(params, span)?;
    check_threshold(x)?;
    if x >= span {
        return Ok(1.0);
    }
    let nc = params.noncharging_rate();
    let c = params.charging_rate();
    let norm = gap_norm(params, span);
    let integrand =
        move |t: f64| -(-nc * (t - x)).exp_m1() * c * (-c * t).exp() / norm;
    let tail = integrate(&integrand, x, span, cfg)?;
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// Density matching [`cdf_gap`]: bounded on [0, span], zero beyond.
fn pdf_gap(
    params: &ModelParams,
    span: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    check_conditional(params, span)?;
    check_threshold(x)?;
    if x >= span {
        return Ok(0.0);
    }
    let nc = params.noncharging_rate();
    let c = params.charging_rate();
    let norm = gap_norm(params, span);
    let integrand = move |t: f64| c * nc * (-c * t - nc * (t - x)).exp() / norm;
    integrate(&integrand, x, span, cfg)
}

/// CDF of the vertical-family gap X1 over the span (0, d_h).
pub fn cdf_x1(
    params: &ModelParams,
    d_h: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    cdf_gap(params, d_h, x, cfg)
}

/// Density of X1.
pub fn pdf_x1(
    params: &ModelParams,
    d_h: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    pdf_gap(params, d_h, x, cfg)
}

/// CDF of the horizontal-family gap X2 over the span (0, d_v).
pub fn cdf_x2(
    params: &ModelParams,
    d_v: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    cdf_gap(params, d_v, x, cfg)
}

/// Density of X2.
pub fn pdf_x2(
    params: &ModelParams,
    d_v: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    pdf_gap(params, d_v, x, cfg)
}
