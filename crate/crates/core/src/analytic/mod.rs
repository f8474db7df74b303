//! Numerical evaluation of every closed form and integral in the model: the
//! five exponential nearest-road laws, the two conditional gap laws, the
//! kernel integral table, the per-event distance terms, the total
//! nearest-charging-distance CDF, and the charging-coverage probability.

mod dist;
mod lemma;
mod quad;
mod table;

pub use dist::{
    cdf_dl, cdf_nearest, cdf_x1, cdf_x2, pdf_dl, pdf_nearest, pdf_x1, pdf_x2, NearestKind,
};
pub use lemma::{
    cdf_dn, lemma_term, prob_tc, trip_fraction_transform, BoundKind, DnEvaluator, LemmaBreakdown,
};
pub use quad::{QuadratureConfig, TailRule};
pub use table::{eval_f, eval_g, KernelArg};

pub(crate) use dist::pdf_exp;
pub(crate) use quad::{integrate, integrate_split};

use serde::Serialize;
use thiserror::Error;

use crate::mplp::{ModelParams, ParamError};

/// Failure modes of the analytic evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("quadrature config invalid: {0}")]
    Config(&'static str),
    #[error("quadrature did not converge within max_depth, error estimate {estimate:e}")]
    Nonconvergence { estimate: f64 },
    #[error("conditional law undefined at p = {p}: the conditioning event has probability zero")]
    UndefinedConditional { p: f64 },
    #[error("threshold must be finite and nonnegative, got {0}")]
    InvalidThreshold(f64),
    #[error("fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("no integral kernel with index {0}, valid indices are 1..=13")]
    UnknownKernel(u8),
    #[error("kernel {index} takes {expected} arguments, got {got}")]
    KernelArity { index: u8, expected: usize, got: usize },
    #[error("kernel argument slot {slot} must be {need}")]
    KernelArg { slot: usize, need: &'static str },
}

/// One evaluation point of the trip-level laws: model parameters, the two
/// trip spans, and the distance threshold x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticQuery {
    params: ModelParams,
    d_h: f64,
    d_v: f64,
    x: f64,
}

impl AnalyticQuery {
    pub fn new(params: ModelParams, d_h: f64, d_v: f64, x: f64) -> Result<Self, AnalyticError> {
        for d in [d_h, d_v] {
            if !d.is_finite() || d <= 0.0 {
                return Err(ParamError::Distance(d).into());
            }
        }
        if !x.is_finite() || x < 0.0 {
            return Err(AnalyticError::InvalidThreshold(x));
        }
        Ok(Self { params, d_h, d_v, x })
    }

    /// Same parameters and spans, different threshold. Useful when sweeping
    /// a grid of x values.
    pub fn with_x(&self, x: f64) -> Result<Self, AnalyticError> {
        Self::new(self.params, self.d_h, self.d_v, x)
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn d_h(&self) -> f64 {
        self.d_h
    }

    pub fn d_v(&self) -> f64 {
        self.d_v
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}
