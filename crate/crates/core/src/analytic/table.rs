//! The thirteen kernel integrals behind the composite per-event terms, plus
//! the six standard bindings of them (g1..g6) used by the parallel-case
//! terms.
//!
//! Every kernel is a single or double integral of the form
//! `∫ (bracket of a CDF at shifted arguments) * density(y) [* density(t)]`
//! over the exponential nearest-road laws. Slots a1/a2 are the outer bounds
//! (always constants), a3/a4 the inner bounds (constants or functions of the
//! outer variable t), and a5/a6 the CDF arguments (constants or functions of
//! t and the inner variable y). CDFs clamp to 0 for negative arguments, so
//! shifted arguments can go negative safely; an upper bound of infinity is
//! truncated by the configured tail rule; an empty interval integrates to 0.

use std::cell::Cell;

use super::dist::{cdf_exp, pdf_exp};
use super::quad::{integrate, integrate_split, QuadratureConfig};
use super::{AnalyticError, AnalyticQuery};
use crate::mplp::ModelParams;

/// Rates and quadrature settings shared by every kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelEnv {
    /// lambda p: intensity of charging roads in one family.
    pub c: f64,
    /// lambda (1-p): intensity of non-charging roads.
    pub nc: f64,
    /// lambda: intensity of the whole family (opposite-side law).
    pub all: f64,
    /// Slowest exponential decay rate, for tail truncation.
    pub slowest: f64,
    pub cfg: QuadratureConfig,
    pub inner_cfg: QuadratureConfig,
}

impl KernelEnv {
    pub fn new(params: &ModelParams, cfg: &QuadratureConfig) -> Self {
        let lambda = params.lambda();
        let p = params.p();
        Self {
            c: params.charging_rate(),
            nc: params.noncharging_rate(),
            all: lambda,
            slowest: lambda * p.min(1.0 - p).min(0.5),
            cfg: *cfg,
            inner_cfg: cfg.inner(),
        }
    }

    /// Truncation point for an infinite limit on a variable whose density
    /// decays at `rate`. The bracket and the other density only speed the
    /// decay up, so cutting by the variable's own rate is always safe.
    fn truncate(&self, rate: f64, lower: f64) -> f64 {
        self.cfg.tail_rule.truncate(lower, rate.max(self.slowest))
    }

    /// Copy of this environment with absolute tolerances multiplied by a
    /// known magnitude of the target integral. Kernels whose value sits many
    /// orders below the default absolute tolerance (the empty-span detour
    /// family scales with e^{-lambda d_v}) would otherwise be accepted
    /// unrefined, and ratios of such kernels would be garbage. Relative
    /// tolerances are unchanged.
    pub fn with_scale(&self, scale: f64) -> Self {
        let mut env = *self;
        let s = scale.clamp(1e-280, 1.0);
        env.cfg.abs_tol = (env.cfg.abs_tol * s).max(1e-300);
        env.inner_cfg.abs_tol = (env.inner_cfg.abs_tol * s).max(1e-300);
        env
    }
}

/// How the CDF bracket of a kernel is built.
#[derive(Debug, Clone, Copy)]
enum Bracket {
    /// F(a5) - F(a6)
    Diff,
    /// 1 - F(a5)
    Survival,
    /// F(a5) alone (or F(a3) for single-integral kernels)
    Cdf,
}

/// Shape of one kernel: bracket form plus the three rates involved.
#[derive(Debug, Clone, Copy)]
struct Shape {
    bracket: Bracket,
    /// rate inside the bracket CDF
    bracket_rate: Rate,
    /// rate of the density on the integration variable y
    inner_rate: Rate,
    /// rate of the density on the outer variable t (doubles only)
    outer_rate: Rate,
}

#[derive(Debug, Clone, Copy)]
enum Rate {
    Charging,
    Noncharging,
    Whole,
}

impl Rate {
    fn of(self, env: &KernelEnv) -> f64 {
        match self {
            Rate::Charging => env.c,
            Rate::Noncharging => env.nc,
            Rate::Whole => env.all,
        }
    }
}

const fn shape(bracket: Bracket, bracket_rate: Rate, inner_rate: Rate, outer_rate: Rate) -> Shape {
    Shape {
        bracket,
        bracket_rate,
        inner_rate,
        outer_rate,
    }
}

// Kernel shapes. Charging and non-charging rates are shared by both road
// families, so the perpendicular-family kernels (8, 11..13) reuse the same
// numeric shapes as their parallel-family counterparts.
const SHAPES: [Shape; 13] = [
    shape(Bracket::Diff, Rate::Charging, Rate::Noncharging, Rate::Whole), // 1
    shape(Bracket::Diff, Rate::Charging, Rate::Whole, Rate::Noncharging), // 2
    shape(Bracket::Diff, Rate::Noncharging, Rate::Charging, Rate::Whole), // 3
    shape(Bracket::Diff, Rate::Noncharging, Rate::Whole, Rate::Charging), // 4
    shape(Bracket::Survival, Rate::Charging, Rate::Noncharging, Rate::Whole), // 5
    shape(Bracket::Diff, Rate::Charging, Rate::Noncharging, Rate::Whole), // 6 (single)
    shape(Bracket::Cdf, Rate::Charging, Rate::Noncharging, Rate::Whole), // 7 (single)
    shape(Bracket::Cdf, Rate::Charging, Rate::Charging, Rate::Noncharging), // 8
    shape(Bracket::Diff, Rate::Charging, Rate::Noncharging, Rate::Charging), // 9
    shape(Bracket::Cdf, Rate::Noncharging, Rate::Charging, Rate::Whole), // 10 (single)
    shape(Bracket::Cdf, Rate::Charging, Rate::Noncharging, Rate::Whole), // 11 (single)
    shape(Bracket::Cdf, Rate::Charging, Rate::Charging, Rate::Noncharging), // 12
    shape(Bracket::Diff, Rate::Charging, Rate::Noncharging, Rate::Charging), // 13
];

/// Argument counts for eval_f, indexed by kernel number - 1.
const ARITY: [usize; 13] = [6, 6, 6, 6, 5, 4, 3, 5, 6, 3, 3, 5, 6];

const SINGLE: [bool; 13] = [
    false, false, false, false, false, true, true, false, false, true, true, false, false,
];

fn bracket_value(shape: &Shape, env: &KernelEnv, a5: f64, a6: f64) -> f64 {
    let rate = shape.bracket_rate.of(env);
    match shape.bracket {
        Bracket::Diff => cdf_exp(rate, a5) - cdf_exp(rate, a6),
        Bracket::Survival => 1.0 - cdf_exp(rate, a5),
        Bracket::Cdf => cdf_exp(rate, a5),
    }
}

/// Double-integral kernel core: outer variable t over [a1, a2], inner y over
/// [a3(t), a4(t)], integrand bracket(a5(t,y), a6(t,y)) * pdf(y) * pdf(t).
#[allow(clippy::too_many_arguments)]
fn kernel_double(
    index: usize,
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: &dyn Fn(f64) -> f64,
    a4: &dyn Fn(f64) -> f64,
    a5: &dyn Fn(f64, f64) -> f64,
    a6: &dyn Fn(f64, f64) -> f64,
    outer_splits: &[f64],
) -> Result<f64, AnalyticError> {
    let sh = &SHAPES[index - 1];
    let inner_rate = sh.inner_rate.of(env);
    let outer_rate = sh.outer_rate.of(env);
    // all densities live on [0, inf)
    let lo_t = a1.max(0.0);
    let hi_t = if a2.is_infinite() {
        env.truncate(outer_rate, lo_t)
    } else {
        a2
    };
    let failed: Cell<Option<AnalyticError>> = Cell::new(None);
    let outer = |t: f64| {
        let lo_y = a3(t).max(0.0);
        let hi_raw = a4(t);
        let hi_y = if hi_raw.is_infinite() {
            env.truncate(inner_rate, lo_y)
        } else {
            hi_raw
        };
        let inner = |y: f64| bracket_value(sh, env, a5(t, y), a6(t, y)) * pdf_exp(inner_rate, y);
        match integrate(&inner, lo_y, hi_y, &env.inner_cfg) {
            Ok(v) => v * pdf_exp(outer_rate, t),
            Err(e) => {
                failed.set(Some(e));
                0.0
            }
        }
    };
    let value = integrate_split(&outer, lo_t, hi_t, outer_splits, &env.cfg)?;
    if let Some(e) = failed.take() {
        return Err(e);
    }
    Ok(value)
}

/// Single-integral kernel core: y over [a1, a2], integrand
/// bracket(a3(y), a4(y)) * pdf(y).
fn kernel_single(
    index: usize,
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: &dyn Fn(f64) -> f64,
    a4: &dyn Fn(f64) -> f64,
) -> Result<f64, AnalyticError> {
    let sh = &SHAPES[index - 1];
    let rate = sh.inner_rate.of(env);
    let lo = a1.max(0.0);
    let hi = if a2.is_infinite() {
        env.truncate(rate, lo)
    } else {
        a2
    };
    let f = |y: f64| bracket_value(sh, env, a3(y), a4(y)) * pdf_exp(rate, y);
    integrate(&f, lo, hi, &env.cfg)
}

// Typed kernels. Naming is positional (k1..k13) to match the public index
// space of eval_f; unused bracket slots are simply absent from the signature.

#[allow(clippy::too_many_arguments)]
pub(crate) fn k1(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    a6: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(1, env, a1, a2, &a3, &a4, &a5, &a6, splits)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn k2(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    a6: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(2, env, a1, a2, &a3, &a4, &a5, &a6, splits)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn k3(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    a6: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(3, env, a1, a2, &a3, &a4, &a5, &a6, splits)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn k4(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    a6: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(4, env, a1, a2, &a3, &a4, &a5, &a6, splits)
}

pub(crate) fn k5(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(5, env, a1, a2, &a3, &a4, &a5, &|_, _| 0.0, splits)
}

pub(crate) fn k6(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
) -> Result<f64, AnalyticError> {
    kernel_single(6, env, a1, a2, &a3, &a4)
}

pub(crate) fn k7(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
) -> Result<f64, AnalyticError> {
    kernel_single(7, env, a1, a2, &a3, &|_| 0.0)
}

pub(crate) fn k8(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(8, env, a1, a2, &a3, &a4, &a5, &|_, _| 0.0, splits)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn k9(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    a6: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(9, env, a1, a2, &a3, &a4, &a5, &a6, splits)
}

pub(crate) fn k10(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
) -> Result<f64, AnalyticError> {
    kernel_single(10, env, a1, a2, &a3, &|_| 0.0)
}

pub(crate) fn k11(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
) -> Result<f64, AnalyticError> {
    kernel_single(11, env, a1, a2, &a3, &|_| 0.0)
}

pub(crate) fn k12(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(12, env, a1, a2, &a3, &a4, &a5, &|_, _| 0.0, splits)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn k13(
    env: &KernelEnv,
    a1: f64,
    a2: f64,
    a3: impl Fn(f64) -> f64,
    a4: impl Fn(f64) -> f64,
    a5: impl Fn(f64, f64) -> f64,
    a6: impl Fn(f64, f64) -> f64,
    splits: &[f64],
) -> Result<f64, AnalyticError> {
    kernel_double(13, env, a1, a2, &a3, &a4, &a5, &a6, splits)
}

/// One slot of an [`eval_f`] call: a constant, a function of the outer
/// integration variable, or a function of both variables. Single-integral
/// kernels have one variable, so `OfOuter` receives it and `OfBoth` is
/// rejected.
pub enum KernelArg<'a> {
    Const(f64),
    OfOuter(&'a dyn Fn(f64) -> f64),
    OfBoth(&'a dyn Fn(f64, f64) -> f64),
}

impl KernelArg<'_> {
    fn constant(&self, slot: usize) -> Result<f64, AnalyticError> {
        match self {
            KernelArg::Const(v) => Ok(*v),
            _ => Err(AnalyticError::KernelArg {
                slot,
                need: "a constant",
            }),
        }
    }

    fn of_outer(&self, slot: usize) -> Result<Box<dyn Fn(f64) -> f64 + '_>, AnalyticError> {
        match self {
            KernelArg::Const(v) => {
                let v = *v;
                Ok(Box::new(move |_| v))
            }
            KernelArg::OfOuter(f) => Ok(Box::new(|t| f(t))),
            KernelArg::OfBoth(_) => Err(AnalyticError::KernelArg {
                slot,
                need: "a constant or a function of the outer variable",
            }),
        }
    }

    fn of_both(&self) -> Box<dyn Fn(f64, f64) -> f64 + '_> {
        match self {
            KernelArg::Const(v) => {
                let v = *v;
                Box::new(move |_, _| v)
            }
            KernelArg::OfOuter(f) => Box::new(|t, _| f(t)),
            KernelArg::OfBoth(f) => Box::new(|t, y| f(t, y)),
        }
    }
}

/// Evaluates kernel `index` (1..=13) with positional arguments.
///
/// Arities: kernels 1..4, 9, 13 take six arguments; 5, 8, 12 take five;
/// 6 takes four; 7, 10, 11 take three.
pub fn eval_f(
    index: u8,
    args: &[KernelArg<'_>],
    params: &ModelParams,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    if !(1..=13).contains(&index) {
        return Err(AnalyticError::UnknownKernel(index));
    }
    let idx = index as usize;
    let expected = ARITY[idx - 1];
    if args.len() != expected {
        return Err(AnalyticError::KernelArity {
            index,
            expected,
            got: args.len(),
        });
    }
    cfg.validate()?;
    let env = KernelEnv::new(params, cfg);
    let a1 = args[0].constant(1)?;
    let a2 = args[1].constant(2)?;
    if SINGLE[idx - 1] {
        let a3 = args[2].of_outer(3)?;
        let a4 = if expected > 3 {
            args[3].of_outer(4)?
        } else {
            Box::new(|_: f64| 0.0) as Box<dyn Fn(f64) -> f64>
        };
        kernel_single(idx, &env, a1, a2, &|y| a3(y), &|y| a4(y))
    } else {
        let a3 = args[2].of_outer(3)?;
        let a4 = args[3].of_outer(4)?;
        let a5 = args[4].of_both();
        let a6 = if expected > 5 {
            args[5].of_both()
        } else {
            Box::new(|_: f64, _: f64| 0.0) as Box<dyn Fn(f64, f64) -> f64>
        };
        kernel_double(
            idx,
            &env,
            a1,
            a2,
            &|t| a3(t),
            &|t| a4(t),
            &|t, y| a5(t, y),
            &|t, y| a6(t, y),
            &[],
        )
    }
}

// The six standard bindings used by the parallel-case composite terms. The
// threshold x and spans come from the query. Every binding's value carries
// the factor e^{-lambda d_v} (bracket base times inner-density base) and the
// outer-density mass from its lower bound, so each one rescales its
// tolerances by that product before integrating.

fn detour_scaled(env: &KernelEnv, outer_lo: f64, d_v: f64) -> KernelEnv {
    env.with_scale((-env.all * (d_v + outer_lo.max(0.0))).exp())
}

pub(crate) fn g1(env: &KernelEnv, x: f64, d_v: f64) -> Result<f64, AnalyticError> {
    let env = detour_scaled(env, x - d_v, d_v);
    let inf = f64::INFINITY;
    k1(
        &env,
        x - d_v,
        inf,
        move |_| x,
        move |_| inf,
        move |_, _| x,
        move |_, _| d_v,
        &[],
    )
}

pub(crate) fn g2(env: &KernelEnv, x: f64, d_v: f64) -> Result<f64, AnalyticError> {
    let env = detour_scaled(env, x - d_v, d_v);
    k1(
        &env,
        x - d_v,
        f64::INFINITY,
        move |_| d_v,
        move |t| x.min(t + d_v),
        move |_, y| y,
        move |_, _| d_v,
        &[],
    )
}

pub(crate) fn g3(env: &KernelEnv, x: f64, d_v: f64) -> Result<f64, AnalyticError> {
    let env = detour_scaled(env, 0.0, d_v);
    k1(
        &env,
        0.0,
        x - d_v,
        move |t| t + d_v,
        move |_| f64::INFINITY,
        move |t, _| t + d_v,
        move |_, _| d_v,
        &[],
    )
}

pub(crate) fn g4(env: &KernelEnv, x: f64, d_h: f64, d_v: f64) -> Result<f64, AnalyticError> {
    let env = detour_scaled(env, x - d_h - d_v, d_v);
    let inf = f64::INFINITY;
    k3(
        &env,
        x - d_h - d_v,
        inf,
        move |_| x - d_h,
        move |_| inf,
        move |_, _| x - d_h,
        move |_, _| d_v,
        &[],
    )
}

pub(crate) fn g5(env: &KernelEnv, x: f64, d_h: f64, d_v: f64) -> Result<f64, AnalyticError> {
    let env = detour_scaled(env, 0.0, d_v);
    // the min(x - d_h, t + d_v) crossover kinks the outer integrand
    k3(
        &env,
        0.0,
        f64::INFINITY,
        move |_| d_v,
        move |t| (x - d_h).min(t + d_v),
        move |_, y| y,
        move |_, _| d_v,
        &[x - d_h - d_v],
    )
}

pub(crate) fn g6(env: &KernelEnv, x: f64, d_h: f64, d_v: f64) -> Result<f64, AnalyticError> {
    let env = detour_scaled(env, 0.0, d_v);
    k3(
        &env,
        0.0,
        x - d_h - d_v,
        move |t| t + d_v,
        move |_| f64::INFINITY,
        move |t, _| t + d_v,
        move |_, _| d_v,
        &[],
    )
}

/// Evaluates standard binding `index` (1..=6) at the query's threshold and
/// spans.
pub fn eval_g(
    index: u8,
    query: &AnalyticQuery,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    cfg.validate()?;
    let env = KernelEnv::new(&query.params(), cfg);
    let (x, d_h, d_v) = (query.x(), query.d_h(), query.d_v());
    match index {
        1 => g1(&env, x, d_v),
        2 => g2(&env, x, d_v),
        3 => g3(&env, x, d_v),
        4 => g4(&env, x, d_h, d_v),
        5 => g5(&env, x, d_h, d_v),
        6 => g6(&env, x, d_h, d_v),
        _ => Err(AnalyticError::UnknownKernel(index)),
    }
}
