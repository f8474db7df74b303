//! Per-event terms of the nearest-charging-distance law, their sum over the
//! eight trip events, the trip-level charging-coverage probability, and the
//! trip-fraction reinterpretation of the threshold.
//!
//! Events where the source road itself is charging (E1, E2, E5, E6)
//! contribute their full event mass for any x > 0. The other four are
//! composite: each is a sum of weighted conditional-CDF brackets, where the
//! weights are closed-form exponential products and the brackets are ratios
//! of kernel integrals. Every bracket is gated by indicators on x; at an
//! indicator's equality point the left limit is used.
//!
//! Two printed-form quirks are deliberately kept as they are (they only
//! matter at weight e^{-lambda d_v}, i.e. far below every tolerance used
//! here): the detour brackets of the first composite term do not saturate to
//! exactly 1 as x grows. Deviations that the formulas force on us instead of
//! merely permitting are documented at the term where they apply.
//!
//! Known gap, measured by cross-validation against the routing simulation:
//! the composite terms agree with conditional Monte-Carlo to sampling
//! resolution for charging fractions p >= 0.2, but understate the law at
//! small p. At p = 0.1 the parallel composite terms (E3, E4) each run about
//! 0.9% low conditionally; at p = 0.05 about 3% low, with E8 drifting a few
//! sigma as well. Full-curve agreement at n = 10^5 trials therefore fails
//! below roughly p = 0.2. The integral forms are evaluated as stated rather
//! than empirically corrected; the per-event breakdown exists precisely so
//! that this gap stays visible and attributable instead of being averaged
//! away in the total.

use std::cell::Cell;
use std::sync::OnceLock;

use serde::Serialize;

use super::dist::{cdf_x1, cdf_x2};
use super::quad::QuadratureConfig;
use super::table::{
    g1, g2, g3, g4, g5, g6, k1, k10, k11, k12, k13, k2, k3, k4, k5, k6, k7, k8, k9, KernelEnv,
};
use super::{integrate, integrate_split, pdf_exp, AnalyticError, AnalyticQuery};
use crate::mplp::{Event, ModelParams, ParamError};

/// 1 - e^{-z}, stable for small z.
fn mass(z: f64) -> f64 {
    -(-z).exp_m1()
}

/// e^{-z}
fn surv(z: f64) -> f64 {
    (-z).exp()
}

/// Lazily computed, shared scalar; errors are cached like values.
#[derive(Debug, Default)]
struct Memo(OnceLock<Result<f64, AnalyticError>>);

impl Memo {
    fn get(&self, init: impl FnOnce() -> Result<f64, AnalyticError>) -> Result<f64, AnalyticError> {
        self.0.get_or_init(init).clone()
    }
}

/// The three kinds of x-gate used by composite brackets.
///
/// `ratio_below` evaluates the conditional ratio when x is at or below the
/// threshold (left limit at the tie) and returns 1 above it.
fn ratio_below(
    x: f64,
    threshold: f64,
    ratio: impl FnOnce() -> Result<f64, AnalyticError>,
) -> Result<f64, AnalyticError> {
    if x > threshold {
        Ok(1.0)
    } else {
        ratio()
    }
}

/// num / den for the detour brackets, where den == 0 only ever means the
/// shared exponential scale underflowed; the bracket's weight underflows
/// identically, so 0 is exact there.
fn detour_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-event values P(D_n < x | E_i) P(E_i) and their total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaBreakdown {
    terms: [f64; 8],
    total: f64,
}

impl LemmaBreakdown {
    fn new(terms: [f64; 8]) -> Self {
        let total = terms.iter().sum();
        Self { terms, total }
    }

    /// The joint mass P(D_n < x | event) P(event).
    pub fn term(&self, event: Event) -> f64 {
        self.terms[event.index()]
    }

    pub fn terms(&self) -> impl Iterator<Item = (Event, f64)> + '_ {
        Event::ALL.iter().map(move |&e| (e, self.terms[e.index()]))
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Which side of the trip-fraction identity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// P(D_n / (d_h + d_v) < f)
    NonchargingLower,
    /// P(1 - D_n / (d_h + d_v) < f)
    ChargingUpper,
}

/// Evaluator for the nearest-charging-distance law at fixed parameters and
/// spans. Threshold-independent integrals (conditional normalizers and
/// bracket denominators) are computed once and shared across thresholds, so
/// sweeping an x-grid through one evaluator is much cheaper than calling
/// [`cdf_dn`] per point.
pub struct DnEvaluator {
    params: ModelParams,
    d_h: f64,
    d_v: f64,
    env: KernelEnv,
    /// Environment for the empty-span detour kernels, whose values all carry
    /// the factor e^{-lambda d_v}; their tolerances are rescaled by it so the
    /// detour ratios stay accurate.
    detour_env: KernelEnv,
    // conditional building blocks
    ix1: Memo,
    ix2: Memo,
    fx2_dh: Memo,
    coupling: Memo,
    // bracket denominators, named by the term they normalize
    den_above_c: Memo,
    den_above_nc: Memo,
    den_below_c2: Memo,
    den_below_c4: Memo,
    den_below_nc: Memo,
    den_e3_t4: Memo,
    den_e3_t5: Memo,
    den_e3_t6: Memo,
    den_e3_t7: Memo,
    den_e3_t8: Memo,
    den_e7_t5: Memo,
    den_e7_t7: Memo,
    den_e7_t8: Memo,
    den_e7_t9: Memo,
}

impl DnEvaluator {
    pub fn new(
        params: ModelParams,
        d_h: f64,
        d_v: f64,
        cfg: &QuadratureConfig,
    ) -> Result<Self, AnalyticError> {
        cfg.validate()?;
        for d in [d_h, d_v] {
            if !d.is_finite() || d <= 0.0 {
                return Err(ParamError::Distance(d).into());
            }
        }
        let env = KernelEnv::new(&params, cfg);
        Ok(Self {
            params,
            d_h,
            d_v,
            detour_env: env.with_scale((-params.lambda() * d_v).exp()),
            env,
            ix1: Memo::default(),
            ix2: Memo::default(),
            fx2_dh: Memo::default(),
            coupling: Memo::default(),
            den_above_c: Memo::default(),
            den_above_nc: Memo::default(),
            den_below_c2: Memo::default(),
            den_below_c4: Memo::default(),
            den_below_nc: Memo::default(),
            den_e3_t4: Memo::default(),
            den_e3_t5: Memo::default(),
            den_e3_t6: Memo::default(),
            den_e3_t7: Memo::default(),
            den_e3_t8: Memo::default(),
            den_e7_t5: Memo::default(),
            den_e7_t7: Memo::default(),
            den_e7_t8: Memo::default(),
            den_e7_t9: Memo::default(),
        })
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

    /// P(D_n < x | event) P(event).
    pub fn lemma_term(&self, event: Event, x: f64) -> Result<f64, AnalyticError> {
        if !x.is_finite() || x < 0.0 {
            return Err(AnalyticError::InvalidThreshold(x));
        }
        let p = self.params.p();
        let flat = |weight: f64| if x > 0.0 { weight } else { 0.0 };
        match event {
            Event::E1 | Event::E5 => Ok(flat(p * p / 2.0)),
            Event::E2 | Event::E6 => Ok(flat(p * (1.0 - p) / 2.0)),
            Event::E3 => self.term_e3(x),
            Event::E4 => self.term_e4(x),
            Event::E7 => self.term_e7(x),
            Event::E8 => self.term_e8(x),
        }
    }

    /// All eight terms and their total at one threshold.
    pub fn breakdown(&self, x: f64) -> Result<LemmaBreakdown, AnalyticError> {
        let mut terms = [0.0; 8];
        for &event in &Event::ALL {
            terms[event.index()] = self.lemma_term(event, x)?;
        }
        Ok(LemmaBreakdown::new(terms))
    }

    // --- shared conditional building blocks ---

    /// Probability that the nearest in-span parallel road on the destination
    /// side of the top is charging, given at least one charging parallel
    /// road in span.
    fn q_v(&self) -> f64 {
        let (lambda, p) = (self.params.lambda(), self.params.p());
        p * mass(lambda * self.d_v) / mass(self.env.c * self.d_v)
    }

    /// Counterpart of [`Self::q_v`] on the perpendicular span.
    fn q_h(&self) -> f64 {
        let (lambda, p) = (self.params.lambda(), self.params.p());
        p * mass(lambda * self.d_h) / mass(self.env.c * self.d_h)
    }

    /// Mass of the charging-to-noncharging gap law integrated against the
    /// nearest perpendicular charging road over the perpendicular span.
    fn ix2(&self) -> Result<f64, AnalyticError> {
        self.ix2.get(|| {
            let env = &self.env;
            let failed: Cell<Option<AnalyticError>> = Cell::new(None);
            let f = |v: f64| match cdf_x2(&self.params, self.d_v, v, &env.inner_cfg) {
                Ok(w) => w * pdf_exp(env.c, v),
                Err(e) => {
                    failed.set(Some(e));
                    0.0
                }
            };
            let v = integrate_split(&f, 0.0, self.d_h, &[self.d_v], &env.cfg)?;
            if let Some(e) = failed.take() {
                return Err(e);
            }
            Ok(v)
        })
    }

    /// Mirror of [`Self::ix2`] for perpendicular trips.
    fn ix1(&self) -> Result<f64, AnalyticError> {
        self.ix1.get(|| {
            let env = &self.env;
            let failed: Cell<Option<AnalyticError>> = Cell::new(None);
            let f = |v: f64| match cdf_x1(&self.params, self.d_h, v, &env.inner_cfg) {
                Ok(w) => w * pdf_exp(env.c, v),
                Err(e) => {
                    failed.set(Some(e));
                    0.0
                }
            };
            let v = integrate_split(&f, 0.0, self.d_v, &[self.d_h], &env.cfg)?;
            if let Some(e) = failed.take() {
                return Err(e);
            }
            Ok(v)
        })
    }

    /// Gap law evaluated at the perpendicular span.
    fn fx2_dh(&self) -> Result<f64, AnalyticError> {
        self.fx2_dh
            .get(|| cdf_x2(&self.params, self.d_v, self.d_h, &self.env.cfg))
    }

    /// Reachability coupling between the perpendicular span and the nearest
    /// non-charging perpendicular road, as printed (including its
    /// span-mismatched normalizers).
    fn coupling(&self) -> Result<f64, AnalyticError> {
        self.coupling.get(|| {
            let env = &self.env;
            let num = integrate(
                &|w: f64| mass(env.c * (self.d_h - w)) * pdf_exp(env.nc, w),
                0.0,
                self.d_h,
                &env.cfg,
            )?;
            let norm = mass(env.c * self.d_v);
            Ok(num / (norm * norm))
        })
    }

    // --- detour brackets shared by the parallel composite terms ---
    //
    // These ratios condition on an empty span, so numerator and denominator
    // both carry the scale e^{-lambda d_v}; they are evaluated under the
    // rescaled detour environment. A denominator of exactly 0 means that
    // scale underflowed f64 entirely, and the weight multiplying the bracket
    // underflows identically, so 0 is returned for the ratio.

    /// Detour over the span top onto a charging parallel road.
    fn above_ratio_c(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let d_v = self.d_v;
        let num = g1(env, x, d_v)? + g2(env, x, d_v)? + g3(env, x, d_v)?;
        let den = self.den_above_c.get(|| {
            let env = &self.detour_env;
            let inf = f64::INFINITY;
            Ok(k1(
                env,
                0.0,
                inf,
                move |_| d_v,
                move |t| t + d_v,
                move |_, y| y,
                move |_, _| d_v,
                &[],
            )? + k1(
                env,
                0.0,
                inf,
                move |t| t + d_v,
                move |_| inf,
                move |t, _| t + d_v,
                move |_, _| d_v,
                &[],
            )?)
        })?;
        Ok(detour_ratio(num, den))
    }

    /// Detour over the span top onto a non-charging parallel road.
    fn above_ratio_nc(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let (d_h, d_v) = (self.d_h, self.d_v);
        let num = g4(env, x, d_h, d_v)? + g5(env, x, d_h, d_v)? + g6(env, x, d_h, d_v)?;
        let den = self.den_above_nc.get(|| {
            let env = &self.detour_env;
            let inf = f64::INFINITY;
            Ok(k3(
                env,
                0.0,
                inf,
                move |_| d_v,
                move |t| t + d_v,
                move |_, y| y,
                move |_, _| d_v,
                &[],
            )? + k3(
                env,
                0.0,
                inf,
                move |t| t + d_v,
                move |_| inf,
                move |t, _| t + d_v,
                move |_, _| d_v,
                &[],
            )?)
        })?;
        Ok(detour_ratio(num, den))
    }

    /// Detour below the source onto the nearest opposite-side road, charging
    /// mark on the opposite-side road law.
    fn below_ratio_c2(&self, reach: f64) -> Result<f64, AnalyticError> {
        let env = &self.detour_env;
        let d_v = self.d_v;
        let num = k2(
            env,
            d_v,
            f64::INFINITY,
            |_| 0.0,
            move |t| reach.min(t - d_v),
            |t, _| t,
            move |_, y| y + d_v,
            &[reach + d_v],
        )?;
        let den = self.den_below_c2.get(|| {
            k2(
                env,
                d_v,
                f64::INFINITY,
                |_| 0.0,
                move |t| t - d_v,
                |t, _| t,
                move |_, y| y + d_v,
                &[],
            )
        })?;
        Ok(detour_ratio(num, den))
    }

    /// As [`Self::below_ratio_c2`] with the other interleaving of the two
    /// opposite-side laws.
    fn below_ratio_c4(&self, reach: f64) -> Result<f64, AnalyticError> {
        let env = &self.detour_env;
        let d_v = self.d_v;
        let num = k4(
            env,
            d_v,
            f64::INFINITY,
            |_| 0.0,
            move |t| reach.min(t - d_v),
            |t, _| t,
            move |_, y| y + d_v,
            &[reach + d_v],
        )?;
        let den = self.den_below_c4.get(|| {
            k4(
                env,
                d_v,
                f64::INFINITY,
                |_| 0.0,
                move |t| t - d_v,
                |t, _| t,
                move |_, y| y + d_v,
                &[],
            )
        })?;
        Ok(detour_ratio(num, den))
    }

    /// Detour below the source with the beyond-top road non-charging.
    fn below_ratio_nc(&self, reach: f64) -> Result<f64, AnalyticError> {
        let env = &self.detour_env;
        let d_v = self.d_v;
        let inf = f64::INFINITY;
        let num = k5(env, 0.0, reach, move |t| t + d_v, |_| inf, |_, y| y, &[])?
            + k5(
                env,
                0.0,
                reach,
                move |_| d_v,
                move |t| t + d_v,
                move |t, _| t + d_v,
                &[],
            )?;
        let den = self.den_below_nc.get(|| {
            Ok(k5(env, 0.0, inf, move |t| t + d_v, |_| inf, |_, y| y, &[])?
                + k5(
                    env,
                    0.0,
                    inf,
                    move |_| d_v,
                    move |t| t + d_v,
                    move |t, _| t + d_v,
                    &[],
                )?)
        })?;
        Ok(detour_ratio(num, den))
    }

    /// Reach bracket for the nearest-both-families mixed term: threshold
    /// spent partly on a perpendicular leg, partly on a parallel one.
    fn mixed_reach_bracket(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let (d_h, d_v) = (self.d_h, self.d_v);
        if x > d_h + d_v {
            return Ok(1.0);
        }
        let num = k10(env, (x - d_v).max(0.0), d_h.min(x), move |y| x - y)?;
        let den = mass(env.nc * d_v) * mass(env.c * d_h);
        let direct = if x > d_v {
            mass(env.c * d_h.min(x - d_v)) / mass(env.c * d_h)
        } else {
            0.0
        };
        Ok(num / den + direct)
    }

    // --- E3: parallel trip, only the destination road charging ---

    fn term_e3(&self, x: f64) -> Result<f64, AnalyticError> {
        let (lambda, p) = (self.params.lambda(), self.params.p());
        let ew = p * (1.0 - p) / 2.0;
        if ew == 0.0 || x <= 0.0 {
            return Ok(0.0);
        }
        let env = &self.env;
        let (c, nc) = (env.c, env.nc);
        let (d_h, d_v) = (self.d_h, self.d_v);

        // term 1: no parallel road inside the span; route detours above the
        // top or below the source. The bracket is a sum of six bounded
        // ratios, so the term is below 8 * w; when that bound is already
        // negligible against the tolerance the detour kernels are skipped.
        let t1 = {
            let w = surv(lambda * d_v) * ew;
            if w * 8.0 < env.cfg.abs_tol * 1e-2 {
                0.0
            } else {
                let mut b = p * self.below_ratio_c2(x)? + p * self.below_ratio_c4(x)?;
                if x > d_v {
                    b += p * self.above_ratio_c(x)?;
                }
                if x > d_h + d_v {
                    b += (1.0 - p) * self.above_ratio_nc(x)?;
                }
                if x > d_h {
                    b += (1.0 - p) * self.below_ratio_c2(x - d_h)?;
                    b += (1.0 - p) * self.below_ratio_nc(x - d_h)?;
                }
                w * b
            }
        };

        // term 2: exactly one parallel road in span and it is non-charging,
        // or none charging with no perpendicular help
        let t2 = {
            let w = surv(c * d_v)
                * (lambda * (1.0 - p) * d_v * surv(nc * d_v)
                    + surv(c * d_h) * (mass(nc * d_v) - lambda * (1.0 - p) * d_v * surv(nc * d_v)))
                * ew;
            let r = if x > d_h + d_v {
                1.0
            } else if x > d_h {
                mass(nc * (x - d_h)) / mass(nc * d_v)
            } else {
                0.0
            };
            w * r
        };

        // term 3: several non-charging parallel roads, a charging
        // perpendicular road in span
        let t3 = {
            let w = mass(c * d_h)
                * surv(c * d_v)
                * (mass(nc * d_v) - lambda * (1.0 - p) * d_v * surv(nc * d_v))
                * ew;
            if w == 0.0 {
                0.0
            } else {
                w * self.mixed_reach_bracket(x)?
            }
        };

        // terms 4..8 share the charging-parallel-road-in-span weight
        let base = surv(c * d_h) * mass(c * d_v) * ew;
        let cross_base = mass(c * d_h) * mass(c * d_v) * ew;

        // term 4: top road non-charging, gap reachable via a perpendicular
        // road within the span
        let t4 = {
            if base == 0.0 {
                0.0
            } else {
                let w = (1.0 - self.q_v()) * base;
                if w == 0.0 {
                    0.0
                } else {
                    let fx2 = self.fx2_dh()?;
                    if fx2 == 0.0 {
                        0.0
                    } else {
                        let bracket = ratio_below(x, d_v, || {
                            let num = k6(
                                env,
                                0.0,
                                (x - d_h).max(0.0),
                                move |y| d_h + y,
                                |y| y,
                                )?
                                + k6(env, (x - d_h).max(0.0), x, move |_| x, |y| y)?;
                            let den = self.den_e3_t4.get(|| {
                                Ok(k6(
                                    env,
                                    0.0,
                                    (d_v - d_h).max(0.0),
                                    move |y| d_h + y,
                                    |y| y,
                                )? + k6(
                                    env,
                                    (d_v - d_h).max(0.0),
                                    d_v,
                                    move |_| d_v,
                                    |y| y,
                                )?)
                            })?;
                            Ok(num / den)
                        })?;
                        fx2 * w * bracket
                    }
                }
            }
        };

        // term 5: top road non-charging, gap out of perpendicular reach
        let t5 = {
            if base == 0.0 {
                0.0
            } else {
                let w = (1.0 - self.q_v()) * base;
                if w == 0.0 {
                    0.0
                } else {
                    let bracket = if x > d_v {
                        1.0
                    } else if x > d_h {
                        let num = k10(env, x, d_v, move |_| x - d_h)?
                            + k10(env, d_h, x.min(d_v), move |y| y - d_h)?;
                        let den = self.den_e3_t5.get(|| {
                            k6(env, 0.0, d_v - d_h, move |_| d_v, move |y| d_h + y)
                        })?;
                        num / den
                    } else {
                        0.0
                    };
                    (1.0 - self.fx2_dh()?) * w * bracket
                }
            }
        };

        // term 6: topmost in-span parallel road is charging
        let t6 = {
            let w = p * mass(lambda * d_v) * ew;
            if w == 0.0 {
                0.0
            } else {
                w * ratio_below(x, d_v, || self.source_side_ratio(x))?
            }
        };

        // terms 7 and 8: non-charging parallel road nearer than the charging
        // one; reached across a perpendicular road or not
        let (t7, t8) = if cross_base == 0.0 {
            (0.0, 0.0)
        } else {
            let w = (1.0 - self.q_v()) * cross_base;
            if w == 0.0 {
                (0.0, 0.0)
            } else {
                let ix2 = self.ix2()?;
                let t7 = if 1.0 - ix2 == 0.0 {
                    0.0
                } else {
                    (1.0 - ix2) * w * ratio_below(x, d_v, || self.cross_v_ratio(x))?
                };
                let t8 = if ix2 == 0.0 {
                    0.0
                } else {
                    ix2 * w * ratio_below(x, d_v, || self.cross_v_tail_ratio(x))?
                };
                (t7, t8)
            }
        };

        Ok(t1 + t2 + t3 + t4 + t5 + t6 + t7 + t8)
    }

    /// Ratio for the topmost-charging case, shared by both parallel
    /// composite events.
    fn source_side_ratio(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let d_v = self.d_v;
        let inf = f64::INFINITY;
        let num = k7(env, x, inf, move |_| x)? + k7(env, 0.0, x, |y| y)?;
        let den = self.den_e3_t6.get(|| {
            Ok(k7(env, d_v, inf, move |_| d_v)? + k7(env, 0.0, d_v, |y| y)?)
        })?;
        Ok(num / den)
    }

    /// First charging contact across a perpendicular road, shared by both
    /// parallel composite events.
    fn cross_v_ratio(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let d_v = self.d_v;
        let num = k8(env, 0.0, x, move |_| x, move |_| d_v, move |t, _| x - t, &[])?
            + k8(env, 0.0, x, |t| t, move |_| x, |t, y| y - t, &[])?;
        let den = self.den_e3_t7.get(|| {
            k9(
                env,
                0.0,
                d_v,
                |_| 0.0,
                move |t| d_v - t,
                move |_, _| d_v,
                |t, y| t + y,
                &[],
            )
        })?;
        Ok(num / den)
    }

    /// Tail variant of [`Self::cross_v_ratio`]. The printed denominator
    /// carries the threshold symbol in one slot where only the span keeps
    /// the ratio at 1 for large x; the span is used (forced by
    /// normalization).
    fn cross_v_tail_ratio(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let d_v = self.d_v;
        let inf = f64::INFINITY;
        let num = k9(
            env,
            0.0,
            x,
            |_| 0.0,
            move |t| (x - t).max(0.0),
            |t, y| y + t,
            |_, y| y,
            &[],
        )? + k9(
            env,
            0.0,
            inf,
            move |t| (x - t).max(0.0),
            move |_| x,
            move |_, _| x,
            |_, y| y,
            &[x],
        )?;
        let den = self.den_e3_t8.get(|| {
            Ok(k9(
                env,
                0.0,
                inf,
                |_| 0.0,
                move |t| (d_v - t).max(0.0),
                |t, y| y + t,
                |_, y| y,
                &[d_v],
            )? + k9(
                env,
                0.0,
                inf,
                move |t| (d_v - t).max(0.0),
                move |_| d_v,
                move |_, _| d_v,
                |_, y| y,
                &[d_v],
            )?)
        })?;
        Ok(num / den)
    }

    // --- E4: parallel trip, neither endpoint road charging ---

    fn term_e4(&self, x: f64) -> Result<f64, AnalyticError> {
        let (lambda, p) = (self.params.lambda(), self.params.p());
        let ew = (1.0 - p) * (1.0 - p) / 2.0;
        if ew == 0.0 || x <= 0.0 {
            return Ok(0.0);
        }
        let env = &self.env;
        let (c, nc) = (env.c, env.nc);
        let (d_h, d_v) = (self.d_h, self.d_v);

        // term 1: empty span; only the charging detour branches remain.
        // Same bounded-bracket skip as the parallel mixed event.
        let t1 = {
            let w = surv(lambda * d_v) * ew;
            if p == 0.0 || w * 8.0 < env.cfg.abs_tol * 1e-2 {
                0.0
            } else {
                let mut b = p * self.below_ratio_c2(x)? + p * self.below_ratio_c4(x)?;
                if x > d_v {
                    b += p * self.above_ratio_c(x)?;
                }
                w * b
            }
        };

        // term 2: nearest in-span progress on a charging parallel road
        let t2 = {
            let w = (lambda * p * d_v * surv(c * d_v) * surv(nc * d_v)
                + surv(c * d_h) * lambda * p * d_v * surv(c * d_v) * mass(nc * d_v)
                + surv(c * d_h) * (mass(c * d_v) - lambda * p * d_v * surv(c * d_v)))
                * ew;
            if w == 0.0 {
                0.0
            } else {
                let r = if x > d_v {
                    1.0
                } else {
                    mass(c * x) / mass(c * d_v)
                };
                w * r
            }
        };

        // term 3: mixed reach via a perpendicular charging road
        let t3 = {
            let w = mass(c * d_h)
                * surv(c * d_v)
                * (mass(nc * d_v) - lambda * (1.0 - p) * d_v * surv(nc * d_v))
                * ew;
            if w == 0.0 {
                0.0
            } else {
                w * self.mixed_reach_bracket(x)?
            }
        };

        // shared weight of the remaining terms: a charging parallel road in
        // span plus the in-span ordering factor
        let order = lambda * p * d_v * surv(c * d_v) * mass(nc * d_v)
            + (mass(c * d_v) - lambda * p * d_v * surv(c * d_v));
        let base = mass(c * d_h) * order * ew;

        let (t4, t5, t6) = if base == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let q_v = self.q_v();
            let w = (1.0 - q_v) * base;
            let (t4, t5) = if w == 0.0 {
                (0.0, 0.0)
            } else {
                let ix2 = self.ix2()?;
                let t4 = if 1.0 - ix2 == 0.0 {
                    0.0
                } else {
                    (1.0 - ix2) * w * ratio_below(x, d_v, || self.cross_v_ratio(x))?
                };
                let t5 = if ix2 == 0.0 {
                    0.0
                } else {
                    ix2 * w * ratio_below(x, d_v, || self.cross_v_tail_ratio(x))?
                };
                (t4, t5)
            };
            let t6 = if q_v == 0.0 {
                0.0
            } else {
                q_v * base * ratio_below(x, d_v, || self.source_side_ratio(x))?
            };
            (t4, t5, t6)
        };

        Ok(t1 + t2 + t3 + t4 + t5 + t6)
    }

    // --- E7: perpendicular trip, destination road charging ---

    fn term_e7(&self, x: f64) -> Result<f64, AnalyticError> {
        let (lambda, p) = (self.params.lambda(), self.params.p());
        let ew = p * (1.0 - p) / 2.0;
        if ew == 0.0 || x <= 0.0 {
            return Ok(0.0);
        }
        let env = &self.env;
        let (c, nc) = (env.c, env.nc);
        let (d_h, d_v) = (self.d_h, self.d_v);
        let reach_dst = x > d_h;

        // terms 1, 2, 4: the trip reaches the charging destination road at
        // distance d_h without any earlier charging contact.
        //
        // The printed weight of term 4 omits the empty-perpendicular-span
        // factor e^{-lambda d_h}; without it the terms sum past the event
        // mass, so the factor is restored here (forced by normalization and
        // by agreement with simulation).
        let t1 = if reach_dst { surv(lambda * d_v) * ew } else { 0.0 };
        let t2 = if reach_dst {
            surv(c * d_v) * mass(nc * d_v) * surv(c * d_h) * ew
        } else {
            0.0
        };
        let t4 = if reach_dst {
            mass(c * d_v) * surv(lambda * d_h) * ew
        } else {
            0.0
        };

        // term 3: a charging perpendicular road inside the span
        let t3 = {
            let w = mass(c * d_h) * surv(c * d_v) * mass(nc * d_v) * ew;
            if w == 0.0 {
                0.0
            } else {
                let r = if reach_dst {
                    1.0
                } else {
                    mass(c * x) / mass(c * d_h)
                };
                w * r
            }
        };

        // terms 5 and 6: non-charging perpendicular road first, coupled
        // (or not) to a parallel charging road within reach
        let gap_w = surv(c * d_h) * mass(nc * d_h) * mass(c * d_v) * ew;
        let (t5, t6) = if gap_w == 0.0 {
            (0.0, 0.0)
        } else {
            let j = self.coupling()?;
            let t5 = if j == 0.0 {
                0.0
            } else {
                let bracket = ratio_below(x, d_h, || {
                    let num = k11(env, (x - d_v).max(0.0), x, move |y| x - y)?
                        + if x > d_v {
                            k11(env, 0.0, x - d_v, move |_| d_v)?
                        } else {
                            0.0
                        };
                    let den = self.den_e7_t5.get(|| {
                        Ok(k11(env, (d_h - d_v).max(0.0), d_h, move |y| d_h - y)?
                            + if d_h > d_v {
                                k11(env, 0.0, d_h - d_v, move |_| d_v)?
                            } else {
                                0.0
                            })
                    })?;
                    Ok(num / den)
                })?;
                j * gap_w * bracket
            };
            let t6 = if reach_dst { (1.0 - j) * gap_w } else { 0.0 };
            (t5, t6)
        };

        // terms 7..9: both a charging perpendicular road and a charging
        // parallel road in span
        let cross_base = mass(c * d_h) * mass(c * d_v) * ew;
        let (t7, t8, t9) = if cross_base == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let q_h = self.q_h();
            let w = (1.0 - q_h) * cross_base;
            let (t7, t8) = if w == 0.0 {
                (0.0, 0.0)
            } else {
                let ix1 = self.ix1()?;
                let t7 = if 1.0 - ix1 == 0.0 {
                    0.0
                } else {
                    (1.0 - ix1) * w * ratio_below(x, d_h, || self.cross_h_ratio(x))?
                };
                let t8 = if ix1 == 0.0 {
                    0.0
                } else {
                    ix1 * w * ratio_below(x, d_h, || self.cross_h_tail_ratio(x))?
                };
                (t7, t8)
            };
            let t9 = if q_h == 0.0 {
                0.0
            } else {
                q_h * cross_base * ratio_below(x, d_h, || self.perp_source_ratio(x))?
            };
            (t7, t8, t9)
        };

        Ok(t1 + t2 + t3 + t4 + t5 + t6 + t7 + t8 + t9)
    }

    /// Perpendicular counterpart of [`Self::cross_v_ratio`].
    fn cross_h_ratio(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let d_h = self.d_h;
        let num = k12(env, 0.0, x, move |_| x, move |_| d_h, move |t, _| x - t, &[])?
            + k12(env, 0.0, x, |_| 0.0, move |_| x, |t, y| y - t, &[])?;
        let den = self.den_e7_t7.get(|| {
            k13(
                env,
                0.0,
                d_h,
                |_| 0.0,
                move |t| d_h - t,
                move |_, _| d_h,
                |t, y| t + y,
                &[],
            )
        })?;
        Ok(num / den)
    }

    /// Perpendicular counterpart of [`Self::cross_v_tail_ratio`]. The
    /// printed numerator and denominator join their two halves with a minus
    /// sign, unlike the parallel twin of this ratio; the minus makes the
    /// bracket negative, so the parallel form's plus is used. The printed
    /// denominator also carries the threshold in one slot where the span is
    /// required; both repairs are forced by normalization.
    fn cross_h_tail_ratio(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let d_h = self.d_h;
        let inf = f64::INFINITY;
        let num = k13(
            env,
            0.0,
            inf,
            |_| 0.0,
            move |t| (x - t).max(0.0),
            |t, y| y + t,
            |_, y| y,
            &[x],
        )? + k13(
            env,
            0.0,
            inf,
            move |t| (x - t).max(0.0),
            move |_| x,
            move |_, _| x,
            |_, y| y,
            &[x],
        )?;
        let den = self.den_e7_t8.get(|| {
            Ok(k13(
                env,
                0.0,
                inf,
                |_| 0.0,
                move |t| (d_h - t).max(0.0),
                |t, y| y + t,
                |_, y| y,
                &[d_h],
            )? + k13(
                env,
                0.0,
                inf,
                move |t| (d_h - t).max(0.0),
                move |_| d_h,
                move |_, _| d_h,
                |_, y| y,
                &[d_h],
            )?)
        })?;
        Ok(num / den)
    }

    /// Nearest charging perpendicular road first, shared by both
    /// perpendicular composite events.
    fn perp_source_ratio(&self, x: f64) -> Result<f64, AnalyticError> {
        let env = &self.env;
        let d_h = self.d_h;
        let inf = f64::INFINITY;
        let num = k11(env, 0.0, x, |y| y)? + k11(env, x, inf, move |_| x)?;
        let den = self.den_e7_t9.get(|| {
            Ok(k11(env, 0.0, d_h, |y| y)? + k11(env, d_h, inf, move |_| d_h)?)
        })?;
        Ok(num / den)
    }

    // --- E8: perpendicular trip, neither endpoint road charging ---

    fn term_e8(&self, x: f64) -> Result<f64, AnalyticError> {
        let p = self.params.p();
        let ew = (1.0 - p) * (1.0 - p) / 2.0;
        if ew == 0.0 || x <= 0.0 {
            return Ok(0.0);
        }
        let env = &self.env;
        let (c, nc) = (env.c, env.nc);
        let (d_h, d_v) = (self.d_h, self.d_v);

        // term 1: charging perpendicular road in span
        let t1 = {
            let w = mass(c * d_h) * surv(c * d_v) * mass(nc * d_v) * ew;
            if w == 0.0 {
                0.0
            } else {
                let r = if x > d_h {
                    1.0
                } else {
                    mass(c * x) / mass(c * d_h)
                };
                w * r
            }
        };

        // term 2: non-charging perpendicular road then a parallel charging
        // road within its reach
        let t2 = {
            let w = surv(c * d_h) * mass(nc * d_h) * mass(c * d_v) * ew;
            if w == 0.0 {
                0.0
            } else {
                let bracket = ratio_below(x, d_h + d_v, || {
                    let num = k11(env, (x - d_v).max(0.0), x.min(d_h), move |y| x - y)?
                        + if x > d_v {
                            k11(env, 0.0, (x - d_v).min(d_h), move |_| d_v)?
                        } else {
                            0.0
                        };
                    Ok(num / (mass(c * d_v) * mass(nc * d_h)))
                })?;
                w * bracket
            }
        };

        // terms 3..5: both families have charging roads in span
        let cross_base = mass(c * d_h) * mass(c * d_v) * ew;
        let (t3, t4, t5) = if cross_base == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let q_h = self.q_h();
            let w = (1.0 - q_h) * cross_base;
            let (t3, t4) = if w == 0.0 {
                (0.0, 0.0)
            } else {
                let ix1 = self.ix1()?;
                let t3 = if 1.0 - ix1 == 0.0 {
                    0.0
                } else {
                    (1.0 - ix1) * w * ratio_below(x, d_h, || self.cross_h_ratio(x))?
                };
                let t4 = if ix1 == 0.0 {
                    0.0
                } else {
                    ix1 * w * ratio_below(x, d_h, || self.cross_h_tail_ratio(x))?
                };
                (t3, t4)
            };
            let t5 = if q_h == 0.0 {
                0.0
            } else {
                q_h * cross_base * ratio_below(x, d_h, || self.perp_source_ratio(x))?
            };
            (t3, t4, t5)
        };

        Ok(t1 + t2 + t3 + t4 + t5)
    }
}

/// P(D_n < x | event) P(event) at one query point.
pub fn lemma_term(
    event: Event,
    query: &AnalyticQuery,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    DnEvaluator::new(query.params(), query.d_h(), query.d_v(), cfg)?
        .lemma_term(event, query.x())
}

/// P(D_n < x) with its per-event breakdown.
pub fn cdf_dn(
    query: &AnalyticQuery,
    cfg: &QuadratureConfig,
) -> Result<LemmaBreakdown, AnalyticError> {
    DnEvaluator::new(query.params(), query.d_h(), query.d_v(), cfg)?.breakdown(query.x())
}

/// Probability that the trip traverses at least one charging road.
///
/// Both no-contact brackets are closed forms; each is weighted by the event
/// mass (1-p)^2/2. (The printed form omits the 1/2 of the event masses and
/// would give -1 at p=0; the halved weight restores the p=0 and p=1 limits
/// exactly.)
pub fn prob_tc(params: &ModelParams, d_h: f64, d_v: f64) -> Result<f64, AnalyticError> {
    for d in [d_h, d_v] {
        if !d.is_finite() || d <= 0.0 {
            return Err(ParamError::Distance(d).into());
        }
    }
    let (lambda, p) = (params.lambda(), params.p());
    let (c, nc) = (params.charging_rate(), params.noncharging_rate());
    let miss_parallel = surv(lambda * d_v) * (1.0 - p)
        + lambda * (1.0 - p) * d_v * surv(nc * d_v) * surv(c * d_v)
        + surv(c * d_v)
            * (mass(nc * d_v) - lambda * (1.0 - p) * d_v * surv(nc * d_v))
            * surv(c * d_h);
    let miss_perpendicular = surv(lambda * d_v)
        + surv(c * d_v) * mass(nc * d_v) * surv(c * d_h)
        + mass(c * d_v) * surv(lambda * d_h);
    let weight = (1.0 - p) * (1.0 - p) / 2.0;
    Ok(1.0 - (miss_parallel + miss_perpendicular) * weight)
}

/// Reinterprets the query threshold as a fraction of the total trip length
/// and maps it through the distance law.
pub fn trip_fraction_transform(
    query: &AnalyticQuery,
    kind: BoundKind,
    cfg: &QuadratureConfig,
) -> Result<f64, AnalyticError> {
    let f = query.x();
    if !(0.0..=1.0).contains(&f) {
        return Err(AnalyticError::InvalidFraction(f));
    }
    let total = query.d_h() + query.d_v();
    match kind {
        BoundKind::NonchargingLower => Ok(cdf_dn(&query.with_x(f * total)?, cfg)?.total()),
        BoundKind::ChargingUpper => {
            Ok(1.0 - cdf_dn(&query.with_x((1.0 - f) * total)?, cfg)?.total())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn query(lambda: f64, p: f64, d_h: f64, d_v: f64, x: f64) -> AnalyticQuery {
        AnalyticQuery::new(ModelParams::new(lambda, p).unwrap(), d_h, d_v, x).unwrap()
    }

    #[test]
    fn source_charging_events_are_flat() {
        let q = query(0.016, 0.2, 2000.0, 3000.0, 750.0);
        let both = 0.2 * 0.2 / 2.0;
        let one = 0.2 * 0.8 / 2.0;
        assert_eq!(lemma_term(Event::E1, &q, &cfg()).unwrap(), both);
        assert_eq!(lemma_term(Event::E5, &q, &cfg()).unwrap(), both);
        assert_eq!(lemma_term(Event::E2, &q, &cfg()).unwrap(), one);
        assert_eq!(lemma_term(Event::E6, &q, &cfg()).unwrap(), one);
        let at_zero = query(0.016, 0.2, 2000.0, 3000.0, 0.0);
        for event in Event::ALL {
            assert_eq!(lemma_term(event, &at_zero, &cfg()).unwrap(), 0.0);
        }
    }

    #[test]
    fn degenerate_p_limits_are_exact() {
        let all = |p: f64, x: f64| cdf_dn(&query(0.01, p, 1500.0, 2500.0, x), &cfg()).unwrap();
        assert_eq!(all(1.0, 10.0).total(), 1.0);
        assert_eq!(all(1.0, 1e9_f64.min(5e3)).total(), 1.0);
        assert_eq!(all(0.0, 10.0).total(), 0.0);
        assert_eq!(all(0.0, 4000.0).total(), 0.0);
    }

    #[test]
    fn small_threshold_total_is_p() {
        let b = cdf_dn(&query(0.016, 0.3, 2000.0, 3000.0, 1e-6), &cfg()).unwrap();
        assert!(
            (b.total() - 0.3).abs() < 1e-8,
            "total at x->0+ was {}",
            b.total()
        );
    }

    #[test]
    fn normalizes_at_large_threshold() {
        // both parameter sets keep the never-charging residual far below the
        // tolerance, so the total and every conditional term must saturate
        for (lambda, p, d_h, d_v) in [(0.016, 0.4, 2000.0, 3000.0), (0.01, 0.5, 3000.0, 3000.0)] {
            let x = d_h + d_v + 50.0 / lambda;
            let b = cdf_dn(&query(lambda, p, d_h, d_v, x), &cfg()).unwrap();
            assert!(
                (b.total() - 1.0).abs() < 1e-8,
                "total at lambda={lambda}, p={p}: {}",
                b.total()
            );
            for (event, term) in b.terms() {
                let want = event.probability(p);
                assert!(
                    (term - want).abs() < 1e-8,
                    "{event} saturates to {term}, event mass {want}"
                );
            }
        }
    }

    #[test]
    fn preset_anchor_value() {
        // regression pin; cross-validated against the routing-policy Monte
        // Carlo at n=2e5 (0.956525 +- 0.00046, z = -0.04)
        let b = cdf_dn(&query(0.016, 0.2, 2000.0, 3000.0, 500.0), &cfg()).unwrap();
        assert!(
            (b.total() - 0.9565077).abs() < 5e-6,
            "anchor total {}",
            b.total()
        );
    }

    #[test]
    fn cdf_is_monotone_and_bounded() {
        let ev = DnEvaluator::new(
            ModelParams::new(0.016, 0.2).unwrap(),
            2000.0,
            3000.0,
            &cfg(),
        )
        .unwrap();
        let mut last = 0.0;
        for i in 0..=16 {
            let x = 500.0 * i as f64;
            let b = ev.breakdown(x).unwrap();
            assert!(
                b.total() >= last - 1e-9,
                "total dipped at x={x}: {} < {last}",
                b.total()
            );
            assert!(b.total() <= 1.0 + 1e-9);
            for (event, term) in b.terms() {
                assert!(
                    (0.0..=event.probability(0.2) + 1e-9).contains(&term),
                    "{event} term {term} out of range at x={x}"
                );
            }
            last = b.total();
        }
    }

    #[test]
    fn coverage_probability_limits_and_trends() {
        let d = |lambda: f64, p: f64, d_h: f64, d_v: f64| {
            prob_tc(&ModelParams::new(lambda, p).unwrap(), d_h, d_v).unwrap()
        };
        assert_eq!(d(0.011, 0.0, 2000.0, 3000.0), 0.0);
        assert_eq!(d(0.011, 1.0, 2000.0, 3000.0), 1.0);
        // nondecreasing in p and in both spans
        let mut last = 0.0;
        for p in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let v = d(0.006, p, 1500.0, 2000.0);
            assert!(v >= last && (0.0..=1.0).contains(&v));
            last = v;
        }
        let mut last = 0.0;
        for scale in [1.0, 2.0, 3.0, 5.0] {
            let v = d(0.006, 0.1, 400.0 * scale, 600.0 * scale);
            assert!(v >= last, "not monotone in distance at scale {scale}");
            last = v;
        }
    }

    #[test]
    fn fraction_transform_round_trip() {
        let q = query(0.016, 0.2, 2000.0, 3000.0, 0.0);
        for f in [0.0, 0.3, 0.62, 1.0] {
            let lower =
                trip_fraction_transform(&q.with_x(f).unwrap(), BoundKind::NonchargingLower, &cfg())
                    .unwrap();
            let upper = trip_fraction_transform(
                &q.with_x(1.0 - f).unwrap(),
                BoundKind::ChargingUpper,
                &cfg(),
            )
            .unwrap();
            assert!((lower + upper - 1.0).abs() < 1e-12, "f={f}");
        }
        assert!(matches!(
            trip_fraction_transform(&q.with_x(1.5).unwrap(), BoundKind::NonchargingLower, &cfg()),
            Err(AnalyticError::InvalidFraction(_))
        ));
    }

    #[test]
    fn evaluator_matches_free_functions() {
        let q = query(0.01, 0.3, 1000.0, 1500.0, 800.0);
        let ev = DnEvaluator::new(q.params(), q.d_h(), q.d_v(), &cfg()).unwrap();
        let via_free = cdf_dn(&q, &cfg()).unwrap();
        let via_ev = ev.breakdown(800.0).unwrap();
        assert_eq!(via_free, via_ev);
        assert!(
            (via_free.total() - via_free.terms().map(|(_, t)| t).sum::<f64>()).abs() < 1e-15
        );
    }
}
