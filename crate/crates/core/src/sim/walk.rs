use rand::Rng;
use serde::Serialize;

use super::SimError;
use crate::mplp::{Event, EventContext, Road, RoadRealization};

/// Terminal case of one event tree; displayed as `L{tree}.{index}` with
/// 1-based indices in enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Leaf {
    tree: u8,
    index: u8,
}

impl Leaf {
    pub fn new(tree: u8, index: u8) -> Self {
        Self { tree, index }
    }

    pub fn tree(self) -> u8 {
        self.tree
    }

    pub fn index(self) -> u8 {
        self.index
    }
}

impl std::fmt::Display for Leaf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}.{}", self.tree, self.index)
    }
}

/// Resolution of one trip: which leaf the case analysis reached, the travel
/// distance to the first charging road, and whether the route drives on a
/// charging road at all.
///
/// `d_n` is `Some(0.0)` whenever the source road charges and `None` exactly
/// when `passes_charging` is false (the distance is then infinite for the
/// trip).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripOutcome {
    pub event: Event,
    pub leaf: Leaf,
    pub d_n: Option<f64>,
    pub passes_charging: bool,
}

/// True when a non-charging road lies above the furthest charging road within
/// the span. Meaningful only when a charging road exists there.
fn noncharging_above_furthest_charging(roads: &[Road], span: f64) -> bool {
    let mut above = false;
    for r in roads.iter().take_while(|r| r.offset < span) {
        above = !r.charging;
    }
    above
}

fn need(v: Option<f64>, what: &'static str) -> Result<f64, SimError> {
    v.ok_or(SimError::InconsistentRealization(what))
}

/// Descends the trip's decision tree and resolves the outcome.
///
/// Every branch is determined by the realization: existence and ordering of
/// roads, the gap comparisons `x1 > d_nvc`-style, and the detour-side choice
/// all read sampled roads, never fresh randomness. The generator argument is
/// part of the operation contract, reserved for leaf actions that would need
/// auxiliary draws; none of the trees do.
///
/// The context must come from classifying the same realization; a mismatch is
/// reported as [`SimError::InconsistentRealization`].
pub fn walk_tree<R: Rng + ?Sized>(
    context: &EventContext,
    realization: &RoadRealization,
    _rng: &mut R,
) -> Result<TripOutcome, SimError> {
    let geo = &realization.geometry;
    let event = Event::from_flags(
        geo.orientation(),
        realization.source_charging,
        realization.dest_charging,
    );
    if context.event != event {
        return Err(SimError::InconsistentRealization(
            "event does not match the realization's orientation and endpoint flags",
        ));
    }
    let (d_l, mark_charging) = realization.opposite_nearest();
    if context.d_l != d_l {
        return Err(SimError::InconsistentRealization(
            "opposite-side distance does not match the realization",
        ));
    }
    let d_h = geo.d_h();
    let d_v = geo.d_v();
    let h_span = realization
        .h_toward()
        .iter()
        .take_while(|r| r.offset < d_v);
    let count_hc = h_span.clone().filter(|r| r.charging).count();
    let count_h = h_span.count();
    let count_hnc = count_h - count_hc;
    let count_v = realization
        .v_toward()
        .iter()
        .take_while(|r| r.offset < d_h)
        .count();
    let hc = context.d_nhc;
    let hnc = context.d_nhnc;
    let vc = context.d_nvc;
    let vnc = context.d_nvnc;

    let (index, d_n, passes) = match event {
        // Source road charges: the trip starts on a charging road, so only
        // the leaf bookkeeping differs.
        Event::E1 => {
            let index = if count_h == 0 {
                1
            } else if hc.is_some() {
                2
            } else {
                3
            };
            (index, Some(0.0), true)
        }
        Event::E2 => {
            let index = if count_h == 0 {
                1
            } else if hc.is_none() {
                2
            } else {
                let above =
                    noncharging_above_furthest_charging(realization.h_toward(), d_v);
                match (vc.is_some(), above) {
                    (false, true) => 3,
                    (false, false) => 4,
                    (true, true) => 5,
                    (true, false) => 6,
                }
            };
            (index, Some(0.0), true)
        }
        Event::E5 => (1, Some(0.0), true),
        Event::E6 => {
            let index = if count_h == 0 {
                1
            } else if hc.is_none() {
                if vc.is_none() {
                    2
                } else {
                    3
                }
            } else if vc.is_none() {
                4
            } else if noncharging_above_furthest_charging(realization.h_toward(), d_v) {
                5
            } else {
                6
            };
            (index, Some(0.0), true)
        }
        // Parallel, destination road charges. The route ends with a climb on
        // the charging destination road, so every leaf reaches charging.
        Event::E3 => {
            if count_h == 0 {
                // Detour through the nearest road outside the span, on
                // whichever side is closer.
                let beyond = realization
                    .h_toward()
                    .iter()
                    .find(|r| r.offset > d_v)
                    .ok_or(SimError::InconsistentRealization(
                        "no road beyond the span despite the sampling guarantee",
                    ))?;
                let d_n = if beyond.offset - d_v < d_l {
                    if beyond.charging {
                        beyond.offset
                    } else {
                        beyond.offset + d_h
                    }
                } else if mark_charging {
                    d_l
                } else {
                    d_l + d_h
                };
                (1, Some(d_n), true)
            } else if hc.is_none() {
                let hnc = need(hnc, "a non-charging parallel road must exist here")?;
                if count_hnc == 1 {
                    // A lone connector admits no charging climb before the
                    // destination road.
                    (2, Some(hnc + d_h), true)
                } else if let Some(vc) = vc {
                    (4, Some(hnc + vc), true)
                } else {
                    (3, Some(hnc + d_h), true)
                }
            } else {
                let hc = need(hc, "a charging parallel road must exist here")?;
                match (vc, context.x2) {
                    (None, Some(x2)) => {
                        if x2 < d_h {
                            (5, Some(hc), true)
                        } else {
                            let hnc =
                                need(hnc, "the gap requires a non-charging road")?;
                            (6, Some(hnc + d_h), true)
                        }
                    }
                    (None, None) => (7, Some(hc), true),
                    (Some(vc), Some(x2)) => {
                        if vc < x2 {
                            let hnc =
                                need(hnc, "the gap requires a non-charging road")?;
                            (8, Some(hnc + vc), true)
                        } else {
                            (9, Some(hc), true)
                        }
                    }
                    (Some(_), None) => (10, Some(hc), true),
                }
            }
        }
        // Parallel, neither endpoint road charges: the only charging contact
        // can come from roads strictly inside the trip rectangle or from the
        // detour road when the span is empty.
        Event::E4 => {
            if count_h == 0 {
                let beyond = realization
                    .h_toward()
                    .iter()
                    .find(|r| r.offset > d_v)
                    .ok_or(SimError::InconsistentRealization(
                        "no road beyond the span despite the sampling guarantee",
                    ))?;
                let up = beyond.offset - d_v < d_l;
                let d_n = if up {
                    beyond.charging.then_some(beyond.offset)
                } else {
                    mark_charging.then_some(d_l)
                };
                (1, d_n, d_n.is_some())
            } else if count_hc == 0 {
                if count_hnc == 1 {
                    (2, None, false)
                } else if let Some(vc) = vc {
                    let hnc = need(hnc, "a non-charging parallel road must exist here")?;
                    (5, Some(hnc + vc), true)
                } else {
                    (4, None, false)
                }
            } else {
                let hc = need(hc, "a charging parallel road must exist here")?;
                // One charging connector or several: the route arithmetic is
                // the same, only the enumeration index differs.
                let base = if count_hc == 1 {
                    if count_hnc == 0 {
                        return finish(event, 3, Some(hc), true);
                    }
                    6
                } else {
                    10
                };
                match (vc, context.x2) {
                    (None, _) => (base, Some(hc), true),
                    (Some(vc), Some(x2)) => {
                        if vc < x2 {
                            let hnc =
                                need(hnc, "the gap requires a non-charging road")?;
                            (base + 1, Some(hnc + vc), true)
                        } else {
                            (base + 2, Some(hc), true)
                        }
                    }
                    (Some(_), None) => (base + 3, Some(hc), true),
                }
            }
        }
        // Perpendicular, destination road charges: riding the destination
        // road is always available, so every leaf reaches charging; the
        // question is whether an earlier contact wins the charging-length
        // tie-break.
        Event::E7 => {
            if count_h == 0 {
                (1, Some(d_h), true)
            } else if hc.is_none() {
                match vc {
                    None => (2, Some(d_h), true),
                    Some(vc) => (3, Some(vc), true),
                }
            } else {
                let hc = need(hc, "a charging parallel road must exist here")?;
                if count_v == 0 {
                    (4, Some(d_h), true)
                } else if vc.is_none() {
                    let vnc = need(vnc, "a non-charging perpendicular road must exist here")?;
                    if d_h - vnc > hc {
                        (5, Some(vnc + hc), true)
                    } else {
                        (6, Some(d_h), true)
                    }
                } else {
                    let vc = need(vc, "a charging perpendicular road must exist here")?;
                    match context.x1 {
                        Some(x1) => {
                            if x1 > hc {
                                let vnc = need(
                                    vnc,
                                    "the gap requires a non-charging perpendicular road",
                                )?;
                                (7, Some(vnc + hc), true)
                            } else {
                                (8, Some(vc), true)
                            }
                        }
                        None => (9, Some(vc), true),
                    }
                }
            }
        }
        // Perpendicular, neither endpoint road charges.
        Event::E8 => {
            if count_h == 0 {
                (1, None, false)
            } else if hc.is_none() {
                match vc {
                    None => (2, None, false),
                    Some(vc) => (3, Some(vc), true),
                }
            } else {
                let hc = need(hc, "a charging parallel road must exist here")?;
                if count_v == 0 {
                    (4, None, false)
                } else if vc.is_none() {
                    let vnc = need(vnc, "a non-charging perpendicular road must exist here")?;
                    (5, Some(vnc + hc), true)
                } else {
                    let vc = need(vc, "a charging perpendicular road must exist here")?;
                    match context.x1 {
                        Some(x1) => {
                            if x1 > hc {
                                let vnc = need(
                                    vnc,
                                    "the gap requires a non-charging perpendicular road",
                                )?;
                                (6, Some(vnc + hc), true)
                            } else {
                                (7, Some(vc), true)
                            }
                        }
                        None => (8, Some(vc), true),
                    }
                }
            }
        }
    };
    finish(event, index, d_n, passes)
}

fn finish(
    event: Event,
    index: u8,
    d_n: Option<f64>,
    passes: bool,
) -> Result<TripOutcome, SimError> {
    Ok(TripOutcome {
        event,
        leaf: Leaf::new(event.number(), index),
        d_n,
        passes_charging: passes,
    })
}
