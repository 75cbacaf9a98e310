//! Minimal two-level periodic interfaces for a component.
//!
//! `C^L` is the least capacity (on the resolution grid) that covers the
//! component's demand while it has no external switch; `C^H` is the least
//! capacity `>= C^L` that covers every interval containing one. Supply grows
//! with either capacity, so both are found by binary search.
//!
//! Horizons come from linear envelopes: demand `<= rate·t + K` and
//!
//! * `sbf_lc(t) >= α_L·(t - 2(T - C^L))`
//! * `sbf(t_E, t) >= α_L·t_E + α_H·(t - t_E) - 2(C^L + C^H)`
//!
//! with `α = C/T`. A violation past the resulting horizon is impossible.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use super::flat::component_worst;
use super::horizon::{ceil_ticks, component_constant, pre_switch_rate};
use super::AnalysisError;
use crate::demand::{task_demand, top_sum};
use crate::model::{component_utilization, Component, CriticalityLevel, Ticks};
use crate::supply::{sbf_lc_units, sbf_units, MCPRInterface, Units, DEFAULT_UNITS_PER_TICK};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterfaceResult {
    pub iface: MCPRInterface,
    pub feasible: bool,
    pub c_lo_minimal: Units,
    pub c_hi_minimal: Units,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Upper bound of the component demand over all `t_I <= t_E`.
fn demand_bound(comp: &Component, t: Ticks, t_e: Ticks, gains: &mut Vec<Ticks>) -> Ticks {
    gains.clear();
    let mut base = 0;
    for k in &comp.tasks {
        let at_e = task_demand(k, t, t_e);
        base += at_e;
        if k.is_hc() {
            gains.push((task_demand(k, t, 0) - at_e).max(0));
        }
    }
    base + top_sum(gains, comp.tolerance_limit as usize)
}

/// Does `C^L = cap_lo` units cover the component without external switch?
pub fn lc_capacity_ok(comp: &Component, period: Ticks, units_per_tick: i64, cap_lo: Units) -> bool {
    if comp.tasks.is_empty() {
        return true;
    }
    let p = period * units_per_tick;
    let alpha = rat(cap_lo, p);
    let rho = pre_switch_rate(comp);
    if alpha <= rho {
        return false;
    }
    let blackout = &alpha * (int(2 * period) - rat(2 * cap_lo, units_per_tick));
    let Some(horizon) = ceil_ticks(&((component_constant(comp) + blackout) / (alpha - rho))) else {
        return false;
    };
    let iface = MCPRInterface {
        period,
        criticality: CriticalityLevel::HC,
        cap_lo,
        cap_hi: cap_lo,
        units_per_tick,
    };
    let mut gains = Vec::new();
    (1..=horizon).all(|t| {
        let supply = sbf_lc_units(&iface, t * units_per_tick);
        let b = demand_bound(comp, t, t, &mut gains);
        b * units_per_tick <= supply
            || component_worst(comp, false, t, t, b).0 * units_per_tick <= supply
    })
}

/// Does `C^H = cap_hi` cover every interval with an external switch, given
/// a `C^L` that passed [`lc_capacity_ok`]?
pub fn hc_capacity_ok(
    comp: &Component,
    period: Ticks,
    units_per_tick: i64,
    cap_lo: Units,
    cap_hi: Units,
) -> bool {
    if !comp.is_hc() {
        return true;
    }
    let p = period * units_per_tick;
    let (a_lo, a_hi) = (rat(cap_lo, p), rat(cap_hi, p));
    let rho_lo = pre_switch_rate(comp);
    let rho_hi = component_utilization(comp).u_hh;
    if a_lo <= rho_lo || a_hi <= rho_hi {
        return false;
    }
    let slack = component_constant(comp) + rat(2 * (cap_lo + cap_hi), units_per_tick);
    let (Some(h1), Some(h2)) = (
        ceil_ticks(&(&slack / (a_lo - rho_lo))),
        ceil_ticks(&(&slack / (a_hi - rho_hi))),
    ) else {
        return false;
    };
    let horizon = h1 + h2;
    let iface = MCPRInterface {
        period,
        criticality: CriticalityLevel::HC,
        cap_lo,
        cap_hi,
        units_per_tick,
    };
    let s = units_per_tick;
    let mut gains = Vec::new();
    (1..=horizon).all(|t| {
        (0..t).all(|t_e| {
            let supply = sbf_units(&iface, t_e * s, t * s);
            let b = demand_bound(comp, t, t_e, &mut gains);
            b * s <= supply || component_worst(comp, false, t, t_e, b).0 * s <= supply
        })
    })
}

/// Least value in `lo..=hi` satisfying a monotone predicate, if any.
fn least(lo: Units, hi: Units, ok: impl Fn(Units) -> bool) -> Option<Units> {
    if lo > hi || !ok(hi) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let m = a + (b - a) / 2;
        if ok(m) {
            b = m;
        } else {
            a = m + 1;
        }
    }
    Some(a)
}

pub fn generate_interface(comp: &Component) -> Result<InterfaceResult, AnalysisError> {
    generate_interface_with(comp, DEFAULT_UNITS_PER_TICK)
}

pub fn generate_interface_with(
    comp: &Component,
    units_per_tick: i64,
) -> Result<InterfaceResult, AnalysisError> {
    let period = comp
        .interface_period
        .ok_or_else(|| AnalysisError::MissingInterfacePeriod(comp.id.clone()))?;
    let p = period * units_per_tick;
    let criticality = if comp.is_hc() {
        CriticalityLevel::HC
    } else {
        CriticalityLevel::LC
    };
    let lo = least(0, p, |c| lc_capacity_ok(comp, period, units_per_tick, c));
    let hi = lo.and_then(|cl| {
        if comp.is_hc() {
            least(cl, p, |c| hc_capacity_ok(comp, period, units_per_tick, cl, c))
        } else {
            Some(cl)
        }
    });
    let (feasible, cl, ch) = match (lo, hi) {
        (Some(cl), Some(ch)) => (true, cl, ch),
        (Some(cl), None) => (false, cl, p),
        _ => (false, p, p),
    };
    Ok(InterfaceResult {
        iface: MCPRInterface {
            period,
            criticality,
            cap_lo: cl,
            cap_hi: if criticality == CriticalityLevel::LC { cl } else { ch },
            units_per_tick,
        },
        feasible,
        c_lo_minimal: cl,
        c_hi_minimal: ch,
    })
}
