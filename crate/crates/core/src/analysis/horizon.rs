//! Bounds on the interval lengths that have to be checked.
//!
//! Every bound here follows from linear envelopes of the task demand:
//!
//! * HC task: `dbf(t, x) <= u^L·x + u^H·(t - x) + (2T - D)·u^H`
//! * LC task: `dbf(t, x) <= u·x + C`
//!
//! (both property-tested below). Summing over a system gives
//! `demand <= rate·t + K`; a violation `demand > t` is then impossible past
//! `K / (1 - rate)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::model::{component_utilization, ratio, Component, SystemSpec, Ticks};

/// Ceiling of a non-negative rational as ticks; `None` on overflow.
pub(crate) fn ceil_ticks(x: &BigRational) -> Option<Ticks> {
    x.ceil().to_integer().to_i64()
}

fn max_rat(a: BigRational, b: BigRational) -> BigRational {
    if a >= b {
        a
    } else {
        b
    }
}

/// `K_j`: the constant of the component's linear demand envelope.
pub(crate) fn component_constant(comp: &Component) -> BigRational {
    let reach = comp
        .tasks
        .iter()
        .map(|t| 2 * t.period - t.deadline)
        .max()
        .unwrap_or(0);
    let u = component_utilization(comp);
    let lc: Ticks = comp.lc_tasks().map(|t| t.wcet_lo).sum();
    u.u_hh * BigRational::from_integer(BigInt::from(reach)) + BigRational::from_integer(BigInt::from(lc))
}

/// Demand rate of a component before its external switch, with up to `TL`
/// HC tasks already overrunning and the LC tasks possibly dropped.
pub(crate) fn pre_switch_rate(comp: &Component) -> BigRational {
    let u = component_utilization(comp);
    let mut gains: Vec<BigRational> = comp
        .hc_tasks()
        .map(|t| ratio(t.wcet_hi - t.wcet_lo, t.period))
        .collect();
    gains.sort_by(|a, b| b.cmp(a));
    let top: BigRational = gains
        .into_iter()
        .take(comp.tolerance_limit as usize)
        .fold(BigRational::zero(), |acc, g| acc + g);
    max_rat(&u.u_ll + &u.u_hl, u.u_hl + top)
}

/// Closed-form `t_MAX`. `None` means the necessary utilization condition
/// fails (non-positive denominator).
pub fn t_max(spec: &SystemSpec) -> Option<Ticks> {
    let mut num = BigRational::zero();
    let mut den = BigRational::one();
    for comp in &spec.components {
        let u = component_utilization(comp);
        num += component_constant(comp);
        let lo = &u.u_ll + &u.u_hl;
        if lo < u.u_hh {
            den -= u.u_hh;
        } else {
            den -= lo;
        }
    }
    if num.is_zero() {
        return Some(0);
    }
    if !den.is_positive() {
        return None;
    }
    ceil_ticks(&(num / den))
}

/// Long-run demand rate of the whole system, accounting for tolerance limits:
/// before the external switch every component runs at its pre-switch rate and
/// LC components at their utilization; afterwards only HC budgets remain.
pub fn system_rate(spec: &SystemSpec) -> BigRational {
    let mut before = BigRational::zero();
    let mut after = BigRational::zero();
    for comp in &spec.components {
        if comp.is_hc() {
            before += pre_switch_rate(comp);
            after += component_utilization(comp).u_hh;
        } else {
            before += component_utilization(comp).u_ll;
        }
    }
    max_rat(before, after)
}

/// The horizon the flat test actually scans. Never larger than [`t_max`];
/// `None` when the tolerance-aware long-run rate reaches 1.
pub fn analysis_horizon(spec: &SystemSpec) -> Option<Ticks> {
    let num: BigRational = spec
        .components
        .iter()
        .map(component_constant)
        .fold(BigRational::zero(), |a, b| a + b);
    if num.is_zero() {
        return Some(0);
    }
    let den = BigRational::one() - system_rate(spec);
    if !den.is_positive() {
        return None;
    }
    ceil_ticks(&(num / den))
}
