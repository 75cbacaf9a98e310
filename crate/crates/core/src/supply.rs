//! Two-level periodic resource interfaces and their supply bound function.
//!
//! Capacities are fixed-point: one tick is `units_per_tick` units (the default
//! resolution is 1/100 tick). Every function here works on the unit scale, so
//! results are exact integers. The `*_units` variants take times already
//! scaled to units; the plain variants take ticks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CriticalityLevel, Ticks};

/// Capacity in fixed-point units.
pub type Units = i64;

pub const DEFAULT_UNITS_PER_TICK: i64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SupplyError {
    #[error("invalid interface: {0}")]
    InvalidInterface(String),
    #[error("need 0 <= t_E < t (got t_E={t_e}, t={t})")]
    InstantsOutOfOrder { t_e: Units, t: Units },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCPRInterface {
    pub period: Ticks,
    pub criticality: CriticalityLevel,
    pub cap_lo: Units,
    pub cap_hi: Units,
    pub units_per_tick: i64,
}

impl MCPRInterface {
    pub fn new(
        period: Ticks,
        criticality: CriticalityLevel,
        cap_lo: Units,
        cap_hi: Units,
        units_per_tick: i64,
    ) -> Result<Self, SupplyError> {
        let iface = MCPRInterface {
            period,
            criticality,
            cap_lo,
            cap_hi,
            units_per_tick,
        };
        iface.check()?;
        Ok(iface)
    }

    fn check(&self) -> Result<(), SupplyError> {
        let bad = |m: &str| Err(SupplyError::InvalidInterface(m.to_string()));
        if self.period <= 0 {
            return bad("period must be positive");
        }
        if self.units_per_tick <= 0 {
            return bad("resolution must be positive");
        }
        if self.cap_lo < 0 || self.cap_lo > self.cap_hi || self.cap_hi > self.period_units() {
            return bad("need 0 <= C^L <= C^H <= T");
        }
        if self.criticality == CriticalityLevel::LC && self.cap_lo != self.cap_hi {
            return bad("LC interface needs C^L = C^H");
        }
        Ok(())
    }

    pub fn period_units(&self) -> Units {
        self.period * self.units_per_tick
    }

    pub fn cap_lo_ticks(&self) -> f64 {
        self.cap_lo as f64 / self.units_per_tick as f64
    }

    pub fn cap_hi_ticks(&self) -> f64 {
        self.cap_hi as f64 / self.units_per_tick as f64
    }
}

/// Layout of the worst-case supply pattern, in units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupplyPatternContext {
    pub s_1: Units,
    pub n: i64,
    pub n_e: i64,
    pub s_e: Units,
    pub e_e: Units,
    pub e: Units,
    pub x_e: Units,
}

fn pos(x: i64) -> i64 {
    x.max(0)
}

pub fn pattern_a_context(iface: &MCPRInterface, t_e: Units, t: Units) -> SupplyPatternContext {
    let p = iface.period_units();
    let s_1 = p - iface.cap_lo;
    let n_e = pos((t_e - s_1).div_euclid(p));
    let n = pos((t - s_1).div_euclid(p));
    let s_e = n_e * p + s_1;
    SupplyPatternContext {
        s_1,
        n,
        n_e,
        s_e,
        e_e: s_e + p,
        e: n * p + p + s_1,
        x_e: t_e.div_euclid(p) * p + if t_e.rem_euclid(p) == 0 { 0 } else { p },
    }
}

pub fn pattern_b_context(iface: &MCPRInterface, t_e: Units, t: Units) -> SupplyPatternContext {
    let p = iface.period_units();
    let x_e = t_e.div_euclid(p) * p + if t_e.rem_euclid(p) == 0 { 0 } else { p };
    let s_1 = p - iface.cap_lo - (x_e - t_e);
    let n_e = pos((t_e - s_1).div_euclid(p));
    let n = pos((t - s_1).div_euclid(p));
    let e_e = t_e - iface.cap_lo + p;
    SupplyPatternContext {
        s_1,
        n,
        n_e,
        s_e: e_e - p,
        e_e,
        e: n * p + p + s_1,
        x_e,
    }
}

pub fn sbf_lc_units(iface: &MCPRInterface, t: Units) -> Units {
    let p = iface.period_units();
    let cl = iface.cap_lo;
    let n = pos((t - (p - cl)).div_euclid(p));
    n * cl + pos(t - 2 * (p - cl) - n * p)
}

fn check_pattern_args(t_e: Units, t: Units) -> Result<(), SupplyError> {
    if 0 <= t_e && t_e < t {
        Ok(())
    } else {
        Err(SupplyError::InstantsOutOfOrder { t_e, t })
    }
}

fn pattern_a(iface: &MCPRInterface, t_e: Units, t: Units) -> Units {
    let p = iface.period_units();
    let (cl, ch) = (iface.cap_lo, iface.cap_hi);
    if cl == 0 {
        // nothing to finish before t_E: every HC period starts after it, the
        // first at most one period minus a unit later
        let lead = t - t_e - (2 * p - 1 - ch);
        return (0..=pos(lead).div_euclid(p)).map(|k| ch.min(pos(lead - k * p))).sum();
    }
    let c = pattern_a_context(iface, t_e, t);
    let tail = pos(t - (2 * p - cl - ch) - c.n * p);
    if t_e - c.s_e < cl {
        c.n_e * cl + (c.n - c.n_e) * ch + tail
    } else if c.e != c.e_e {
        (c.n_e + 1) * cl + (c.n - c.n_e - 1) * ch + tail
    } else {
        c.n_e * cl + cl.min(tail)
    }
}

fn pattern_b(iface: &MCPRInterface, t_e: Units, t: Units) -> Units {
    // With t_E = 0 the period that exhausts C^L right before t_E lies wholly
    // before the interval, and the shift is zero: the pattern is pattern A.
    if t_e == 0 || iface.cap_lo == 0 {
        return pattern_a(iface, t_e, t);
    }
    let p = iface.period_units();
    let (cl, ch) = (iface.cap_lo, iface.cap_hi);
    let c = pattern_b_context(iface, t_e, t);
    let tail = pos(t - c.s_1 - (p - ch) - c.n * p);
    if c.e != c.e_e {
        (c.n_e + 1) * cl + (c.n - c.n_e - 1) * ch + tail
    } else {
        c.n_e * cl + cl.min(tail)
    }
}

pub fn sbf_pattern_a_units(iface: &MCPRInterface, t_e: Units, t: Units) -> Result<Units, SupplyError> {
    check_pattern_args(t_e, t)?;
    Ok(pattern_a(iface, t_e, t))
}

pub fn sbf_pattern_b_units(iface: &MCPRInterface, t_e: Units, t: Units) -> Result<Units, SupplyError> {
    check_pattern_args(t_e, t)?;
    Ok(pattern_b(iface, t_e, t))
}

/// Minimum supply in any interval of length `t` that contains an external
/// mode switch `t_E` time units after its start (`t_E = t`: no switch).
pub fn sbf_units(iface: &MCPRInterface, t_e: Units, t: Units) -> Units {
    debug_assert!(0 <= t_e && t_e <= t);
    if t <= 0 {
        return 0;
    }
    let v = if t_e >= t {
        sbf_lc_units(iface, t)
    } else {
        pattern_a(iface, t_e, t).min(pattern_b(iface, t_e, t))
    };
    assert!(
        (0..=t).contains(&v),
        "sbf out of range: {v} for t_E={t_e}, t={t}, {iface:?}"
    );
    v
}

pub fn sbf_lc(iface: &MCPRInterface, t: Ticks) -> Units {
    sbf_lc_units(iface, t * iface.units_per_tick)
}

pub fn sbf_pattern_a(iface: &MCPRInterface, t_e: Ticks, t: Ticks) -> Result<Units, SupplyError> {
    let s = iface.units_per_tick;
    sbf_pattern_a_units(iface, t_e * s, t * s)
}

pub fn sbf_pattern_b(iface: &MCPRInterface, t_e: Ticks, t: Ticks) -> Result<Units, SupplyError> {
    let s = iface.units_per_tick;
    sbf_pattern_b_units(iface, t_e * s, t * s)
}

pub fn sbf(iface: &MCPRInterface, t_e: Ticks, t: Ticks) -> Units {
    let s = iface.units_per_tick;
    sbf_units(iface, t_e * s, t * s)
}
