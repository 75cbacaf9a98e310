//! The flat EDF test: for every interval length `t`, external switch `t_E`
//! and per-component internal switch `t_I`, total demand must not exceed `t`.
//!
//! HC components only couple through the shared `t_E`, so for fixed
//! `(t, t_E)` each component's worst `t_I` is found on its own. LC components
//! are dropped at `t_E`. For each `t`, ranges of `t_E` are bisected and
//! pruned with a cheap upper bound; it relies on a HC task's demand over a
//! range of switch instants peaking at one of the range's ends.

use rayon::prelude::*;
use serde::Serialize;

use super::horizon::{analysis_horizon, t_max};
use super::AnalysisError;
use crate::demand::{component_demand, component_demand_optimized, task_demand, top_sum, ModeSwitchInstants};
use crate::model::{Component, SystemSpec, Ticks};

pub const DEFAULT_MAX_HC_COMPONENTS: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct FlatOptions {
    pub use_optimized: bool,
    pub max_hc_components: usize,
}

impl Default for FlatOptions {
    fn default() -> Self {
        FlatOptions {
            use_optimized: false,
            max_hc_components: DEFAULT_MAX_HC_COMPONENTS,
        }
    }
}

/// A point where demand exceeds supply. `t_i` has one entry per component in
/// spec order; LC components report `t_E`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub t: Ticks,
    pub t_e: Ticks,
    pub t_i: Vec<Ticks>,
    pub demand: Ticks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatVerdict {
    pub schedulable: bool,
    pub witness: Option<Witness>,
    pub t_max_used: Ticks,
    pub horizon_finite: bool,
}

pub fn flat_test(spec: &SystemSpec, use_optimized: bool) -> Result<FlatVerdict, AnalysisError> {
    flat_test_with(
        spec,
        &FlatOptions {
            use_optimized,
            ..FlatOptions::default()
        },
    )
}

pub fn flat_test_with(spec: &SystemSpec, opts: &FlatOptions) -> Result<FlatVerdict, AnalysisError> {
    let hc = spec.hc_components().count();
    if hc > opts.max_hc_components {
        return Err(AnalysisError::TooManyHcComponents {
            count: hc,
            limit: opts.max_hc_components,
        });
    }
    // The tolerance-aware horizon never exceeds t_MAX and stays finite when
    // only the per-component closed form diverges.
    let Some(horizon) = analysis_horizon(spec) else {
        return Ok(FlatVerdict {
            schedulable: false,
            witness: None,
            t_max_used: 0,
            horizon_finite: false,
        });
    };
    let mut v = scan(spec, opts.use_optimized, 1, horizon);
    v.horizon_finite = t_max(spec).is_some();
    Ok(v)
}

/// Checks `t ∈ [from, to]` only.
pub(crate) fn scan(spec: &SystemSpec, optimized: bool, from: Ticks, to: Ticks) -> FlatVerdict {
    let witness = (from..=to)
        .into_par_iter()
        .find_map_first(|t| check_length(spec, optimized, t));
    FlatVerdict {
        schedulable: witness.is_none(),
        witness,
        t_max_used: to,
        horizon_finite: true,
    }
}

fn check_length(spec: &SystemSpec, optimized: bool, t: Ticks) -> Option<Witness> {
    search_range(spec, optimized, t, 0, t)
}

/// Bisects `t_E ∈ [a, b]`, pruning ranges whose demand bound fits in `t`.
/// Left halves go first, so the smallest violating `t_E` is found.
fn search_range(spec: &SystemSpec, optimized: bool, t: Ticks, a: Ticks, b: Ticks) -> Option<Witness> {
    if range_bound(spec, t, a, b) <= t {
        return None;
    }
    if a == b {
        return check_point(spec, optimized, t, a);
    }
    let mid = a + (b - a) / 2;
    search_range(spec, optimized, t, a, mid).or_else(|| search_range(spec, optimized, t, mid + 1, b))
}

/// Upper bound of total demand over all `t_E ∈ [a, b]` and `t_I ≤ t_E`.
///
/// LC demand grows with the drop instant, so `b` bounds it. A HC task's
/// demand over a range of switch instants peaks at an end of the range;
/// a tolerated task may also switch at 0.
fn range_bound(spec: &SystemSpec, t: Ticks, a: Ticks, b: Ticks) -> Ticks {
    let mut gains = Vec::new();
    spec.components
        .iter()
        .map(|comp| {
            gains.clear();
            let mut base = 0;
            for k in &comp.tasks {
                if k.is_hc() {
                    let top = task_demand(k, t, a).max(task_demand(k, t, b));
                    base += top;
                    if comp.tolerance_limit > 0 {
                        gains.push((task_demand(k, t, 0) - top).max(0));
                    }
                } else {
                    base += task_demand(k, t, b);
                }
            }
            base + top_sum(&mut gains, comp.tolerance_limit as usize)
        })
        .sum()
}

/// Upper bound of a component's demand over all `t_I ≤ t_E`.
fn component_bound(comp: &Component, t: Ticks, t_e: Ticks, gains: &mut Vec<Ticks>) -> Ticks {
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

fn component_at(comp: &Component, optimized: bool, t: Ticks, t_e: Ticks, t_i: Ticks) -> Ticks {
    let msi = ModeSwitchInstants { t, t_e, t_i };
    if optimized {
        component_demand_optimized(comp, msi)
    } else {
        component_demand(comp, msi)
    }
}

/// Worst `t_I` for one component; the smallest maximizer wins.
pub(crate) fn component_worst(
    comp: &Component,
    optimized: bool,
    t: Ticks,
    t_e: Ticks,
    bound: Ticks,
) -> (Ticks, Ticks) {
    // dropping LC tasks later only adds demand, so without tolerated
    // overruns the switch is best left at t_E
    if !comp.is_hc() || comp.tolerance_limit == 0 {
        return (component_at(comp, optimized, t, t_e, t_e), t_e);
    }
    let mut best = (Ticks::MIN, t_e);
    for x in 0..=t_e {
        let v = component_at(comp, optimized, t, t_e, x);
        if v > best.0 {
            best = (v, x);
            if v >= bound {
                break;
            }
        }
    }
    best
}

fn check_point(spec: &SystemSpec, optimized: bool, t: Ticks, t_e: Ticks) -> Option<Witness> {
    let mut gains = Vec::new();
    let bounds: Vec<Ticks> = spec
        .components
        .iter()
        .map(|c| component_bound(c, t, t_e, &mut gains))
        .collect();
    if bounds.iter().sum::<Ticks>() <= t {
        return None;
    }
    let mut demand = 0;
    let mut t_i = Vec::with_capacity(bounds.len());
    for (c, &b) in spec.components.iter().zip(&bounds) {
        let (v, x) = component_worst(c, optimized, t, t_e, b);
        demand += v;
        t_i.push(x);
    }
    (demand > t).then_some(Witness { t, t_e, t_i, demand })
}

/// Total demand at a fixed point, maximized over each component's `t_I`.
pub(crate) fn demand_at(spec: &SystemSpec, optimized: bool, t: Ticks, t_e: Ticks) -> Ticks {
    let mut gains = Vec::new();
    spec.components
        .iter()
        .map(|c| {
            let b = component_bound(c, t, t_e, &mut gains);
            component_worst(c, optimized, t, t_e, b).0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MCTask;

    fn brute(spec: &SystemSpec, optimized: bool, horizon: Ticks) -> Option<(Ticks, Ticks)> {
        for t in 1..=horizon {
            for t_e in 0..=t {
                let total: Ticks = spec
                    .components
                    .iter()
                    .map(|c| {
                        if c.is_hc() {
                            (0..=t_e)
                                .map(|x| component_at(c, optimized, t, t_e, x))
                                .max()
                                .unwrap()
                        } else {
                            component_at(c, optimized, t, t_e, t_e)
                        }
                    })
                    .sum();
                if total > t {
                    return Some((t, t_e));
                }
            }
        }
        None
    }

    #[test]
    fn empty_spec_is_schedulable() {
        let v = flat_test(&SystemSpec::flat(vec![]), false).unwrap();
        assert!(v.schedulable && v.horizon_finite && v.witness.is_none());
    }

    #[test]
    fn single_task_with_tightening() {
        let untight = SystemSpec::flat(vec![Component::new(
            "c",
            0,
            vec![MCTask::hc("a", 10, 4, 5, 10, 10)],
        )]);
        assert!(flat_test(&untight, false).unwrap().schedulable);
        let heavy = SystemSpec::flat(vec![
            Component::new("h", 0, vec![MCTask::hc("a", 10, 4, 8, 10, 10)]),
            Component::new("l", 0, vec![MCTask::lc("b", 10, 5, 10)]),
        ]);
        let v = flat_test(&heavy, false).unwrap();
        assert!(!v.schedulable);
        let w = v.witness.unwrap();
        assert_eq!(w.t_i.len(), 2);
        assert!(w.demand > w.t);
    }

    #[test]
    fn infinite_t_max_falls_back_to_system_rate() {
        // per-component worst rates sum past 1, the system-wide rate does not
        let spec = SystemSpec::flat(vec![
            Component::new("h", 0, vec![MCTask::hc("a", 4, 1, 3, 4, 1)]),
            Component::new("l", 0, vec![MCTask::lc("b", 8, 3, 5)]),
        ]);
        assert_eq!(t_max(&spec), None);
        let v = flat_test(&spec, false).unwrap();
        assert!(v.schedulable && !v.horizon_finite);
        assert_eq!(Some(v.t_max_used), analysis_horizon(&spec));
    }

    #[test]
    fn infinite_horizon_is_unschedulable() {
        let spec = SystemSpec::flat(vec![Component::new(
            "c",
            0,
            vec![MCTask::hc("a", 4, 2, 4, 4, 4)],
        )]);
        let v = flat_test(&spec, false).unwrap();
        assert!(!v.schedulable && !v.horizon_finite);
    }

    #[test]
    fn hc_component_limit() {
        let comps = (0..3)
            .map(|i| Component::new(format!("c{i}"), 0, vec![MCTask::hc(format!("a{i}"), 50, 1, 2, 50, 50)]))
            .collect();
        let spec = SystemSpec::flat(comps);
        let opts = FlatOptions {
            use_optimized: false,
            max_hc_components: 2,
        };
        assert!(matches!(
            flat_test_with(&spec, &opts),
            Err(AnalysisError::TooManyHcComponents { count: 3, limit: 2 })
        ));
    }

    #[test]
    fn pruned_scan_matches_brute_force() {
        let mut n = 0;
        for seed in 0..300u64 {
            let spec = small_spec(seed);
            let Some(h) = analysis_horizon(&spec) else { continue };
            if h > 60 {
                continue;
            }
            for opt in [false, true] {
                let v = flat_test(&spec, opt).unwrap();
                let b = brute(&spec, opt, h);
                assert_eq!(v.schedulable, b.is_none(), "{spec:?}");
                if let (Some(w), Some((t, t_e))) = (&v.witness, b) {
                    assert_eq!((w.t, w.t_e), (t, t_e));
                }
            }
            n += 1;
        }
        assert!(n > 60, "only {n} specs checked");
    }

    /// Deterministic small specs from a seed (no RNG crate needed here).
    fn small_spec(seed: u64) -> SystemSpec {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = |m: i64| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) % m as u64) as i64
        };
        let mut hc = vec![];
        let mut lc = vec![];
        for i in 0..(1 + next(4)) {
            let period = 3 + next(6);
            if next(2) == 0 {
                let d = 2 + next(period - 1);
                let ch = 2 + next(d - 1);
                let cl = 1 + next(ch - 1);
                let vd = cl + next(d - cl + 1);
                hc.push(MCTask::hc(format!("h{i}"), period, cl, ch, d, vd));
            } else {
                let d = 1 + next(period);
                lc.push(MCTask::lc(format!("l{i}"), period, 1 + next(d), d));
            }
        }
        let mut comps = vec![];
        if !hc.is_empty() {
            let tl = next(hc.len() as i64 + 1) as u32;
            comps.push(Component::new("h", tl, hc));
        }
        if !lc.is_empty() {
            comps.push(Component::new("l", 0, lc));
        }
        SystemSpec::flat(comps)
    }
}
