//! Demand bound functions at job, task and component granularity.
//!
//! All functions measure demand in the interval `[0, t)`. A HC task switches
//! to HC mode at `t_i`; a LC task is dropped at `t_i`. At component level
//! `t_E` is the external and `t_I` the internal mode-switch instant.
//!
//! The public functions check their preconditions. The analysis loops use the
//! `pub(crate)` unchecked variants.

use thiserror::Error;

use crate::model::{Component, MCTask, Ticks};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DemandError {
    #[error("task {0} is not a HC task")]
    NotHc(String),
    #[error("task {0} is not a LC task")]
    NotLc(String),
    #[error("release {r} is not the last release at or before t_i = {t_i} (period {period})")]
    ReleaseOutOfRange {
        r: Ticks,
        t_i: Ticks,
        period: Ticks,
    },
    #[error("instants must satisfy 0 <= t_I <= t_i <= t_E <= t (got t_I={t_i_min}, t_i={t_i}, t_E={t_e}, t={t})")]
    InstantsOutOfOrder {
        t: Ticks,
        t_e: Ticks,
        t_i: Ticks,
        t_i_min: Ticks,
    },
    #[error("HC task {0} must be split at t_i = t_E")]
    SplitInstant(String),
}

/// Interval length with the external and internal mode-switch instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeSwitchInstants {
    pub t: Ticks,
    pub t_e: Ticks,
    pub t_i: Ticks,
}

impl ModeSwitchInstants {
    pub fn new(t: Ticks, t_e: Ticks, t_i: Ticks) -> Result<Self, DemandError> {
        if 0 <= t_i && t_i <= t_e && t_e <= t {
            Ok(ModeSwitchInstants { t, t_e, t_i })
        } else {
            Err(DemandError::InstantsOutOfOrder {
                t,
                t_e,
                t_i,
                t_i_min: t_i,
            })
        }
    }
}

/// A task demand split at `t_E`: `dl` is demand in `[0, t_E)`, `dh` in
/// `[t_E, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DemandSplit {
    pub dl: Ticks,
    pub dh: Ticks,
}

impl DemandSplit {
    pub fn total(&self) -> Ticks {
        self.dl + self.dh
    }
}

/// Which of the four task-level cases applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// LC task.
    A,
    /// HC, `t - t_i < D - D^L`.
    B,
    /// HC, `t - t_i >= D`.
    C,
    /// HC, `D - D^L <= t - t_i < D`.
    D,
}

pub fn condition(task: &MCTask, t: Ticks, t_i: Ticks) -> Condition {
    if !task.is_hc() {
        return Condition::A;
    }
    let gap = t - t_i;
    if gap < task.deadline - task.virtual_deadline {
        Condition::B
    } else if gap >= task.deadline {
        Condition::C
    } else {
        Condition::D
    }
}

fn pos(x: Ticks) -> Ticks {
    x.max(0)
}

fn check_release(task: &MCTask, t_i: Ticks, r: Ticks) -> Result<(), DemandError> {
    if r <= t_i && t_i < r + task.period {
        Ok(())
    } else {
        Err(DemandError::ReleaseOutOfRange {
            r,
            t_i,
            period: task.period,
        })
    }
}

fn check_interval(t: Ticks, t_i: Ticks) -> Result<(), DemandError> {
    if 0 <= t_i && t_i <= t {
        Ok(())
    } else {
        Err(DemandError::InstantsOutOfOrder {
            t,
            t_e: t,
            t_i,
            t_i_min: t_i,
        })
    }
}

// ── job level ───────────────────────────────────────────────────────────────

pub(crate) fn job_a(task: &MCTask, t: Ticks, t_i: Ticks, r: Ticks) -> Ticks {
    let vd = r + task.virtual_deadline;
    let rd = r + task.deadline;
    if vd < t_i {
        task.wcet_lo
    } else if rd <= t {
        task.wcet_hi
    } else if vd <= t {
        (t_i - r).min(task.wcet_lo)
    } else {
        0
    }
}

pub(crate) fn job_b(task: &MCTask, t: Ticks, t_i: Ticks, r: Ticks) -> Ticks {
    if r + task.virtual_deadline <= t {
        (t_i - r).min(task.wcet_lo)
    } else {
        0
    }
}

/// Demand of the last job a HC task releases at or before its switch instant.
pub fn dbf_job_a(task: &MCTask, t: Ticks, t_i: Ticks, r: Ticks) -> Result<Ticks, DemandError> {
    if !task.is_hc() {
        return Err(DemandError::NotHc(task.id.clone()));
    }
    // a job whose virtual deadline lies past t contributes nothing wherever it
    // was released
    if r >= 0 && r + task.virtual_deadline > t {
        return Ok(0);
    }
    check_release(task, t_i, r)?;
    Ok(job_a(task, t, t_i, r))
}

/// Demand of the last job a LC task releases before it is dropped.
pub fn dbf_job_b(task: &MCTask, t: Ticks, t_i: Ticks, r: Ticks) -> Result<Ticks, DemandError> {
    if task.is_hc() {
        return Err(DemandError::NotLc(task.id.clone()));
    }
    if r >= 0 && r + task.virtual_deadline > t {
        return Ok(0);
    }
    check_release(task, t_i, r)?;
    Ok(job_b(task, t, t_i, r))
}

// ── task level ──────────────────────────────────────────────────────────────

/// First release of the pattern that puts a job deadline exactly at `t`,
/// normalized into `[0, T)`, together with the index of that job.
fn aligned_pattern(task: &MCTask, t: Ticks) -> (Ticks, Ticks) {
    let m = (t - task.deadline).div_euclid(task.period);
    let s = t - task.deadline - m * task.period;
    (s, m)
}

/// Synchronous pattern: first release at 0.
fn demand_sync(task: &MCTask, t: Ticks, t_i: Ticks) -> Ticks {
    let k = t_i.div_euclid(task.period);
    let r = k * task.period;
    if !task.is_hc() {
        return k * task.wcet_lo + job_b(task, t, t_i, r);
    }
    let at = k * task.wcet_lo + job_a(task, t, t_i, r);
    // switch exactly at a release: the previous job may still be carried over
    if k > 0 && r == t_i {
        at.max((k - 1) * task.wcet_lo + job_a(task, t, t_i, r - task.period))
    } else {
        at
    }
}

/// Pieces of the aligned pattern: `(b, r(J_A), job_a, a)`, or `None` when the
/// switch happens before the first release of the pattern.
fn aligned_parts(task: &MCTask, t: Ticks, t_i: Ticks) -> (Ticks, Option<(Ticks, Ticks, Ticks, Ticks)>) {
    let (s, m) = aligned_pattern(task, t);
    if t_i < s {
        return (m, None);
    }
    let b = (t_i - s).div_euclid(task.period);
    let r_a = s + b * task.period;
    let a = (m - b).max(0);
    (m, Some((b, r_a, job_a(task, t, t_i, r_a), a)))
}

/// Aligned-pattern demand with the index and release of the job taken as
/// carried over. With the switch exactly at a release, the job before it is
/// a candidate too.
fn aligned_best(task: &MCTask, t: Ticks, t_i: Ticks) -> (Ticks, Option<(Ticks, Ticks)>) {
    match aligned_parts(task, t, t_i) {
        // every job of the pattern is released after the switch
        (m, None) => ((m + 1).max(0) * task.wcet_hi, None),
        (m, Some((b, r_a, ja, a))) => {
            let here = b * task.wcet_lo + ja + a * task.wcet_hi;
            if b > 0 && r_a == t_i {
                let prev = r_a - task.period;
                let alt = (b - 1) * task.wcet_lo
                    + job_a(task, t, t_i, prev)
                    + (m - b + 1).max(0) * task.wcet_hi;
                if alt > here {
                    return (alt, Some((b - 1, prev)));
                }
            }
            (here, Some((b, r_a)))
        }
    }
}

fn demand_aligned(task: &MCTask, t: Ticks, t_i: Ticks) -> Ticks {
    aligned_best(task, t, t_i).0
}

pub(crate) fn task_demand(task: &MCTask, t: Ticks, t_i: Ticks) -> Ticks {
    match condition(task, t, t_i) {
        Condition::A | Condition::B => demand_sync(task, t, t_i),
        Condition::C => demand_aligned(task, t, t_i),
        Condition::D => demand_sync(task, t, t_i).max(demand_aligned(task, t, t_i)),
    }
}

/// `dbf(τ, t, t_i)`.
pub fn dbf_task(task: &MCTask, t: Ticks, t_i: Ticks) -> Result<Ticks, DemandError> {
    check_interval(t, t_i)?;
    Ok(task_demand(task, t, t_i))
}

/// The aligned-pattern split, used by conditions c and d.
fn split_aligned(task: &MCTask, t: Ticks, t_e: Ticks) -> DemandSplit {
    match aligned_best(task, t, t_e) {
        (total, None) => DemandSplit { dl: 0, dh: total },
        (total, Some((b, r_a))) => {
            let late = pos(t_e - r_a - (task.virtual_deadline - task.wcet_lo)).min(task.wcet_lo);
            let dl = late + b * task.wcet_lo;
            DemandSplit { dl, dh: total - dl }
        }
    }
}

pub(crate) fn task_split(task: &MCTask, t: Ticks, t_i: Ticks) -> DemandSplit {
    match condition(task, t, t_i) {
        Condition::A | Condition::B => DemandSplit {
            dl: demand_sync(task, t, t_i),
            dh: 0,
        },
        Condition::C => split_aligned(task, t, t_i),
        Condition::D => {
            let dh = split_aligned(task, t, t_i).dh;
            let total = demand_sync(task, t, t_i).max(demand_aligned(task, t, t_i));
            DemandSplit { dl: total - dh, dh }
        }
    }
}

/// Splits `dbf(τ, t, t_i)` at `t_E`, moving as much demand as possible after
/// `t_E`. HC tasks are split at `t_i = t_E`; LC tasks put everything before
/// `t_E`.
pub fn dbf_task_split(
    task: &MCTask,
    t: Ticks,
    t_i: Ticks,
    t_e: Ticks,
) -> Result<DemandSplit, DemandError> {
    if !(0 <= t_i && t_i <= t_e && t_e <= t) {
        return Err(DemandError::InstantsOutOfOrder {
            t,
            t_e,
            t_i,
            t_i_min: t_i,
        });
    }
    if task.is_hc() && t_i != t_e {
        return Err(DemandError::SplitInstant(task.id.clone()));
    }
    Ok(task_split(task, t, t_i))
}

// ── component level ─────────────────────────────────────────────────────────

/// Sum of the `tl` largest values; `values` is reordered.
pub(crate) fn top_sum(values: &mut [Ticks], tl: usize) -> Ticks {
    if tl == 0 || values.is_empty() {
        return 0;
    }
    if tl >= values.len() {
        return values.iter().sum();
    }
    values.sort_unstable_by(|a, b| b.cmp(a));
    values[..tl].iter().sum()
}

/// The `Δ_i` values of a component's HC tasks, ordered by descending `Δ_i`
/// and then ascending task id.
pub fn ranked_deltas<'a>(comp: &'a Component, msi: ModeSwitchInstants) -> Vec<(&'a str, Ticks)> {
    let mut d: Vec<(&str, Ticks)> = comp
        .hc_tasks()
        .map(|task| {
            let delta =
                task_demand(task, msi.t, msi.t_i) - task_demand(task, msi.t, msi.t_e);
            (task.id.as_str(), delta.max(0))
        })
        .collect();
    d.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    d
}

pub(crate) fn component_demand(comp: &Component, msi: ModeSwitchInstants) -> Ticks {
    let mut base = 0;
    let mut deltas = Vec::with_capacity(comp.tasks.len());
    for task in &comp.tasks {
        if task.is_hc() {
            let at_e = task_demand(task, msi.t, msi.t_e);
            base += at_e;
            deltas.push((task_demand(task, msi.t, msi.t_i) - at_e).max(0));
        } else {
            base += task_demand(task, msi.t, msi.t_i);
        }
    }
    base + top_sum(&mut deltas, comp.tolerance_limit as usize)
}

pub(crate) fn component_demand_optimized(comp: &Component, msi: ModeSwitchInstants) -> Ticks {
    if msi.t_e >= msi.t {
        return component_demand(comp, msi);
    }
    let mut dl = 0;
    let mut dh = 0;
    let mut deltas = Vec::with_capacity(comp.tasks.len());
    for task in &comp.tasks {
        if task.is_hc() {
            let s = task_split(task, msi.t, msi.t_e);
            dl += s.dl;
            dh += s.dh;
            deltas.push((task_demand(task, msi.t, msi.t_i) - s.total()).max(0));
        } else {
            dl += task_split(task, msi.t, msi.t_i).dl;
        }
    }
    dl.min(msi.t_e) + dh + top_sum(&mut deltas, comp.tolerance_limit as usize)
}

/// `dbf(C, t, t_E, t_I)`: HC tasks switch at `t_E` except the `TL` tasks that
/// gain most from switching at `t_I`; LC tasks are dropped at `t_I`.
pub fn dbf_component(comp: &Component, msi: ModeSwitchInstants) -> Result<Ticks, DemandError> {
    ModeSwitchInstants::new(msi.t, msi.t_e, msi.t_i)?;
    Ok(component_demand(comp, msi))
}

/// Component demand with the demand before `t_E` capped at `t_E`.
pub fn dbf_component_optimized(
    comp: &Component,
    msi: ModeSwitchInstants,
) -> Result<Ticks, DemandError> {
    ModeSwitchInstants::new(msi.t, msi.t_e, msi.t_i)?;
    Ok(component_demand_optimized(comp, msi))
}
