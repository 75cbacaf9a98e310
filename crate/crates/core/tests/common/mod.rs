//! Brute-force oracles shared by the integration tests.
//!
//! Nothing here calls the closed-form demand or supply code: task demand is
//! the best sporadic release sequence under per-job trace rules, and supply
//! is minimized over every period offset and budget placement.

#![allow(dead_code)]

use mcs_kit::model::{Component, MCTask, SystemSpec, Ticks};
use rand::Rng;

// ── traces ──────────────────────────────────────────────────────────────────

/// Largest execution a job released at `r` can contribute to `[0, t)` when
/// its task switches (HC) or is dropped (LC) at `s`.
///
/// A job counts only if its deadline falls inside the interval. A HC job
/// released before the switch either finishes in LC mode (by `s`, at most
/// `C^L`, virtual deadline) or is still running at `s` and becomes a HC job
/// (needs `C^H`, real deadline); the latter is only legal when its virtual
/// deadline has not passed at `s`.
pub fn job_contribution(task: &MCTask, t: Ticks, s: Ticks, r: Ticks) -> Ticks {
    if task.is_hc() {
        let hi = if r + task.deadline <= t { task.wcet_hi } else { 0 };
        if r >= s {
            return hi;
        }
        let lo = if r + task.virtual_deadline <= t {
            (s - r).min(task.wcet_lo)
        } else {
            0
        };
        let carry = if r + task.virtual_deadline >= s { hi } else { 0 };
        lo.max(carry)
    } else if r >= s || r + task.deadline > t {
        0
    } else {
        (s - r).min(task.wcet_lo)
    }
}

/// Worst demand over every sporadic release sequence in `[0, t)`.
pub fn task_oracle(task: &MCTask, t: Ticks, s: Ticks) -> Ticks {
    if t <= 0 {
        return 0;
    }
    let n = t as usize;
    let p = task.period as usize;
    // best[r]: most demand from jobs released at or after r
    let mut best = vec![0 as Ticks; n + p + 1];
    for r in (0..n).rev() {
        let take = job_contribution(task, t, s, r as Ticks) + best[r + p];
        best[r] = best[r + 1].max(take);
    }
    best[0]
}

/// Demand of one periodic release pattern starting at `first`.
pub fn replay(task: &MCTask, t: Ticks, s: Ticks, first: Ticks) -> Ticks {
    let mut r = first;
    let mut total = 0;
    while r < t {
        if r >= 0 {
            total += job_contribution(task, t, s, r);
        }
        r += task.period;
    }
    total
}

/// `table[t][s]` of [`task_oracle`] for `0 <= s <= t <= h`.
pub fn oracle_table(task: &MCTask, h: Ticks) -> Vec<Vec<Ticks>> {
    (0..=h)
        .map(|t| (0..=t).map(|s| task_oracle(task, t, s)).collect())
        .collect()
}

/// Per-component oracle tables, indexed like `comp.tasks`.
pub struct CompTables<'a> {
    pub comp: &'a Component,
    pub tables: Vec<Vec<Vec<Ticks>>>,
}

impl<'a> CompTables<'a> {
    pub fn new(comp: &'a Component, h: Ticks) -> Self {
        CompTables {
            comp,
            tables: comp.tasks.iter().map(|k| oracle_table(k, h)).collect(),
        }
    }

    /// For fixed `(t, t_E)`, the worst trace demand for every `t_I` in
    /// `0..=t_E`: at most TL HC tasks switch anywhere in `[t_I, t_E]`, the rest
    /// at `t_E`; the component's LC tasks are dropped at `t_I`.
    pub fn by_t_i(&self, t: Ticks, t_e: Ticks) -> Vec<Ticks> {
        let tu = t as usize;
        let tasks = &self.comp.tasks;
        let hc: Vec<usize> = (0..tasks.len()).filter(|&k| tasks[k].is_hc()).collect();
        let tl = self.comp.tolerance_limit as usize;
        let mut running: Vec<Ticks> = hc.iter().map(|&k| self.tables[k][tu][t_e as usize]).collect();
        let mut out = vec![0; t_e as usize + 1];
        for t_i in (0..=t_e).rev() {
            for (j, &k) in hc.iter().enumerate() {
                running[j] = running[j].max(self.tables[k][tu][t_i as usize]);
            }
            let mut best = Ticks::MIN;
            for mask in 0u32..(1 << hc.len()) {
                if mask.count_ones() as usize > tl {
                    continue;
                }
                let v: Ticks = hc
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| {
                        if mask >> j & 1 == 1 {
                            running[j]
                        } else {
                            self.tables[k][tu][t_e as usize]
                        }
                    })
                    .sum();
                best = best.max(v);
            }
            let lc: Ticks = (0..tasks.len())
                .filter(|&k| !tasks[k].is_hc())
                .map(|k| self.tables[k][tu][t_i as usize])
                .sum();
            out[t_i as usize] = best + lc;
        }
        out
    }
}

/// Worst total demand at `(t, t_E)`, maximized over every component's own
/// `t_I <= t_E`. LC-only components drop at `t_E`.
pub fn system_oracle(tables: &[CompTables], t: Ticks, t_e: Ticks) -> Ticks {
    tables
        .iter()
        .map(|c| {
            if c.comp.is_hc() {
                *c.by_t_i(t, t_e).iter().max().unwrap()
            } else {
                c.by_t_i(t, t_e)[t_e as usize]
            }
        })
        .sum()
}

/// Smallest `(t, t_E)` in `1..=h` whose worst demand exceeds `t`.
pub fn system_witness(spec: &SystemSpec, h: Ticks) -> Option<(Ticks, Ticks)> {
    let tables: Vec<CompTables> = spec.components.iter().map(|c| CompTables::new(c, h)).collect();
    for t in 1..=h {
        for t_e in 0..=t {
            if system_oracle(&tables, t, t_e) > t {
                return Some((t, t_e));
            }
        }
    }
    None
}

// ── reference tests ─────────────────────────────────────────────────────────

/// All LC work dropped at the first switch, every HC task switching then.
pub fn classical_reference(spec: &SystemSpec, h: Option<Ticks>) -> bool {
    let Some(h) = h else { return false };
    let tables: Vec<Vec<Vec<Ticks>>> = spec.tasks().map(|k| oracle_table(k, h)).collect();
    (1..=h).all(|t| {
        (0..=t).all(|s| {
            let d: Ticks = tables.iter().map(|tb| tb[t as usize][s as usize]).sum();
            d <= t
        })
    })
}

/// Every HC task budgeted for its own worst switch instant; LC tasks of a HC
/// component drop at its first switch, LC components never drop.
pub fn reservation_reference(spec: &SystemSpec, h: Option<Ticks>) -> bool {
    let Some(h) = h else { return false };
    let comps: Vec<(&Component, Vec<Vec<Vec<Ticks>>>)> = spec
        .components
        .iter()
        .map(|c| (c, c.tasks.iter().map(|k| oracle_table(k, h)).collect()))
        .collect();
    (1..=h).all(|t| {
        let tu = t as usize;
        let total: Ticks = comps
            .iter()
            .map(|(c, tb)| {
                if !c.is_hc() {
                    return tb.iter().map(|x| x[tu][tu]).sum::<Ticks>();
                }
                // worst first-switch instant; each HC task then picks its own
                // worst instant after it
                let mut best = Ticks::MIN;
                let mut suffix_max: Vec<Ticks> = vec![Ticks::MIN; c.tasks.len()];
                for t_i in (0..=t).rev() {
                    let mut v = 0;
                    for (k, task) in c.tasks.iter().enumerate() {
                        let here = tb[k][tu][t_i as usize];
                        if task.is_hc() {
                            suffix_max[k] = suffix_max[k].max(here);
                            v += suffix_max[k];
                        } else {
                            v += here;
                        }
                    }
                    best = best.max(v);
                }
                best
            })
            .sum();
        total <= t
    })
}

// ── supply ──────────────────────────────────────────────────────────────────

/// Least part of a budget `b`, placed anywhere in `[s, e)`, that must land in
/// `[0, t)`.
fn placed_min(b: i64, s: i64, e: i64, t: i64) -> i64 {
    if b <= 0 || s >= t || e <= 0 {
        return 0;
    }
    let before = (e.min(0) - s).max(0);
    let after = (e - s.max(t)).max(0);
    (b - before - after).max(0)
}

/// Supply in `[0, t)` minimized over budget placements, for interface
/// periods starting at `offset - P + kP` (all values in units).
///
/// Periods ending by `t_E` deliver `C^L`, periods starting at or after `t_E`
/// deliver `C^H`. The period containing `t_E` delivers some `x <= C^L`
/// before it; if `x < C^L` it then owes `C^H - x` before the period ends.
/// With `t_E = t` no switch happens and every period delivers `C^L`.
pub fn supply_at_offset(p: i64, cl: i64, ch: i64, t_e: i64, t: i64, offset: i64) -> i64 {
    let mut total = 0;
    let mut s = offset - p;
    while s < t {
        let e = s + p;
        total += if t_e == t || e <= t_e {
            placed_min(cl, s, e, t)
        } else if s >= t_e {
            placed_min(ch, s, e, t)
        } else {
            (0..=cl.min(t_e - s))
                .filter_map(|x| {
                    if x == cl {
                        Some(placed_min(cl, s, t_e, t))
                    } else if ch - x <= e - t_e {
                        Some(placed_min(x, s, t_e, t) + placed_min(ch - x, t_e, e, t))
                    } else {
                        None
                    }
                })
                .min()
                .unwrap()
        };
        s += p;
    }
    total
}

pub fn supply_oracle(p: i64, cl: i64, ch: i64, t_e: i64, t: i64) -> i64 {
    (0..p).map(|o| supply_at_offset(p, cl, ch, t_e, t, o)).min().unwrap()
}

// ── random specs ────────────────────────────────────────────────────────────

/// A task with period `2..=max_t`. HC tasks get `C^L < C^H <= D` and
/// `C^L <= D^L <= D`.
pub fn random_task<R: Rng>(rng: &mut R, id: String, hc: bool, max_t: Ticks) -> MCTask {
    let period = rng.gen_range(2..=max_t);
    let d = rng.gen_range(2..=period);
    if hc {
        let ch = rng.gen_range(2..=d);
        let cl = rng.gen_range(1..ch);
        let dl = rng.gen_range(cl..=d);
        MCTask::hc(id, period, cl, ch, d, dl)
    } else {
        let c = rng.gen_range(1..=d);
        MCTask::lc(id, period, c, d)
    }
}

/// One HC component (with a random tolerance limit) and one LC component,
/// `1..=max_tasks` tasks in total. LC tasks land in either component.
pub fn random_spec<R: Rng>(rng: &mut R, max_tasks: usize, max_t: Ticks) -> SystemSpec {
    let n = rng.gen_range(1..=max_tasks);
    let mut hc_comp = Vec::new();
    let mut lc_comp = Vec::new();
    for i in 0..n {
        let hc = rng.gen_bool(0.5);
        let task = random_task(rng, format!("t{i}"), hc, max_t);
        if hc || rng.gen_bool(0.3) {
            hc_comp.push(task);
        } else {
            lc_comp.push(task);
        }
    }
    let mut comps = Vec::new();
    let h = hc_comp.iter().filter(|t| t.is_hc()).count() as u32;
    if !hc_comp.is_empty() {
        comps.push(Component::new("h", rng.gen_range(0..=h), hc_comp));
    }
    if !lc_comp.is_empty() {
        comps.push(Component::new("l", 0, lc_comp));
    }
    SystemSpec::flat(comps)
}

/// Prints one acceptance line and returns whether it passed. Written to the
/// raw stderr handle so it shows up even when test output is captured.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    use std::io::Write;
    let line = format!(
        "criterion {id} [{}] {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    pass
}
