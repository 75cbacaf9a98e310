//! Virtual-deadline assignment.
//!
//! Every HC task starts at `D^L = D`. While the flat test fails, the failure
//! witness is attacked by shrinking one task's `D^L` at a time: for each HC
//! task the smallest decrement that lowers the demand at the witness is
//! found, and the task with the largest reduction wins (ties: smaller
//! decrement, then task id). Once the witness clears the full test runs
//! again. `D^L` only ever decreases, so the search terminates.

use super::flat::{demand_at, flat_test_with, FlatOptions};
use super::AnalysisError;
use crate::model::{SystemSpec, Ticks};

pub fn tighten_deadlines(spec: &SystemSpec) -> Result<SystemSpec, AnalysisError> {
    tighten_with(spec, &FlatOptions::default())
}

pub fn tighten_with(spec: &SystemSpec, opts: &FlatOptions) -> Result<SystemSpec, AnalysisError> {
    let mut cur = spec.clone();
    for comp in &mut cur.components {
        for task in &mut comp.tasks {
            task.virtual_deadline = task.deadline;
        }
    }
    loop {
        let verdict = flat_test_with(&cur, opts)?;
        if verdict.schedulable {
            return Ok(cur);
        }
        let Some(w) = verdict.witness else {
            return Err(AnalysisError::NoFeasibleTightening);
        };
        let mut demand = demand_at(&cur, opts.use_optimized, w.t, w.t_e);
        while demand > w.t {
            let (c, k, dec, reduced) = best_step(&mut cur, opts.use_optimized, w.t, w.t_e, demand)
                .ok_or(AnalysisError::NoFeasibleTightening)?;
            cur.components[c].tasks[k].virtual_deadline -= dec;
            demand = reduced;
        }
    }
}

/// `(component, task, decrement, new demand)` of the best single shrink.
fn best_step(
    spec: &mut SystemSpec,
    optimized: bool,
    t: Ticks,
    t_e: Ticks,
    demand: Ticks,
) -> Option<(usize, usize, Ticks, Ticks)> {
    let mut best: Option<(usize, usize, Ticks, Ticks)> = None;
    for c in 0..spec.components.len() {
        for k in 0..spec.components[c].tasks.len() {
            let task = &spec.components[c].tasks[k];
            if !task.is_hc() || task.virtual_deadline <= task.wcet_lo {
                continue;
            }
            let orig = task.virtual_deadline;
            let room = orig - task.wcet_lo;
            let mut found = None;
            for dec in 1..=room {
                spec.components[c].tasks[k].virtual_deadline = orig - dec;
                let d = demand_at(spec, optimized, t, t_e);
                if d < demand {
                    found = Some((dec, d));
                    break;
                }
            }
            spec.components[c].tasks[k].virtual_deadline = orig;
            let Some((dec, d)) = found else { continue };
            let better = match best {
                None => true,
                Some((bc, bk, bdec, bd)) => {
                    let id = &spec.components[c].tasks[k].id;
                    let bid = &spec.components[bc].tasks[bk].id;
                    (d, dec, id) < (bd, bdec, bid)
                }
            };
            if better {
                best = Some((c, k, dec, d));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::flat::flat_test;
    use crate::model::{Component, MCTask};

    #[test]
    fn all_lc_is_identity() {
        let spec = SystemSpec::flat(vec![Component::new("l", 0, vec![MCTask::lc("a", 10, 3, 10)])]);
        assert_eq!(tighten_deadlines(&spec).unwrap(), spec);
    }

    #[test]
    fn ample_slack_keeps_deadline() {
        let spec = SystemSpec::flat(vec![Component::new("h", 0, vec![MCTask::hc("a", 10, 1, 2, 10, 10)])]);
        let out = tighten_deadlines(&spec).unwrap();
        assert_eq!(out.components[0].tasks[0].virtual_deadline, 10);
    }

    #[test]
    fn tightening_rescues_a_mixed_pair() {
        let spec = SystemSpec::flat(vec![
            Component::new("h", 0, vec![MCTask::hc("a", 10, 2, 7, 10, 10)]),
            Component::new("l", 0, vec![MCTask::lc("b", 10, 4, 10)]),
        ]);
        assert!(!flat_test(&spec, false).unwrap().schedulable);
        let out = tighten_deadlines(&spec).unwrap();
        let vd = out.components[0].tasks[0].virtual_deadline;
        assert!(vd < 10);
        assert!(flat_test(&out, false).unwrap().schedulable);
        // some assignment in the search family works, and this one is it
        let feasible: Vec<Ticks> = (2..=10)
            .filter(|&v| {
                let mut s = spec.clone();
                s.components[0].tasks[0].virtual_deadline = v;
                flat_test(&s, false).unwrap().schedulable
            })
            .collect();
        assert!(feasible.contains(&vd));
    }

    #[test]
    fn hopeless_spec_reports_infeasible() {
        let spec = SystemSpec::flat(vec![
            Component::new("h", 0, vec![MCTask::hc("a", 10, 5, 9, 10, 10)]),
            Component::new("l", 0, vec![MCTask::lc("b", 10, 5, 10)]),
        ]);
        assert_eq!(tighten_deadlines(&spec), Err(AnalysisError::NoFeasibleTightening));
    }
}
