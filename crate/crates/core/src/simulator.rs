//! Discrete-event EDF simulation of the runtime mode-switch semantics.
//!
//! * A HC job is flagged at release, with probability `hc_switch_probability`,
//!   to run past `C^L`. When a flagged job has consumed `C^L`, its task
//!   switches to HC mode and from then on uses real deadlines.
//! * The first switch inside a component is its internal mode switch (IMS);
//!   the component's LC tasks are dropped (or kept, per policy).
//! * When more than `TL` tasks of a component are in HC mode the component
//!   has an external mode switch (EMS): every LC job in the system is dropped
//!   and every HC task runs in HC mode.
//! * When the processor has no pending job, everything returns to LC mode.
//!
//! Each task draws from its own ChaCha8 stream (stream index = rank of the
//! task id), and every draw is made up front for the whole horizon. Two runs
//! that differ only in tolerance limits therefore see identical releases,
//! flags and execution times.
//!
//! At each instant events are handled in a fixed order: completion or switch
//! of the running job, deadline misses, reset, releases, dispatch. Jobs are
//! released in `[0, horizon)`; the run continues until each of them has
//! completed or reached its deadline.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{flat_test, AnalysisError};
use crate::model::{validate_system, CriticalityLevel, SystemSpec, Ticks, Violation};

pub const PRNG_NAME: &str = "chacha8-stream-per-task/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HcExecPolicy {
    /// A flagged job runs exactly `C^H`.
    #[default]
    FullHi,
    /// A flagged job runs a uniform integer amount in `C^L+1 ..= C^H`.
    UniformBetween,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReleasePolicy {
    /// Separation `T + U{0..=T/2}`, first release at 0.
    SporadicMinSeparation,
    #[default]
    StrictlyPeriodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DropPolicy {
    #[default]
    DropLcInComponent,
    KeepLcBestEffort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: Ticks,
    pub seed: u64,
    pub hc_switch_probability: f64,
    pub hc_exec_policy: HcExecPolicy,
    pub release_policy: ReleasePolicy,
    pub drop_policy_on_ims: DropPolicy,
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 10_000,
            seed: 0,
            hc_switch_probability: 0.0,
            hc_exec_policy: HcExecPolicy::default(),
            release_policy: ReleasePolicy::default(),
            drop_policy_on_ims: DropPolicy::default(),
            record_trace: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("switch probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("horizon must be positive")]
    Horizon,
    #[error("invalid spec: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("{0} mechanism is not schedulable for this spec")]
    Unschedulable(Mechanism),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MissKind {
    LC,
    HC,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlineMiss {
    pub task: String,
    pub release: Ticks,
    pub kind: MissKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModeEventKind {
    IMS,
    EMS,
    RESET,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeEvent {
    pub tick: Ticks,
    pub component: String,
    pub kind: ModeEventKind,
}

/// One line of the exported trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: Ticks,
    pub event: TraceKind,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Release,
    Dispatch,
    Complete,
    Switch,
    Drop,
    Miss,
    Ims,
    Ems,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub finished_lc: u64,
    pub max_lc: u64,
    pub pfj: f64,
    pub deadline_misses: Vec<DeadlineMiss>,
    pub mode_timeline: Vec<ModeEvent>,
    pub seed: u64,
    pub prng: String,
    pub horizon: Ticks,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceEvent>,
}

impl SimReport {
    pub fn hc_misses(&self) -> usize {
        self.deadline_misses.iter().filter(|m| m.kind == MissKind::HC).count()
    }

    /// LC misses that happened before the first EMS.
    pub fn lc_misses_before_ems(&self) -> usize {
        let first_ems = self
            .mode_timeline
            .iter()
            .find(|e| e.kind == ModeEventKind::EMS)
            .map(|e| e.tick)
            .unwrap_or(Ticks::MAX);
        // LC jobs still pending at an EMS are dropped, so a missed job
        // released before it also missed before it
        self.deadline_misses
            .iter()
            .filter(|m| m.kind == MissKind::LC && m.release < first_ems)
            .count()
    }

    /// Writes the trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.trace {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Pre-drawn behaviour of one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobDraw {
    pub release: Ticks,
    pub flagged: bool,
    pub requirement: Ticks,
}

#[derive(Debug, Clone)]
pub(crate) struct TaskInfo {
    pub id: String,
    pub comp: usize,
    pub hc: bool,
    pub wcet_lo: Ticks,
    pub deadline: Ticks,
    pub virtual_deadline: Ticks,
}

/// Flattens a spec into tasks ordered by id (the tie-break and stream order).
pub(crate) fn task_table(spec: &SystemSpec) -> Vec<TaskInfo> {
    let mut v: Vec<TaskInfo> = spec
        .components
        .iter()
        .enumerate()
        .flat_map(|(c, comp)| {
            comp.tasks.iter().map(move |t| TaskInfo {
                id: t.id.clone(),
                comp: c,
                hc: t.criticality == CriticalityLevel::HC,
                wcet_lo: t.wcet_lo,
                deadline: t.deadline,
                virtual_deadline: t.virtual_deadline,
            })
        })
        .collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

/// All job draws for every task, in task-id order.
pub fn draw_jobs(spec: &SystemSpec, cfg: &SimConfig) -> Vec<Vec<JobDraw>> {
    let mut ordered: Vec<_> = spec.tasks().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    ordered
        .iter()
        .enumerate()
        .map(|(idx, t)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(idx as u64);
            let mut jobs = Vec::new();
            let mut r = 0;
            while r < cfg.horizon {
                let (flagged, requirement) = if t.is_hc() {
                    let f = rng.gen_bool(cfg.hc_switch_probability);
                    let req = match (f, cfg.hc_exec_policy) {
                        (false, _) => t.wcet_lo,
                        (true, HcExecPolicy::FullHi) => t.wcet_hi,
                        (true, HcExecPolicy::UniformBetween) => rng.gen_range(t.wcet_lo + 1..=t.wcet_hi),
                    };
                    (f, req)
                } else {
                    (false, t.wcet_lo)
                };
                jobs.push(JobDraw {
                    release: r,
                    flagged,
                    requirement,
                });
                r += t.period;
                if cfg.release_policy == ReleasePolicy::SporadicMinSeparation {
                    r += rng.gen_range(0..=t.period / 2);
                }
            }
            jobs
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Job {
    task: usize,
    release: Ticks,
    requirement: Ticks,
    executed: Ticks,
    flagged: bool,
}

struct Sim<'a> {
    spec: &'a SystemSpec,
    cfg: &'a SimConfig,
    tasks: Vec<TaskInfo>,
    draws: Vec<Vec<JobDraw>>,
    next_draw: Vec<usize>,
    pending: Vec<Job>,
    running: Option<usize>,
    task_hc: Vec<bool>,
    lc_dropped: Vec<bool>,
    comp_hc_count: Vec<u32>,
    comp_ims: Vec<bool>,
    ems: bool,
    report: SimReport,
}

impl<'a> Sim<'a> {
    fn trace(&mut self, tick: Ticks, event: TraceKind, id: &str) {
        if self.cfg.record_trace {
            self.report.trace.push(TraceEvent {
                tick,
                event,
                id: id.to_string(),
            });
        }
    }

    fn mode_event(&mut self, tick: Ticks, comp: usize, kind: ModeEventKind) {
        let id = self.spec.components[comp].id.clone();
        let tk = match kind {
            ModeEventKind::IMS => TraceKind::Ims,
            ModeEventKind::EMS => TraceKind::Ems,
            ModeEventKind::RESET => TraceKind::Reset,
        };
        self.trace(tick, tk, &id);
        self.report.mode_timeline.push(ModeEvent {
            tick,
            component: id,
            kind,
        });
    }

    fn effective_deadline(&self, j: &Job) -> Ticks {
        let t = &self.tasks[j.task];
        if t.hc && !self.task_hc[j.task] {
            j.release + t.virtual_deadline
        } else {
            j.release + t.deadline
        }
    }

    fn drop_where(&mut self, tick: Ticks, pred: impl Fn(&TaskInfo) -> bool) {
        let mut kept = Vec::with_capacity(self.pending.len());
        let running_task = self.running.map(|i| (self.pending[i].task, self.pending[i].release));
        let mut dropped = Vec::new();
        for j in self.pending.drain(..) {
            if pred(&self.tasks[j.task]) {
                dropped.push(j.task);
            } else {
                kept.push(j);
            }
        }
        self.pending = kept;
        self.running = running_task.and_then(|(task, rel)| {
            self.pending
                .iter()
                .position(|j| j.task == task && j.release == rel)
        });
        for task in dropped {
            let id = self.tasks[task].id.clone();
            self.trace(tick, TraceKind::Drop, &id);
        }
    }

    fn switch_task(&mut self, tick: Ticks, task: usize) {
        self.task_hc[task] = true;
        let id = self.tasks[task].id.clone();
        self.trace(tick, TraceKind::Switch, &id);
        if self.ems {
            return;
        }
        let c = self.tasks[task].comp;
        self.comp_hc_count[c] += 1;
        if !self.comp_ims[c] {
            self.comp_ims[c] = true;
            self.mode_event(tick, c, ModeEventKind::IMS);
            if self.cfg.drop_policy_on_ims == DropPolicy::DropLcInComponent {
                for k in 0..self.tasks.len() {
                    if self.tasks[k].comp == c && !self.tasks[k].hc {
                        self.lc_dropped[k] = true;
                    }
                }
                self.drop_where(tick, |t| t.comp == c && !t.hc);
            }
        }
        if self.comp_hc_count[c] > self.spec.components[c].tolerance_limit {
            self.ems = true;
            self.mode_event(tick, c, ModeEventKind::EMS);
            for k in 0..self.tasks.len() {
                if self.tasks[k].hc {
                    self.task_hc[k] = true;
                } else {
                    self.lc_dropped[k] = true;
                }
            }
            self.drop_where(tick, |t| !t.hc);
        }
    }

    fn idle_reset(&mut self, tick: Ticks) {
        if !self.pending.is_empty() {
            return;
        }
        let dirty = self.ems
            || self.task_hc.iter().any(|&b| b)
            || self.lc_dropped.iter().any(|&b| b)
            || self.comp_ims.iter().any(|&b| b);
        if !dirty {
            return;
        }
        for c in 0..self.spec.components.len() {
            if self.comp_ims[c] || self.ems && self.spec.components[c].is_hc() {
                self.mode_event(tick, c, ModeEventKind::RESET);
            }
        }
        self.ems = false;
        self.task_hc.iter_mut().for_each(|b| *b = false);
        self.lc_dropped.iter_mut().for_each(|b| *b = false);
        self.comp_ims.iter_mut().for_each(|b| *b = false);
        self.comp_hc_count.iter_mut().for_each(|b| *b = 0);
    }

    fn next_release(&self) -> Ticks {
        (0..self.tasks.len())
            .filter_map(|k| self.draws[k].get(self.next_draw[k]).map(|d| d.release))
            .min()
            .unwrap_or(Ticks::MAX)
    }

    /// How long the running job may run before something happens to it.
    fn running_budget(&self) -> Option<Ticks> {
        let j = &self.pending[self.running?];
        let t = &self.tasks[j.task];
        if j.flagged && !self.task_hc[j.task] && j.executed < t.wcet_lo {
            Some(t.wcet_lo - j.executed)
        } else {
            Some(j.requirement - j.executed)
        }
    }

    fn run(mut self) -> SimReport {
        let horizon = self.cfg.horizon;
        let mut now: Ticks = 0;
        loop {
            // 1. completion or switch of the running job
            if let Some(i) = self.running {
                let j = &self.pending[i];
                let t = &self.tasks[j.task];
                if j.executed == j.requirement {
                    let j = self.pending.remove(i);
                    self.running = None;
                    let id = self.tasks[j.task].id.clone();
                    self.trace(now, TraceKind::Complete, &id);
                    if !self.tasks[j.task].hc {
                        self.report.finished_lc += 1;
                    }
                } else if j.flagged && !self.task_hc[j.task] && j.executed == t.wcet_lo {
                    let task = j.task;
                    self.switch_task(now, task);
                }
            }
            // 2. deadline misses
            let mut k = 0;
            while k < self.pending.len() {
                let j = &self.pending[k];
                let t = &self.tasks[j.task];
                if j.release + t.deadline <= now {
                    let j = self.pending.remove(k);
                    if self.running == Some(k) {
                        self.running = None;
                    } else if let Some(r) = self.running {
                        if r > k {
                            self.running = Some(r - 1);
                        }
                    }
                    let t = &self.tasks[j.task];
                    let kind = if t.hc { MissKind::HC } else { MissKind::LC };
                    let id = t.id.clone();
                    self.trace(now, TraceKind::Miss, &id);
                    self.report.deadline_misses.push(DeadlineMiss {
                        task: id,
                        release: j.release,
                        kind,
                    });
                } else {
                    k += 1;
                }
            }
            // jobs released before the horizon run on to completion or to
            // their deadline; nothing is released after it
            if now >= horizon && self.pending.is_empty() {
                break;
            }
            // 3. reset on idle
            self.idle_reset(now);
            // 4. releases
            for k in 0..self.tasks.len() {
                while let Some(d) = self.draws[k].get(self.next_draw[k]).copied() {
                    if d.release != now {
                        break;
                    }
                    self.next_draw[k] += 1;
                    if !self.tasks[k].hc && self.lc_dropped[k] {
                        continue;
                    }
                    let id = self.tasks[k].id.clone();
                    self.trace(now, TraceKind::Release, &id);
                    self.pending.push(Job {
                        task: k,
                        release: d.release,
                        requirement: d.requirement,
                        executed: 0,
                        flagged: d.flagged,
                    });
                }
            }
            // 5. dispatch
            let best = (0..self.pending.len())
                .min_by_key(|&i| (self.effective_deadline(&self.pending[i]), self.pending[i].task, self.pending[i].release));
            if best != self.running {
                if let Some(b) = best {
                    let id = self.tasks[self.pending[b].task].id.clone();
                    self.trace(now, TraceKind::Dispatch, &id);
                }
                self.running = best;
            }
            // advance to the next instant where anything can happen
            let mut next = if now < horizon {
                horizon.min(self.next_release())
            } else {
                Ticks::MAX
            };
            if let Some(b) = self.running_budget() {
                next = next.min(now + b);
            }
            if let Some(d) = self
                .pending
                .iter()
                .map(|j| j.release + self.tasks[j.task].deadline)
                .min()
            {
                next = next.min(d);
            }
            debug_assert!(next > now || self.running_budget() == Some(0));
            if let Some(i) = self.running {
                self.pending[i].executed += next - now;
            }
            now = next;
        }
        self.report
    }
}

fn check_config(cfg: &SimConfig) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&cfg.hc_switch_probability) {
        return Err(SimError::Probability(cfg.hc_switch_probability));
    }
    if cfg.horizon <= 0 {
        return Err(SimError::Horizon);
    }
    Ok(())
}

/// Number of LC jobs a strictly periodic run releases in `[0, horizon)`.
pub fn max_lc_jobs(spec: &SystemSpec, horizon: Ticks) -> u64 {
    spec.tasks()
        .filter(|t| !t.is_hc())
        .map(|t| ((horizon + t.period - 1) / t.period) as u64)
        .sum()
}

pub fn simulate(spec: &SystemSpec, cfg: &SimConfig) -> Result<SimReport, SimError> {
    check_config(cfg)?;
    let spec = validate_system(spec).map_err(SimError::Invalid)?;
    Ok(simulate_unchecked(&spec, cfg))
}

pub(crate) fn simulate_unchecked(spec: &SystemSpec, cfg: &SimConfig) -> SimReport {
    let tasks = task_table(spec);
    let draws = draw_jobs(spec, cfg);
    let n = tasks.len();
    let max_lc = max_lc_jobs(spec, cfg.horizon);
    let sim = Sim {
        spec,
        cfg,
        tasks,
        draws,
        next_draw: vec![0; n],
        pending: Vec::new(),
        running: None,
        task_hc: vec![false; n],
        lc_dropped: vec![false; n],
        comp_hc_count: vec![0; spec.components.len()],
        comp_ims: vec![false; spec.components.len()],
        ems: false,
        report: SimReport {
            finished_lc: 0,
            max_lc,
            pfj: 1.0,
            deadline_misses: Vec::new(),
            mode_timeline: Vec::new(),
            seed: cfg.seed,
            prng: PRNG_NAME.to_string(),
            horizon: cfg.horizon,
            trace: Vec::new(),
        },
    };
    let mut report = sim.run();
    report.pfj = if report.max_lc == 0 {
        1.0
    } else {
        report.finished_lc as f64 / report.max_lc as f64
    };
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Tolerance limits as given in the spec.
    Proposed,
    /// Every tolerance limit forced to 0.
    Classical,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::Proposed => f.write_str("proposed"),
            Mechanism::Classical => f.write_str("classical"),
        }
    }
}

impl Mechanism {
    pub fn apply(&self, spec: &SystemSpec) -> SystemSpec {
        match self {
            Mechanism::Proposed => spec.clone(),
            Mechanism::Classical => spec.with_tolerance(|_| 0),
        }
    }
}

/// Runs each mechanism on the same draws.
pub fn compare_mechanisms(
    spec: &SystemSpec,
    cfg: &SimConfig,
    mechanisms: &[Mechanism],
) -> Result<Vec<(Mechanism, SimReport)>, SimError> {
    check_config(cfg)?;
    let spec = validate_system(spec).map_err(SimError::Invalid)?;
    let mut out = Vec::with_capacity(mechanisms.len());
    for &m in mechanisms {
        let s = m.apply(&spec);
        if !flat_test(&s, false)?.schedulable {
            return Err(SimError::Unschedulable(m));
        }
        out.push((m, simulate_unchecked(&s, cfg)));
    }
    Ok(out)
}
