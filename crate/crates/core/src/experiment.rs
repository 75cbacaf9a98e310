//! Schedulability-ratio and PFJ sweeps.
//!
//! Each (bound, taskset index) pair gets its own generator seed, so every
//! tolerance fraction, framework, probability and mechanism at a bound is
//! evaluated on the same task sets. Rows are returned in grid order whatever
//! the thread count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::hierarchical::hierarchical_test_with;
use crate::analysis::tighten::tighten_with;
use crate::analysis::tolerance::max_tolerance_tightened;
use crate::analysis::{flat_test_with, AnalysisError, FlatOptions, ToleranceResult};
use crate::model::{Framework, SystemSpec};
use crate::simulator::{simulate_unchecked, Mechanism, SimConfig};
use crate::supply::DEFAULT_UNITS_PER_TICK;
use crate::taskgen::{generate, GenConfig, GenError};

/// Interface period given to every component in hierarchical runs.
pub const HIERARCHICAL_PERIOD: i64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub bounds: Vec<f64>,
    pub tasksets_per_point: usize,
    pub tl_fractions: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub framework: Framework,
    pub seed: u64,
    pub horizon: i64,
    pub generator: GenConfig,
    pub use_optimized: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            bounds: grid(0.4, 0.9, 0.05),
            tasksets_per_point: 100,
            tl_fractions: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            probabilities: vec![0.005, 0.02, 0.05, 0.2, 0.5],
            framework: Framework::Flat,
            seed: 1,
            horizon: 10_000,
            generator: GenConfig::default(),
            use_optimized: false,
        }
    }
}

/// `lo, lo + step, ..., hi`, rounded to avoid drift.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((lo + step * i as f64) * 1e6).round() / 1e6)
        .collect()
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("only {found} of {wanted} task sets at bound {bound} pass at TL = 0 after {tries} draws")]
    TooFewSchedulable {
        bound: f64,
        found: usize,
        wanted: usize,
        tries: usize,
    },
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.tasksets_per_point == 0 {
            return bad("tasksets_per_point must be positive");
        }
        if self.bounds.is_empty() {
            return bad("no bounds");
        }
        if self.tl_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("tl fractions must lie in [0, 1]");
        }
        if self.probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.horizon <= 0 {
            return bad("horizon must be positive");
        }
        for &b in &self.bounds {
            GenConfig {
                target_bound: b,
                ..self.generator.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    fn opts(&self) -> FlatOptions {
        FlatOptions {
            use_optimized: self.use_optimized,
            ..FlatOptions::default()
        }
    }
}

/// SplitMix64 step, used to derive independent seeds from grid coordinates.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn taskset_seed(seed: u64, bound_idx: usize, k: usize) -> u64 {
    mix(mix(seed ^ mix(bound_idx as u64)) ^ k as u64)
}

/// `⌊f·|H|⌋` for the HC component(s) of a spec.
pub fn tolerance_for(spec: &SystemSpec, fraction: f64) -> SystemSpec {
    spec.with_tolerance(|c| (fraction * c.hc_count() as f64 + 1e-9).floor() as u32)
}

fn with_periods(spec: &SystemSpec) -> SystemSpec {
    let mut s = spec.clone();
    s.framework = Framework::Hierarchical;
    for c in &mut s.components {
        c.interface_period = Some(HIERARCHICAL_PERIOD);
    }
    s
}

/// Virtual deadlines are tuned at the given limits; the set counts as
/// schedulable when tuning succeeds (flat) or when the tuned set passes the
/// hierarchical test.
pub fn is_schedulable(spec: &SystemSpec, framework: Framework, opts: &FlatOptions) -> Result<bool, AnalysisError> {
    let tuned = match tighten_with(spec, opts) {
        Ok(s) => Some(s),
        Err(AnalysisError::NoFeasibleTightening) => None,
        Err(e) => return Err(e),
    };
    match framework {
        Framework::Flat => Ok(tuned.is_some()),
        Framework::Hierarchical => {
            let base = tuned.unwrap_or_else(|| spec.clone());
            Ok(hierarchical_test_with(&with_periods(&base), DEFAULT_UNITS_PER_TICK, opts)?.schedulable)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedRow {
    pub bound: f64,
    pub tl_fraction: f64,
    pub framework: Framework,
    pub schedulable: usize,
    pub n: usize,
    pub schedulable_ratio: f64,
    pub seed: u64,
}

pub fn sweep_schedulability(cfg: &SweepConfig) -> Result<Vec<SchedRow>, ExperimentError> {
    cfg.validate()?;
    let opts = cfg.opts();
    let mut rows = Vec::new();
    for (bi, &bound) in cfg.bounds.iter().enumerate() {
        let verdicts: Vec<Vec<bool>> = (0..cfg.tasksets_per_point)
            .into_par_iter()
            .map(|k| -> Result<Vec<bool>, ExperimentError> {
                let spec = generate(&GenConfig {
                    target_bound: bound,
                    seed: taskset_seed(cfg.seed, bi, k),
                    ..cfg.generator.clone()
                })?;
                cfg.tl_fractions
                    .iter()
                    .map(|&f| Ok(is_schedulable(&tolerance_for(&spec, f), cfg.framework, &opts)?))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        for (fi, &f) in cfg.tl_fractions.iter().enumerate() {
            let ok = verdicts.iter().filter(|v| v[fi]).count();
            rows.push(SchedRow {
                bound,
                tl_fraction: f,
                framework: cfg.framework,
                schedulable: ok,
                n: cfg.tasksets_per_point,
                schedulable_ratio: ok as f64 / cfg.tasksets_per_point as f64,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfjRow {
    pub bound: f64,
    pub probability: f64,
    pub mechanism: Mechanism,
    pub mean_pfj: f64,
    pub stddev: f64,
    pub n: usize,
    pub seed: u64,
}

/// A task set admitted to the PFJ experiment: tuned at its largest
/// tolerance limits, which also pass at TL = 0.
#[derive(Debug, Clone)]
pub struct PfjCase {
    pub spec: SystemSpec,
    pub sim_seed: u64,
}

/// Cap on generator draws per admitted task set.
const MAX_DRAWS_PER_CASE: usize = 50;

pub fn pfj_cases(cfg: &SweepConfig, bi: usize) -> Result<Vec<PfjCase>, ExperimentError> {
    let bound = cfg.bounds[bi];
    let opts = cfg.opts();
    let want = cfg.tasksets_per_point;
    let mut cases = Vec::with_capacity(want);
    let mut tried = 0;
    // draw in parallel batches, keep the first `want` admitted in draw order
    while cases.len() < want && tried < want * MAX_DRAWS_PER_CASE {
        let batch = (want - cases.len()).max(8);
        let found: Vec<Option<PfjCase>> = (tried..tried + batch)
            .into_par_iter()
            .map(|k| -> Result<Option<PfjCase>, ExperimentError> {
                let seed = taskset_seed(cfg.seed, bi, k);
                let spec = generate(&GenConfig {
                    target_bound: bound,
                    seed,
                    ..cfg.generator.clone()
                })?;
                admit(&spec, &opts).map(|s| s.map(|spec| PfjCase { spec, sim_seed: mix(seed) }))
            })
            .collect::<Result<_, _>>()?;
        tried += batch;
        cases.extend(found.into_iter().flatten());
    }
    if cases.len() < want {
        return Err(ExperimentError::TooFewSchedulable {
            bound,
            found: cases.len(),
            wanted: want,
            tries: tried,
        });
    }
    cases.truncate(want);
    Ok(cases)
}

/// Largest limits, then deadlines tuned at them.
fn admit(spec: &SystemSpec, opts: &FlatOptions) -> Result<Option<SystemSpec>, ExperimentError> {
    let limits = match max_tolerance_tightened(spec, opts)? {
        ToleranceResult::Unschedulable => return Ok(None),
        ToleranceResult::Maximal { tolerance } => tolerance,
    };
    let spec = spec.with_tolerance(|c| {
        limits
            .iter()
            .find(|(id, _)| *id == c.id)
            .map(|&(_, v)| v)
            .unwrap_or(0)
    });
    let tuned = tighten_with(&spec, opts)?;
    // fixed deadlines: passing at TL* implies passing at TL = 0
    debug_assert!(flat_test_with(&tuned.with_tolerance(|_| 0), opts)?.schedulable);
    Ok(Some(tuned))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-case PFJ for both mechanisms at one probability, on coupled draws.
pub fn pfj_pairs(cases: &[PfjCase], probability: f64, horizon: i64) -> Vec<(f64, f64)> {
    cases
        .par_iter()
        .map(|c| {
            let cfg = SimConfig {
                horizon,
                seed: c.sim_seed,
                hc_switch_probability: probability,
                ..SimConfig::default()
            };
            let p = simulate_unchecked(&Mechanism::Proposed.apply(&c.spec), &cfg).pfj;
            let q = simulate_unchecked(&Mechanism::Classical.apply(&c.spec), &cfg).pfj;
            (p, q)
        })
        .collect()
}

pub fn sweep_pfj(cfg: &SweepConfig) -> Result<Vec<PfjRow>, ExperimentError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (bi, &bound) in cfg.bounds.iter().enumerate() {
        let cases = pfj_cases(cfg, bi)?;
        for &p in &cfg.probabilities {
            let pairs = pfj_pairs(&cases, p, cfg.horizon);
            for (m, xs) in [
                (Mechanism::Proposed, pairs.iter().map(|x| x.0).collect::<Vec<_>>()),
                (Mechanism::Classical, pairs.iter().map(|x| x.1).collect()),
            ] {
                let (mean, sd) = mean_std(&xs);
                rows.push(PfjRow {
                    bound,
                    probability: p,
                    mechanism: m,
                    mean_pfj: mean,
                    stddev: sd,
                    n: xs.len(),
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(rows)
}

fn framework_name(f: Framework) -> &'static str {
    match f {
        Framework::Flat => "flat",
        Framework::Hierarchical => "hierarchical",
    }
}

pub const SCHED_CSV_HEADER: &str = "bound,tl_fraction,framework,schedulable,n,schedulable_ratio,seed";
pub const PFJ_CSV_HEADER: &str = "bound,probability,mechanism,mean_pfj,stddev,n,seed";

pub fn sched_csv(rows: &[SchedRow]) -> String {
    let mut s = format!("{SCHED_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{}",
            r.bound,
            r.tl_fraction,
            framework_name(r.framework),
            r.schedulable,
            r.n,
            r.schedulable_ratio,
            r.seed
        );
    }
    s
}

pub fn pfj_csv(rows: &[PfjRow]) -> String {
    let mut s = format!("{PFJ_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{},{}",
            r.bound, r.probability, r.mechanism, r.mean_pfj, r.stddev, r.n, r.seed
        );
    }
    s
}
