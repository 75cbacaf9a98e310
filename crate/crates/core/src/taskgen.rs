//! Random task sets targeting a utilization bound.
//!
//! Tasks are drawn one at a time (uniform `u^L`, `C^H/C^L` ratio and period,
//! HC with probability `hc_probability`) until the next one would push
//! `max(U_L^L + U_H^L, U_H^H)` past `target_bound`; that task is discarded.
//! HC tasks go to component `hc`, LC tasks to component `lc`.

use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ratio, Component, MCTask, SystemSpec, Ticks};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub u_lo_range: (f64, f64),
    pub ratio_range: (f64, f64),
    pub period_range: (Ticks, Ticks),
    pub hc_probability: f64,
    pub target_bound: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            u_lo_range: (0.02, 0.1),
            ratio_range: (2.0, 3.0),
            period_range: (10, 150),
            hc_probability: 0.5,
            target_bound: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("target bound {bound} is below the smallest task utilization {min}")]
    Unsatisfiable { bound: f64, min: f64 },
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_string()));
        let (ul, uh) = self.u_lo_range;
        if !(ul > 0.0 && ul <= uh && uh <= 1.0) {
            return bad("u_lo_range must satisfy 0 < lo <= hi <= 1");
        }
        let (rl, rh) = self.ratio_range;
        if !(rl > 1.0 && rl <= rh) {
            return bad("ratio_range must satisfy 1 < lo <= hi");
        }
        let (pl, ph) = self.period_range;
        if !(pl >= 1 && pl <= ph) {
            return bad("period_range must satisfy 1 <= lo <= hi");
        }
        if !(0.0..=1.0).contains(&self.hc_probability) {
            return bad("hc_probability must lie in [0, 1]");
        }
        if !(self.target_bound > 0.0 && self.target_bound <= 1.0) {
            return bad("target_bound must lie in (0, 1]");
        }
        if self.target_bound < ul {
            return Err(GenError::Unsatisfiable {
                bound: self.target_bound,
                min: ul,
            });
        }
        Ok(())
    }
}

fn round_half_up(x: f64) -> Ticks {
    (x + 0.5).floor() as Ticks
}

/// Draws one task.
fn draw_task(rng: &mut ChaCha8Rng, cfg: &GenConfig, idx: usize) -> MCTask {
    let u = rng.gen_range(cfg.u_lo_range.0..=cfg.u_lo_range.1);
    let r = rng.gen_range(cfg.ratio_range.0..=cfg.ratio_range.1);
    let period = rng.gen_range(cfg.period_range.0..=cfg.period_range.1);
    let hc = rng.gen_bool(cfg.hc_probability);
    let id = format!("t{idx:03}");
    let cl = round_half_up(u * period as f64).clamp(1, period);
    if hc && cl < period {
        let ch = round_half_up(r * cl as f64).clamp(cl + 1, period);
        MCTask::hc(id, period, cl, ch, period, period)
    } else {
        MCTask::lc(id, period, cl, period)
    }
}

pub fn generate(cfg: &GenConfig) -> Result<SystemSpec, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // f64 literals such as 0.8 sit a hair above the decimal value, so an
    // exact hit on the decimal bound is accepted
    let bound = BigRational::from_float(cfg.target_bound).expect("finite bound");
    let (mut u_lo, mut u_hh) = (BigRational::zero(), BigRational::zero());
    let mut hc = Vec::new();
    let mut lc = Vec::new();
    loop {
        let t = draw_task(&mut rng, cfg, hc.len() + lc.len());
        let next_lo = &u_lo + ratio(t.wcet_lo, t.period);
        let next_hh = if t.is_hc() {
            &u_hh + ratio(t.wcet_hi, t.period)
        } else {
            u_hh.clone()
        };
        if next_lo > bound || next_hh > bound {
            break;
        }
        u_lo = next_lo;
        u_hh = next_hh;
        if t.is_hc() {
            hc.push(t);
        } else {
            lc.push(t);
        }
    }
    let mut comps = Vec::new();
    if !hc.is_empty() {
        comps.push(Component::new("hc", 0, hc));
    }
    if !lc.is_empty() {
        comps.push(Component::new("lc", 0, lc));
    }
    Ok(SystemSpec::flat(comps))
}

/// `count` specs with seeds `cfg.seed, cfg.seed + 1, ...`, in seed order.
pub fn generate_batch(cfg: &GenConfig, count: usize) -> Result<Vec<SystemSpec>, GenError> {
    cfg.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            generate(&GenConfig {
                seed: cfg.seed.wrapping_add(i),
                ..cfg.clone()
            })
        })
        .collect()
}
