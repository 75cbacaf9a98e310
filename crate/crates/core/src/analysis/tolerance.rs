//! Largest tolerance limits that keep a system schedulable.
//!
//! Component demand never decreases as a tolerance limit grows, so the
//! schedulable limits of one component form a prefix `0..=TL*` and binary
//! search finds `TL*`. With several HC components the limits are raised one
//! component at a time, in spec order.

use serde::Serialize;

use super::flat::{flat_test_with, FlatOptions};
use super::tighten::tighten_with;
use super::AnalysisError;
use crate::model::SystemSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ToleranceResult {
    /// Fails even with every limit at 0.
    Unschedulable,
    Maximal { tolerance: Vec<(String, u32)> },
}

impl ToleranceResult {
    /// The limit found for a component, if schedulable.
    pub fn limit_of(&self, id: &str) -> Option<u32> {
        match self {
            ToleranceResult::Unschedulable => None,
            ToleranceResult::Maximal { tolerance } => {
                tolerance.iter().find(|(c, _)| c == id).map(|&(_, v)| v)
            }
        }
    }
}

fn with_limits(spec: &SystemSpec, limits: &[u32]) -> SystemSpec {
    let mut s = spec.clone();
    let mut it = limits.iter();
    for comp in &mut s.components {
        comp.tolerance_limit = if comp.is_hc() { *it.next().unwrap() } else { 0 };
    }
    s
}

fn search<F>(spec: &SystemSpec, mut passes: F) -> Result<ToleranceResult, AnalysisError>
where
    F: FnMut(&SystemSpec) -> Result<bool, AnalysisError>,
{
    let caps: Vec<u32> = spec.hc_components().map(|c| c.hc_count() as u32).collect();
    let mut limits = vec![0u32; caps.len()];
    if !passes(&with_limits(spec, &limits))? {
        return Ok(ToleranceResult::Unschedulable);
    }
    for j in 0..caps.len() {
        let (mut lo, mut hi) = (limits[j], caps[j]);
        while lo < hi {
            let mid = lo + (hi - lo + 1) / 2;
            limits[j] = mid;
            if passes(&with_limits(spec, &limits))? {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        limits[j] = lo;
    }
    let tolerance = spec
        .hc_components()
        .zip(&limits)
        .map(|(c, &v)| (c.id.clone(), v))
        .collect();
    Ok(ToleranceResult::Maximal { tolerance })
}

/// Keeps the spec's virtual deadlines.
pub fn max_tolerance(spec: &SystemSpec) -> Result<ToleranceResult, AnalysisError> {
    max_tolerance_with(spec, &FlatOptions::default())
}

pub fn max_tolerance_with(spec: &SystemSpec, opts: &FlatOptions) -> Result<ToleranceResult, AnalysisError> {
    search(spec, |s| Ok(flat_test_with(s, opts)?.schedulable))
}

/// Re-tightens virtual deadlines for every candidate limit vector.
pub fn max_tolerance_tightened(spec: &SystemSpec, opts: &FlatOptions) -> Result<ToleranceResult, AnalysisError> {
    search(spec, |s| match tighten_with(s, opts) {
        Ok(_) => Ok(true),
        Err(AnalysisError::NoFeasibleTightening) => Ok(false),
        Err(e) => Err(e),
    })
}
