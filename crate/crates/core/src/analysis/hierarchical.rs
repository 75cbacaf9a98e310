//! Two-level scheduling: each component is abstracted by its interface, and
//! the interfaces are scheduled as tasks of a parent workload.
//!
//! An interface `(T, L, C^L, C^H)` enters the parent as a task with period and
//! deadline `T` and budgets `C^L`/`C^H`. The parent runs on the unit scale
//! (one tick = `units_per_tick` units) so fractional capacities stay exact.
//! All interface tasks share one parent component with tolerance limit 0: any
//! child's external switch is the parent's switch. Interface tasks get their
//! virtual deadlines from the usual tightening, run at the parent level.

use serde::Serialize;

use super::flat::{flat_test_with, FlatOptions, FlatVerdict};
use super::interface::{generate_interface_with, InterfaceResult};
use super::tighten::tighten_with;
use super::AnalysisError;
use crate::model::{Component, CriticalityLevel, MCTask, SystemSpec};
use crate::supply::DEFAULT_UNITS_PER_TICK;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentInterface {
    pub component: String,
    #[serde(flatten)]
    pub result: InterfaceResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HierarchicalVerdict {
    pub schedulable: bool,
    pub interfaces: Vec<ComponentInterface>,
    /// Parent-level flat verdict (time in units); absent when some interface
    /// is infeasible.
    pub parent: Option<FlatVerdict>,
    /// The parent workload, with tightened virtual deadlines when found.
    #[serde(skip)]
    pub parent_spec: Option<SystemSpec>,
}

pub fn hierarchical_test(spec: &SystemSpec) -> Result<HierarchicalVerdict, AnalysisError> {
    hierarchical_test_with(spec, DEFAULT_UNITS_PER_TICK, &FlatOptions::default())
}

/// Lifts interfaces into the parent workload.
pub fn parent_workload(interfaces: &[ComponentInterface]) -> SystemSpec {
    let tasks = interfaces
        .iter()
        .map(|ci| {
            let i = &ci.result.iface;
            let p = i.period_units();
            match i.criticality {
                CriticalityLevel::HC => MCTask::hc(ci.component.clone(), p, i.cap_lo, i.cap_hi, p, p),
                CriticalityLevel::LC => MCTask::lc(ci.component.clone(), p, i.cap_lo, p),
            }
        })
        .collect();
    SystemSpec::flat(vec![Component::new("parent", 0, tasks)])
}

pub fn hierarchical_test_with(
    spec: &SystemSpec,
    units_per_tick: i64,
    opts: &FlatOptions,
) -> Result<HierarchicalVerdict, AnalysisError> {
    let mut interfaces = Vec::with_capacity(spec.components.len());
    for comp in &spec.components {
        interfaces.push(ComponentInterface {
            component: comp.id.clone(),
            result: generate_interface_with(comp, units_per_tick)?,
        });
    }
    if interfaces.iter().any(|i| !i.result.feasible) {
        return Ok(HierarchicalVerdict {
            schedulable: false,
            interfaces,
            parent: None,
            parent_spec: None,
        });
    }
    let parent = parent_workload(&interfaces);
    let (verdict, parent_spec) = match tighten_with(&parent, opts) {
        Ok(tight) => (flat_test_with(&tight, opts)?, tight),
        Err(AnalysisError::NoFeasibleTightening) => (flat_test_with(&parent, opts)?, parent),
        Err(e) => return Err(e),
    };
    Ok(HierarchicalVerdict {
        schedulable: verdict.schedulable,
        interfaces,
        parent: Some(verdict),
        parent_spec: Some(parent_spec),
    })
}
