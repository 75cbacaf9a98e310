//! Domain types: tasks, components, system specs.
//!
//! Time is an integer grid; one unit is one tick. Utilizations are exact
//! big rationals so that sign decisions (see [`crate::analysis::horizon`])
//! never depend on floating-point rounding.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer time, in ticks.
pub type Ticks = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CriticalityLevel {
    LC,
    HC,
}

impl fmt::Display for CriticalityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalityLevel::LC => f.write_str("LC"),
            CriticalityLevel::HC => f.write_str("HC"),
        }
    }
}

/// A constrained-deadline mixed-criticality sporadic task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MCTask {
    pub id: String,
    pub period: Ticks,
    pub criticality: CriticalityLevel,
    pub wcet_lo: Ticks,
    pub wcet_hi: Ticks,
    pub deadline: Ticks,
    /// Tightened deadline used while the task runs in LC mode.
    pub virtual_deadline: Ticks,
}

impl MCTask {
    pub fn lc(id: impl Into<String>, period: Ticks, wcet: Ticks, deadline: Ticks) -> Self {
        MCTask {
            id: id.into(),
            period,
            criticality: CriticalityLevel::LC,
            wcet_lo: wcet,
            wcet_hi: wcet,
            deadline,
            virtual_deadline: deadline,
        }
    }

    pub fn hc(
        id: impl Into<String>,
        period: Ticks,
        wcet_lo: Ticks,
        wcet_hi: Ticks,
        deadline: Ticks,
        virtual_deadline: Ticks,
    ) -> Self {
        MCTask {
            id: id.into(),
            period,
            criticality: CriticalityLevel::HC,
            wcet_lo,
            wcet_hi,
            deadline,
            virtual_deadline,
        }
    }

    pub fn is_hc(&self) -> bool {
        self.criticality == CriticalityLevel::HC
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Component {
    pub id: String,
    pub tasks: Vec<MCTask>,
    pub tolerance_limit: u32,
    pub interface_period: Option<Ticks>,
}

impl Component {
    pub fn new(id: impl Into<String>, tolerance_limit: u32, tasks: Vec<MCTask>) -> Self {
        Component {
            id: id.into(),
            tasks,
            tolerance_limit,
            interface_period: None,
        }
    }

    /// `|H|`, the number of HC tasks in the workload.
    pub fn hc_count(&self) -> usize {
        self.tasks.iter().filter(|t| t.is_hc()).count()
    }

    pub fn is_hc(&self) -> bool {
        self.hc_count() > 0
    }

    pub fn hc_tasks(&self) -> impl Iterator<Item = &MCTask> {
        self.tasks.iter().filter(|t| t.is_hc())
    }

    pub fn lc_tasks(&self) -> impl Iterator<Item = &MCTask> {
        self.tasks.iter().filter(|t| !t.is_hc())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Flat,
    Hierarchical,
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Framework::Flat => f.write_str("flat"),
            Framework::Hierarchical => f.write_str("hierarchical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemSpec {
    pub framework: Framework,
    pub components: Vec<Component>,
}

impl SystemSpec {
    pub fn flat(components: Vec<Component>) -> Self {
        SystemSpec {
            framework: Framework::Flat,
            components,
        }
    }

    pub fn tasks(&self) -> impl Iterator<Item = &MCTask> {
        self.components.iter().flat_map(|c| c.tasks.iter())
    }

    pub fn hc_components(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.is_hc())
    }

    /// Returns a copy with every HC component's tolerance limit replaced by
    /// `tl(component)`.
    pub fn with_tolerance<F: Fn(&Component) -> u32>(&self, tl: F) -> SystemSpec {
        let mut out = self.clone();
        for c in out.components.iter_mut() {
            c.tolerance_limit = if c.is_hc() { tl(c) } else { 0 };
        }
        out
    }

    pub fn tolerance_vector(&self) -> Vec<u32> {
        self.hc_components().map(|c| c.tolerance_limit).collect()
    }
}

// ── validation ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NonPositiveParameter,
    DeadlineExceedsPeriod,
    HcWcetOrder,
    LcWcetMismatch,
    VirtualDeadlineExceedsDeadline,
    LcVirtualDeadline,
    WcetLoExceedsVirtualDeadline,
    WcetHiExceedsDeadline,
    TlExceedsHcCount,
    LcComponentNonZeroTl,
    DuplicateTaskId,
    DuplicateComponentId,
    NoComponents,
    MissingInterfacePeriod,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NonPositiveParameter => "non-positive parameter",
            Rule::DeadlineExceedsPeriod => "deadline exceeds period",
            Rule::HcWcetOrder => "HC task requires C_lo < C_hi",
            Rule::LcWcetMismatch => "LC wcet mismatch",
            Rule::VirtualDeadlineExceedsDeadline => "virtual deadline exceeds deadline",
            Rule::LcVirtualDeadline => "LC task virtual deadline differs from deadline",
            Rule::WcetLoExceedsVirtualDeadline => "C_lo exceeds virtual deadline",
            Rule::WcetHiExceedsDeadline => "C_hi exceeds deadline",
            Rule::TlExceedsHcCount => "TL exceeds HC count",
            Rule::LcComponentNonZeroTl => "LC component must have TL = 0",
            Rule::DuplicateTaskId => "duplicate task id",
            Rule::DuplicateComponentId => "duplicate component id",
            Rule::NoComponents => "system has no components",
            Rule::MissingInterfacePeriod => "hierarchical framework requires interface_period",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Task or component id the rule applies to.
    pub subject: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

fn check_task(task: &MCTask, out: &mut Vec<Violation>) {
    let mut push = |rule| {
        out.push(Violation {
            subject: task.id.clone(),
            rule,
        })
    };
    if task.period <= 0
        || task.wcet_lo <= 0
        || task.wcet_hi <= 0
        || task.deadline <= 0
        || task.virtual_deadline <= 0
    {
        push(Rule::NonPositiveParameter);
        return;
    }
    if task.deadline > task.period {
        push(Rule::DeadlineExceedsPeriod);
    }
    match task.criticality {
        CriticalityLevel::HC => {
            if task.wcet_lo >= task.wcet_hi {
                push(Rule::HcWcetOrder);
            }
        }
        CriticalityLevel::LC => {
            if task.wcet_lo != task.wcet_hi {
                push(Rule::LcWcetMismatch);
            }
            if task.virtual_deadline != task.deadline {
                push(Rule::LcVirtualDeadline);
            }
        }
    }
    if task.virtual_deadline > task.deadline {
        push(Rule::VirtualDeadlineExceedsDeadline);
    }
    if task.wcet_lo > task.virtual_deadline {
        push(Rule::WcetLoExceedsVirtualDeadline);
    }
    if task.wcet_hi > task.deadline {
        push(Rule::WcetHiExceedsDeadline);
    }
}

/// Checks every structural invariant and returns the normalized spec
/// (HC components first, each group ordered by id) or the full list of
/// violations.
pub fn validate_system(spec: &SystemSpec) -> Result<SystemSpec, Vec<Violation>> {
    let mut errors = Vec::new();
    if spec.components.is_empty() {
        errors.push(Violation {
            subject: "<system>".into(),
            rule: Rule::NoComponents,
        });
    }
    let mut comp_ids = HashSet::new();
    let mut task_ids = HashSet::new();
    for comp in &spec.components {
        if !comp_ids.insert(comp.id.as_str()) {
            errors.push(Violation {
                subject: comp.id.clone(),
                rule: Rule::DuplicateComponentId,
            });
        }
        for task in &comp.tasks {
            check_task(task, &mut errors);
            if !task_ids.insert(task.id.as_str()) {
                errors.push(Violation {
                    subject: task.id.clone(),
                    rule: Rule::DuplicateTaskId,
                });
            }
        }
        let h = comp.hc_count();
        if h == 0 && comp.tolerance_limit != 0 {
            errors.push(Violation {
                subject: comp.id.clone(),
                rule: Rule::LcComponentNonZeroTl,
            });
        } else if comp.tolerance_limit as usize > h {
            errors.push(Violation {
                subject: comp.id.clone(),
                rule: Rule::TlExceedsHcCount,
            });
        }
        if let Some(p) = comp.interface_period {
            if p <= 0 {
                errors.push(Violation {
                    subject: comp.id.clone(),
                    rule: Rule::NonPositiveParameter,
                });
            }
        } else if spec.framework == Framework::Hierarchical {
            errors.push(Violation {
                subject: comp.id.clone(),
                rule: Rule::MissingInterfacePeriod,
            });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut normalized = spec.clone();
    normalized
        .components
        .sort_by(|a, b| b.is_hc().cmp(&a.is_hc()).then_with(|| a.id.cmp(&b.id)));
    Ok(normalized)
}

// ── utilization ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Component(String),
    System,
}

/// `U_L^L`, `U_H^L`, `U_H^H` as exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilizationSummary {
    pub u_ll: BigRational,
    pub u_hl: BigRational,
    pub u_hh: BigRational,
    pub scope: Scope,
}

impl UtilizationSummary {
    /// `max{U_L^L + U_H^L, U_H^H}`, the quantity task generation targets.
    pub fn bound(&self) -> BigRational {
        let lo = &self.u_ll + &self.u_hl;
        if lo > self.u_hh {
            lo
        } else {
            self.u_hh.clone()
        }
    }
}

pub fn ratio(num: Ticks, den: Ticks) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub(crate) fn utilization_of<'a>(
    tasks: impl Iterator<Item = &'a MCTask>,
    scope: Scope,
) -> UtilizationSummary {
    let mut u_ll = BigRational::zero();
    let mut u_hl = BigRational::zero();
    let mut u_hh = BigRational::zero();
    for t in tasks {
        match t.criticality {
            CriticalityLevel::LC => u_ll += ratio(t.wcet_lo, t.period),
            CriticalityLevel::HC => {
                u_hl += ratio(t.wcet_lo, t.period);
                u_hh += ratio(t.wcet_hi, t.period);
            }
        }
    }
    UtilizationSummary {
        u_ll,
        u_hl,
        u_hh,
        scope,
    }
}

pub fn component_utilization(comp: &Component) -> UtilizationSummary {
    utilization_of(comp.tasks.iter(), Scope::Component(comp.id.clone()))
}

pub fn system_utilization(spec: &SystemSpec) -> UtilizationSummary {
    utilization_of(spec.tasks(), Scope::System)
}

// ── canonical JSON form ─────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed taskset: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid taskset: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    id: String,
    #[serde(rename = "T")]
    period: Ticks,
    #[serde(rename = "L")]
    criticality: CriticalityLevel,
    #[serde(rename = "C_lo")]
    wcet_lo: Ticks,
    #[serde(rename = "C_hi")]
    wcet_hi: Ticks,
    #[serde(rename = "D")]
    deadline: Ticks,
    #[serde(rename = "D_lo", default, skip_serializing_if = "Option::is_none")]
    virtual_deadline: Option<Ticks>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentFile {
    id: String,
    tl: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interface_period: Option<Ticks>,
    tasks: Vec<TaskFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    framework: Framework,
    components: Vec<ComponentFile>,
}

impl From<&SystemSpec> for SystemFile {
    fn from(spec: &SystemSpec) -> Self {
        SystemFile {
            framework: spec.framework,
            components: spec
                .components
                .iter()
                .map(|c| ComponentFile {
                    id: c.id.clone(),
                    tl: c.tolerance_limit,
                    interface_period: c.interface_period,
                    tasks: c
                        .tasks
                        .iter()
                        .map(|t| TaskFile {
                            id: t.id.clone(),
                            period: t.period,
                            criticality: t.criticality,
                            wcet_lo: t.wcet_lo,
                            wcet_hi: t.wcet_hi,
                            deadline: t.deadline,
                            virtual_deadline: Some(t.virtual_deadline),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl From<SystemFile> for SystemSpec {
    fn from(f: SystemFile) -> Self {
        SystemSpec {
            framework: f.framework,
            components: f
                .components
                .into_iter()
                .map(|c| Component {
                    id: c.id,
                    tolerance_limit: c.tl,
                    interface_period: c.interface_period,
                    tasks: c
                        .tasks
                        .into_iter()
                        .map(|t| MCTask {
                            virtual_deadline: t.virtual_deadline.unwrap_or(t.deadline),
                            id: t.id,
                            period: t.period,
                            criticality: t.criticality,
                            wcet_lo: t.wcet_lo,
                            wcet_hi: t.wcet_hi,
                            deadline: t.deadline,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parses the canonical JSON taskset. A missing `D_lo` defaults to `D`
/// (no tightening). The result is not validated.
pub fn parse_spec(json: &str) -> Result<SystemSpec, serde_json::Error> {
    let file: SystemFile = serde_json::from_str(json)?;
    Ok(file.into())
}

pub fn render_spec(spec: &SystemSpec) -> String {
    serde_json::to_string_pretty(&SystemFile::from(spec)).expect("taskset serializes")
}

/// Reads, parses and validates a taskset file.
pub fn load_spec(path: &Path) -> Result<SystemSpec, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let spec = parse_spec(&text)?;
    validate_system(&spec).map_err(LoadError::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hc_example() -> MCTask {
        MCTask::hc("h1", 10, 2, 5, 10, 10)
    }

    fn two_component() -> SystemSpec {
        SystemSpec::flat(vec![
            Component::new("hc", 1, vec![hc_example(), MCTask::hc("h2", 20, 3, 7, 20, 15)]),
            Component::new("lc", 0, vec![MCTask::lc("l1", 4, 1, 4)]),
        ])
    }

    #[test]
    fn lc_wcet_mismatch_is_reported() {
        let mut t = MCTask::lc("l1", 4, 1, 4);
        t.wcet_hi = 2;
        let spec = SystemSpec::flat(vec![Component::new("c", 0, vec![t])]);
        let errs = validate_system(&spec).unwrap_err();
        assert!(errs
            .iter()
            .any(|v| v.rule == Rule::LcWcetMismatch && v.subject == "l1"));
        assert_eq!(Rule::LcWcetMismatch.to_string(), "LC wcet mismatch");
    }

    #[test]
    fn tl_above_hc_count_is_reported() {
        let spec = SystemSpec::flat(vec![Component::new("c", 2, vec![hc_example()])]);
        let errs = validate_system(&spec).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].rule, Rule::TlExceedsHcCount);
        assert_eq!(errs[0].rule.to_string(), "TL exceeds HC count");
    }

    #[test]
    fn well_formed_spec_is_unchanged() {
        let spec = two_component();
        assert_eq!(validate_system(&spec).unwrap(), spec);
    }

    #[test]
    fn normalization_puts_hc_components_first() {
        let mut spec = two_component();
        spec.components.reverse();
        let n = validate_system(&spec).unwrap();
        assert_eq!(n.components[0].id, "hc");
        assert_eq!(validate_system(&n).unwrap(), n);
    }

    #[test]
    fn structural_rules() {
        let mut bad = MCTask::hc("x", 10, 4, 3, 12, 11);
        bad.virtual_deadline = 13;
        let spec = SystemSpec::flat(vec![Component::new("c", 0, vec![bad])]);
        let rules: Vec<Rule> = validate_system(&spec)
            .unwrap_err()
            .into_iter()
            .map(|v| v.rule)
            .collect();
        assert!(rules.contains(&Rule::DeadlineExceedsPeriod));
        assert!(rules.contains(&Rule::HcWcetOrder));
        assert!(rules.contains(&Rule::VirtualDeadlineExceedsDeadline));

        let dup = SystemSpec::flat(vec![
            Component::new("c", 0, vec![MCTask::lc("a", 4, 1, 4)]),
            Component::new("c", 0, vec![MCTask::lc("a", 4, 1, 4)]),
        ]);
        let rules: Vec<Rule> = validate_system(&dup)
            .unwrap_err()
            .into_iter()
            .map(|v| v.rule)
            .collect();
        assert!(rules.contains(&Rule::DuplicateComponentId));
        assert!(rules.contains(&Rule::DuplicateTaskId));
        assert!(validate_system(&SystemSpec::flat(vec![])).is_err());
        let lc_tl = SystemSpec::flat(vec![Component::new("c", 1, vec![MCTask::lc("a", 4, 1, 4)])]);
        assert_eq!(
            validate_system(&lc_tl).unwrap_err()[0].rule,
            Rule::LcComponentNonZeroTl
        );
    }

    #[test]
    fn utilization_examples() {
        let empty = Component::new("e", 0, vec![]);
        let u = component_utilization(&empty);
        assert!(u.u_ll.is_zero() && u.u_hl.is_zero() && u.u_hh.is_zero());

        let one = Component::new("c", 0, vec![hc_example()]);
        let u = component_utilization(&one);
        assert_eq!(u.u_hl, ratio(1, 5));
        assert_eq!(u.u_hh, ratio(1, 2));
        assert!(u.u_ll.is_zero());

        let two = Component::new("c", 0, vec![hc_example(), MCTask::lc("l", 4, 1, 4)]);
        let u = component_utilization(&two);
        assert_eq!(u.u_ll, ratio(1, 4));
        assert_eq!(u.u_hl, ratio(1, 5));
        assert_eq!(u.u_hh, ratio(1, 2));
        assert_eq!(u.bound(), ratio(1, 2));
    }

    #[test]
    fn json_rejects_unknown_fields_and_defaults_virtual_deadline() {
        let ok = r#"{"framework":"flat","components":[{"id":"c","tl":0,
            "tasks":[{"id":"a","T":4,"L":"LC","C_lo":1,"C_hi":1,"D":4}]}]}"#;
        let spec = parse_spec(ok).unwrap();
        assert_eq!(spec.components[0].tasks[0].virtual_deadline, 4);
        let bad = r#"{"framework":"flat","extra":1,"components":[]}"#;
        assert!(parse_spec(bad).is_err());
        let bad_task = r#"{"framework":"flat","components":[{"id":"c","tl":0,
            "tasks":[{"id":"a","T":4,"L":"LC","C_lo":1,"C_hi":1,"D":4,"prio":3}]}]}"#;
        assert!(parse_spec(bad_task).is_err());
    }

    fn arb_task(idx: usize) -> impl Strategy<Value = MCTask> {
        (2i64..60, any::<bool>(), 1i64..=100, 1i64..=100, 1i64..=100).prop_map(
            move |(period, hc, a, b, c)| {
                let deadline = 1 + (period - 1) * a / 100;
                if hc && deadline >= 2 {
                    let wcet_hi = 2 + (deadline - 2) * b / 100;
                    let wcet_lo = 1 + (wcet_hi - 2) * c / 100;
                    let vd = wcet_lo + (deadline - wcet_lo) * a / 100;
                    MCTask::hc(format!("t{idx}"), period, wcet_lo, wcet_hi, deadline, vd)
                } else {
                    let w = 1 + (deadline - 1) * b / 100;
                    MCTask::lc(format!("t{idx}"), period, w, deadline)
                }
            },
        )
    }

    fn arb_spec() -> impl Strategy<Value = SystemSpec> {
        (
            proptest::collection::vec(0usize..6, 1..4),
            any::<bool>(),
            proptest::collection::vec(any::<u32>(), 4),
        )
            .prop_flat_map(|(sizes, hier, tls)| {
                let mut next = 0usize;
                let comps: Vec<_> = sizes
                    .iter()
                    .enumerate()
                    .map(|(ci, &n)| {
                        let start = next;
                        next += n;
                        let tl_seed = tls[ci % tls.len()];
                        let tasks: Vec<_> = (start..start + n).map(arb_task).collect();
                        tasks.prop_map(move |tasks| {
                            let h = tasks.iter().filter(|t| t.is_hc()).count() as u32;
                            let tl = if h == 0 { 0 } else { tl_seed % (h + 1) };
                            let mut c = Component::new(format!("c{ci}"), tl, tasks);
                            if hier {
                                c.interface_period = Some(5);
                            }
                            c
                        })
                    })
                    .collect();
                comps.prop_map(move |components| SystemSpec {
                    framework: if hier {
                        Framework::Hierarchical
                    } else {
                        Framework::Flat
                    },
                    components,
                })
            })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(spec in arb_spec()) {
            let spec = validate_system(&spec).expect("generator yields valid specs");
            let back = parse_spec(&render_spec(&spec)).unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn validation_is_idempotent(spec in arb_spec()) {
            let once = validate_system(&spec).unwrap();
            prop_assert_eq!(validate_system(&once).unwrap(), once);
        }

        #[test]
        fn utilization_is_additive(spec in arb_spec()) {
            let total = system_utilization(&spec);
            let mut ll = BigRational::zero();
            let mut hl = BigRational::zero();
            let mut hh = BigRational::zero();
            for c in &spec.components {
                let u = component_utilization(c);
                ll += u.u_ll; hl += u.u_hl; hh += u.u_hh;
            }
            prop_assert_eq!(&total.u_ll, &ll);
            prop_assert_eq!(&total.u_hl, &hl);
            prop_assert!(total.u_hl <= total.u_hh);
            prop_assert_eq!(&total.u_hh, &hh);
        }
    }
}
