//! `mcs-kit` command line.
//!
//! Exit codes: 0 schedulable / success, 1 unschedulable, 2 input or usage
//! error. Output is JSON (or CSV for sweeps and curves); `--pretty` indents.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mcs_kit::analysis::flat::DEFAULT_MAX_HC_COMPONENTS;
use mcs_kit::analysis::hierarchical::hierarchical_test_with;
use mcs_kit::analysis::interface::generate_interface_with;
use mcs_kit::analysis::tighten::tighten_with;
use mcs_kit::analysis::tolerance::{max_tolerance_tightened, max_tolerance_with};
use mcs_kit::analysis::{flat_test_with, AnalysisError, FlatOptions};
use mcs_kit::demand::{dbf_component, dbf_component_optimized, ModeSwitchInstants};
use mcs_kit::experiment::{self, grid, SweepConfig};
use mcs_kit::model::{load_spec, render_spec, Framework, SystemSpec};
use mcs_kit::simulator::{
    compare_mechanisms, simulate, DropPolicy, HcExecPolicy, Mechanism, ReleasePolicy, SimConfig,
};
use mcs_kit::supply::{sbf, sbf_lc, sbf_pattern_a, sbf_pattern_b, MCPRInterface, DEFAULT_UNITS_PER_TICK};
use mcs_kit::taskgen::{generate, GenConfig};

#[derive(Parser)]
#[command(name = "mcs-kit", version, about = "Mixed-criticality analysis with HC tolerance limits")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MCS_KIT_JOBS")]
    jobs: Option<usize>,
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide schedulability of a taskset file.
    Analyze(AnalyzeArgs),
    /// Tune virtual deadlines; prints the tuned taskset.
    Tighten(CommonArgs),
    /// Largest tolerance limits that stay schedulable.
    MaxTl {
        #[command(flatten)]
        common: CommonArgs,
        /// Re-tune virtual deadlines for every candidate.
        #[arg(long)]
        tighten: bool,
    },
    /// Minimal two-level periodic interface per component.
    Interface {
        #[command(flatten)]
        common: CommonArgs,
        /// Interface period for components without one.
        #[arg(long)]
        period: Option<i64>,
        #[arg(long, default_value_t = DEFAULT_UNITS_PER_TICK)]
        units_per_tick: i64,
    },
    /// Random tasksets (one JSON document per line when --count > 1).
    Generate(GenerateArgs),
    /// Run the EDF mode-switch simulator.
    Simulate(SimulateArgs),
    /// Schedulability ratio per (bound, TL fraction) as CSV.
    SweepSched(SweepArgs),
    /// Mean PFJ per (bound, probability, mechanism) as CSV.
    SweepPfj(SweepArgs),
    /// dbf or sbf curves as CSV.
    DumpCurves(CurveArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Taskset JSON file.
    file: PathBuf,
    /// Use the split (DL/DH) demand bound.
    #[arg(long)]
    optimized_dbf: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_HC_COMPONENTS)]
    max_hc_components: usize,
}

impl CommonArgs {
    fn opts(&self) -> FlatOptions {
        FlatOptions {
            use_optimized: self.optimized_dbf,
            max_hc_components: self.max_hc_components,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameworkArg {
    Flat,
    Hierarchical,
}

impl From<FrameworkArg> for Framework {
    fn from(f: FrameworkArg) -> Self {
        match f {
            FrameworkArg::Flat => Framework::Flat,
            FrameworkArg::Hierarchical => Framework::Hierarchical,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Defaults to the framework named in the file.
    #[arg(long, value_enum)]
    framework: Option<FrameworkArg>,
    /// Override every HC component's tolerance limit.
    #[arg(long)]
    tl: Option<u32>,
    /// Tune virtual deadlines before testing.
    #[arg(long)]
    tighten: bool,
    #[arg(long, default_value_t = DEFAULT_UNITS_PER_TICK)]
    units_per_tick: i64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0.8)]
    bound: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0.5)]
    hc_probability: f64,
    /// Tolerance fraction of |H| for the HC component.
    #[arg(long, default_value_t = 0.0)]
    tl_fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Proposed,
    Classical,
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    horizon: i64,
    /// Probability that a HC job overruns its LC budget.
    #[arg(long, default_value_t = 0.0)]
    probability: f64,
    #[arg(long, value_enum, default_value = "full-hi")]
    exec_policy: ExecArg,
    #[arg(long, value_enum, default_value = "strictly-periodic")]
    release_policy: ReleaseArg,
    #[arg(long, value_enum, default_value = "drop-lc-in-component")]
    drop_policy: DropArg,
    /// Write a JSON-lines event trace here (single mechanism only).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "proposed")]
    mechanism: MechanismArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    FullHi,
    UniformBetween,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReleaseArg {
    StrictlyPeriodic,
    SporadicMinSeparation,
}

#[derive(Clone, Copy, ValueEnum)]
enum DropArg {
    DropLcInComponent,
    KeepLcBestEffort,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated bounds (default 0.4..=0.9 step 0.05, or 0.8,0.85,0.9 for PFJ).
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    #[arg(long)]
    tasksets: Option<usize>,
    /// 1000 task sets per point.
    #[arg(long)]
    full: bool,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    tl_fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.005,0.02,0.05,0.2,0.5")]
    probabilities: Vec<f64>,
    #[arg(long, value_enum, default_value = "flat")]
    framework: FrameworkArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    horizon: i64,
    #[arg(long)]
    optimized_dbf: bool,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveKind {
    Dbf,
    Sbf,
}

#[derive(Args)]
struct CurveArgs {
    /// Taskset file (dbf) or omitted (sbf from explicit interface flags).
    file: Option<PathBuf>,
    #[arg(long, value_enum)]
    what: CurveKind,
    /// Component id for dbf; defaults to the first component.
    #[arg(long)]
    component: Option<String>,
    /// Largest interval length.
    #[arg(long, default_value_t = 20)]
    t_max: i64,
    #[arg(long)]
    optimized_dbf: bool,
    #[arg(long)]
    period: Option<i64>,
    #[arg(long)]
    cap_lo: Option<i64>,
    #[arg(long)]
    cap_hi: Option<i64>,
    #[arg(long, default_value_t = 1)]
    units_per_tick: i64,
}

fn emit<T: Serialize>(value: &T, pretty: bool) -> Result<()> {
    let text = if pretty {
        serde_json::to_string_pretty(value)?
    } else {
        serde_json::to_string(value)?
    };
    println!("{text}");
    Ok(())
}

fn spec_value(spec: &SystemSpec) -> Value {
    serde_json::from_str(&render_spec(spec)).expect("rendered taskset is JSON")
}

fn load(path: &Path) -> Result<SystemSpec> {
    load_spec(path).with_context(|| format!("loading {}", path.display()))
}

fn analyze(a: &AnalyzeArgs, pretty: bool) -> Result<u8> {
    let mut spec = load(&a.common.file)?;
    if let Some(tl) = a.tl {
        spec = spec.with_tolerance(|c| tl.min(c.hc_count() as u32));
    }
    let opts = a.common.opts();
    let mut tighten_note = Value::Null;
    if a.tighten {
        match tighten_with(&spec, &opts) {
            Ok(s) => spec = s,
            Err(AnalysisError::NoFeasibleTightening) => {
                tighten_note = json!("no feasible tightening; deadlines left as given")
            }
            Err(e) => return Err(e.into()),
        }
    }
    let framework = a.framework.map(Framework::from).unwrap_or(spec.framework);
    let out = match framework {
        Framework::Flat => {
            let v = flat_test_with(&spec, &opts)?;
            json!({
                "framework": "flat",
                "schedulable": v.schedulable,
                "verdict": v,
                "tolerance": spec.tolerance_vector(),
                "tighten": tighten_note,
                "taskset": spec_value(&spec),
            })
        }
        Framework::Hierarchical => {
            let v = hierarchical_test_with(&spec, a.units_per_tick, &opts)?;
            json!({
                "framework": "hierarchical",
                "schedulable": v.schedulable,
                "verdict": v,
                "tolerance": spec.tolerance_vector(),
                "tighten": tighten_note,
            })
        }
    };
    let ok = out["schedulable"].as_bool() == Some(true);
    emit(&out, pretty)?;
    Ok(if ok { 0 } else { 1 })
}

fn sim_config(a: &SimulateArgs) -> SimConfig {
    SimConfig {
        horizon: a.horizon,
        seed: a.seed,
        hc_switch_probability: a.probability,
        hc_exec_policy: match a.exec_policy {
            ExecArg::FullHi => HcExecPolicy::FullHi,
            ExecArg::UniformBetween => HcExecPolicy::UniformBetween,
        },
        release_policy: match a.release_policy {
            ReleaseArg::StrictlyPeriodic => ReleasePolicy::StrictlyPeriodic,
            ReleaseArg::SporadicMinSeparation => ReleasePolicy::SporadicMinSeparation,
        },
        drop_policy_on_ims: match a.drop_policy {
            DropArg::DropLcInComponent => DropPolicy::DropLcInComponent,
            DropArg::KeepLcBestEffort => DropPolicy::KeepLcBestEffort,
        },
        record_trace: a.trace.is_some(),
    }
}

fn simulate_cmd(a: &SimulateArgs, pretty: bool) -> Result<u8> {
    let spec = load(&a.file)?;
    let cfg = sim_config(a);
    let mechanisms: &[Mechanism] = match a.mechanism {
        MechanismArg::Proposed => &[Mechanism::Proposed],
        MechanismArg::Classical => &[Mechanism::Classical],
        MechanismArg::Both => &[Mechanism::Proposed, Mechanism::Classical],
    };
    if mechanisms.len() == 1 {
        let report = simulate(&mechanisms[0].apply(&spec), &cfg)?;
        if let Some(path) = &a.trace {
            let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            report.write_trace(io::BufWriter::new(f))?;
        }
        emit(&report, pretty)?;
        return Ok(0);
    }
    if a.trace.is_some() {
        bail!("--trace needs a single mechanism");
    }
    let runs = compare_mechanisms(&spec, &cfg, mechanisms)?;
    let out: Vec<Value> = runs
        .into_iter()
        .map(|(m, r)| json!({"mechanism": m, "report": r}))
        .collect();
    emit(&json!({"seed": a.seed, "runs": out}), pretty)?;
    Ok(0)
}

fn sweep_config(a: &SweepArgs, pfj: bool) -> SweepConfig {
    let default_bounds = if pfj { vec![0.8, 0.85, 0.9] } else { grid(0.4, 0.9, 0.05) };
    SweepConfig {
        bounds: a.bounds.clone().unwrap_or(default_bounds),
        tasksets_per_point: a.tasksets.unwrap_or(if a.full { 1000 } else { 100 }),
        tl_fractions: a.tl_fractions.clone(),
        probabilities: a.probabilities.clone(),
        framework: a.framework.into(),
        seed: a.seed,
        horizon: a.horizon,
        generator: GenConfig::default(),
        use_optimized: a.optimized_dbf,
    }
}

fn write_out(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn dump_curves(a: &CurveArgs) -> Result<u8> {
    let mut s = String::new();
    match a.what {
        CurveKind::Dbf => {
            let Some(file) = &a.file else { bail!("dbf curves need a taskset file") };
            let spec = load(file)?;
            let comp = match &a.component {
                Some(id) => spec
                    .components
                    .iter()
                    .find(|c| &c.id == id)
                    .with_context(|| format!("no component {id}"))?,
                None => spec.components.first().context("taskset has no components")?,
            };
            s.push_str("t,t_E,t_I,dbf\n");
            for t in 0..=a.t_max {
                for t_e in 0..=t {
                    for t_i in 0..=t_e {
                        let msi = ModeSwitchInstants::new(t, t_e, t_i)?;
                        let v = if a.optimized_dbf {
                            dbf_component_optimized(comp, msi)?
                        } else {
                            dbf_component(comp, msi)?
                        };
                        s.push_str(&format!("{t},{t_e},{t_i},{v}\n"));
                    }
                }
            }
        }
        CurveKind::Sbf => {
            let (Some(p), Some(cl), Some(ch)) = (a.period, a.cap_lo, a.cap_hi) else {
                bail!("sbf curves need --period, --cap-lo and --cap-hi (in units)");
            };
            let iface = MCPRInterface::new(p, mcs_kit::model::CriticalityLevel::HC, cl, ch, a.units_per_tick)?;
            s.push_str("t_E,t,sbf_A,sbf_B,sbf\n");
            for t in 0..=a.t_max {
                for t_e in 0..=t {
                    let (pa, pb) = if t_e == t {
                        let v = sbf_lc(&iface, t);
                        (v, v)
                    } else {
                        (sbf_pattern_a(&iface, t_e, t)?, sbf_pattern_b(&iface, t_e, t)?)
                    };
                    s.push_str(&format!("{t_e},{t},{pa},{pb},{}\n", sbf(&iface, t_e, t)));
                }
            }
        }
    }
    io::stdout().write_all(s.as_bytes())?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    let pretty = cli.pretty;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.cmd {
        Cmd::Analyze(a) => analyze(&a, pretty),
        Cmd::Tighten(c) => {
            let spec = load(&c.file)?;
            match tighten_with(&spec, &c.opts()) {
                Ok(s) => {
                    emit(&spec_value(&s), pretty)?;
                    Ok(0)
                }
                Err(AnalysisError::NoFeasibleTightening) => {
                    emit(&json!({"schedulable": false, "error": "no feasible tightening found"}), pretty)?;
                    Ok(1)
                }
                Err(e) => Err(e.into()),
            }
        }
        Cmd::MaxTl { common, tighten } => {
            let spec = load(&common.file)?;
            let r = if tighten {
                max_tolerance_tightened(&spec, &common.opts())?
            } else {
                max_tolerance_with(&spec, &common.opts())?
            };
            emit(&r, pretty)?;
            Ok(match r {
                mcs_kit::analysis::ToleranceResult::Unschedulable => 1,
                _ => 0,
            })
        }
        Cmd::Interface {
            common,
            period,
            units_per_tick,
        } => {
            let spec = load(&common.file)?;
            let mut out = Vec::new();
            let mut all = true;
            for c in &spec.components {
                let mut c = c.clone();
                if c.interface_period.is_none() {
                    c.interface_period = period;
                }
                let r = generate_interface_with(&c, units_per_tick)?;
                all &= r.feasible;
                out.push(json!({"component": c.id, "interface": r}));
            }
            emit(&out, pretty)?;
            Ok(if all { 0 } else { 1 })
        }
        Cmd::Generate(g) => {
            for i in 0..g.count as u64 {
                let spec = generate(&GenConfig {
                    target_bound: g.bound,
                    hc_probability: g.hc_probability,
                    seed: g.seed.wrapping_add(i),
                    ..GenConfig::default()
                })?;
                let spec = experiment::tolerance_for(&spec, g.tl_fraction);
                // the taskset format has no seed field; echo it on stderr
                eprintln!("seed {}", g.seed.wrapping_add(i));
                let v = spec_value(&spec);
                if g.count == 1 {
                    emit(&v, pretty)?;
                } else {
                    println!("{}", serde_json::to_string(&v)?);
                }
            }
            Ok(0)
        }
        Cmd::Simulate(a) => simulate_cmd(&a, pretty),
        Cmd::SweepSched(a) => {
            let rows = experiment::sweep_schedulability(&sweep_config(&a, false))?;
            write_out(&experiment::sched_csv(&rows), &a.out)?;
            Ok(0)
        }
        Cmd::SweepPfj(a) => {
            let rows = experiment::sweep_pfj(&sweep_config(&a, true))?;
            write_out(&experiment::pfj_csv(&rows), &a.out)?;
            Ok(0)
        }
        Cmd::DumpCurves(a) => dump_curves(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
