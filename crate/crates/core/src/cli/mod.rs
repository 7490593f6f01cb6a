//! Command-line front end: `check`, `hypotheses`, `simulate`, `reduce` and
//! `report`.

mod config;
mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::criteria::{check_theorems, derive_coefficients, CriterionError, CriterionReport, TheoremId, TuningParams};
use crate::problem::{builtin_example, check_hypotheses, HypothesisReport, ProblemError, ProblemSpec};
use crate::reduction::{reduce_trace, ReductionError};
use crate::sim::{
    default_initial_data, detect_sign_changes, simulate_pde, simulate_reduced, SignChangeReport, SimError,
    SimulationTrace, Trajectory, DEFAULT_SIGN_ATOL,
};

pub use config::{load_config, load_problem, parse_problem, save_problem, ConfigError, ProblemConfig};
pub use output::{format_f64, read_trace_csv, svg_plot, to_json, trace_csv, trajectory_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dampwave", version, about = "Oscillation criteria and simulators for damped quasilinear wave equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Evaluate the oscillation theorems.
    Check(CommonArgs),
    /// Sample the standing hypotheses on a grid.
    Hypotheses(CommonArgs),
    /// Simulate the reduced equation and the 1-D PDE.
    Simulate(CommonArgs),
    /// Reduce a stored PDE trace to v(t).
    Reduce(CommonArgs),
    /// Hypotheses, all theorems and the reduced simulation in one document.
    Report(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Problem file (TOML).
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    pub problem: Option<PathBuf>,
    /// Built-in example: 3.1 or 3.2.
    #[arg(long)]
    pub example: Option<String>,
    /// 2.1, 2.2, 2.3, 2.4 or all.
    #[arg(long, default_value = "all")]
    pub theorem: String,
    /// End of the simulation window and of the hypothesis sampling range.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Spatial grid points.
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated subset of json, csv, svg.
    #[arg(long, default_value = "json,csv,svg")]
    pub format: String,
    /// Evaluate the criteria even when hypothesis sampling finds violations.
    #[arg(long)]
    pub skip_hypotheses: bool,
    /// Trace CSV for `reduce`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Hypotheses,
    Simulate,
    Reduce,
    Report,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    File(PathBuf),
    Builtin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
    pub svg: bool,
}

impl Formats {
    pub fn parse(list: &str) -> Result<Self, RunError> {
        let mut f = Formats::default();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "json" => f.json = true,
                "csv" => f.csv = true,
                "svg" => f.svg = true,
                other => return Err(RunError::Config(format!("unknown format `{other}` (expected json, csv, svg)"))),
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ProblemSource,
    pub command: Command,
    pub theorems: Vec<TheoremId>,
    /// Overrides the problem file's `[tuning]` section.
    pub tuning: Option<TuningParams>,
    pub t_end: Option<f64>,
    pub dt: f64,
    pub nx: usize,
    pub relax_tol: f64,
    pub max_iter: usize,
    pub out_dir: PathBuf,
    pub formats: Formats,
    pub skip_hypotheses: bool,
    pub trace: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, source: ProblemSource) -> Self {
        Self {
            source,
            command,
            theorems: TheoremId::ALL.to_vec(),
            tuning: None,
            t_end: None,
            dt: 1e-3,
            nx: 51,
            relax_tol: 1e-8,
            max_iter: 200,
            out_dir: PathBuf::from("out"),
            formats: Formats { json: true, csv: true, svg: true },
            skip_hypotheses: false,
            trace: None,
        }
    }

    pub fn from_cli(cli: Cli) -> Result<Self, RunError> {
        let (command, a) = match cli.command {
            CommandArgs::Check(a) => (Command::Check, a),
            CommandArgs::Hypotheses(a) => (Command::Hypotheses, a),
            CommandArgs::Simulate(a) => (Command::Simulate, a),
            CommandArgs::Reduce(a) => (Command::Reduce, a),
            CommandArgs::Report(a) => (Command::Report, a),
        };
        let source = match (a.problem, a.example) {
            (Some(p), None) => ProblemSource::File(p),
            (None, Some(e)) => ProblemSource::Builtin(e),
            _ => return Err(RunError::Config("give exactly one of --problem and --example".into())),
        };
        let mut cfg = RunConfig::new(command, source);
        cfg.theorems = parse_theorems(&a.theorem)?;
        cfg.t_end = a.t_end;
        if let Some(dt) = a.dt {
            cfg.dt = dt;
        }
        if let Some(nx) = a.nx {
            cfg.nx = nx;
        }
        cfg.out_dir = a.out;
        cfg.formats = Formats::parse(&a.format)?;
        cfg.skip_hypotheses = a.skip_hypotheses;
        cfg.trace = a.trace;
        Ok(cfg)
    }
}

pub fn parse_theorems(s: &str) -> Result<Vec<TheoremId>, RunError> {
    if s.trim() == "all" {
        return Ok(TheoremId::ALL.to_vec());
    }
    s.split(',')
        .map(|t| t.trim().parse::<TheoremId>().map_err(|_| RunError::Config(format!("unknown theorem `{t}`"))))
        .collect()
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    ConfigFile(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("theorem {theorem}: {source}")]
    Criterion { theorem: TheoremId, source: CriterionError },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::ConfigFile(_) | RunError::Problem(_) | RunError::Output { .. } => {
                EXIT_CONFIG
            }
            RunError::Criterion { source: CriterionError::Parameter(_), .. } => EXIT_CONFIG,
            RunError::Simulation(SimError::InvalidInput(_)) => EXIT_CONFIG,
            RunError::Reduction(ReductionError::TooFewNodes { .. } | ReductionError::Shape { .. }) => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        }
    }

    fn kind(&self) -> &'static str {
        if self.exit_code() == EXIT_CONFIG {
            "config"
        } else {
            "numeric"
        }
    }

    /// Structured form written to stderr and `diagnostics.json`.
    pub fn diagnostic(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() } })
    }
}

/// Summary verdict of one theorem.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum SummaryVerdict {
    /// The report summary, e.g. `case (1): Oscillatory`.
    Evaluated(String),
    Skipped(String),
}

impl fmt::Display for SummaryVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummaryVerdict::Evaluated(s) => f.write_str(s),
            SummaryVerdict::Skipped(r) => write!(f, "Skipped({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub theorem: TheoremId,
    pub verdict: SummaryVerdict,
}

/// Everything produced by one run, before anything is written.
#[derive(Debug, Default)]
pub struct RunOutcome {
    /// Human-readable text for stdout.
    pub stdout: String,
    /// Warnings for stderr.
    pub warnings: Vec<String>,
    pub summary: Vec<SummaryRow>,
    pub reports: Vec<CriterionReport>,
    pub hypotheses: Option<HypothesisReport>,
    pub reduced: Option<Trajectory>,
    pub signs: Option<SignChangeReport>,
    pub trace: Option<SimulationTrace>,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    files: BTreeMap<String, Vec<u8>>,
}

impl RunOutcome {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }
}

const HYPOTHESIS_NT: usize = 200;

fn resolve(cfg: &RunConfig) -> Result<(ProblemSpec, TuningParams), RunError> {
    let (spec, file_tuning) = match &cfg.source {
        ProblemSource::Builtin(id) => (builtin_example(id)?, None),
        ProblemSource::File(path) => {
            let c = load_config(path)?;
            (c.spec, c.tuning)
        }
    };
    let tuning = cfg.tuning.clone().or(file_tuning).unwrap_or_default();
    tuning.validate().map_err(|e| RunError::Config(e.to_string()))?;
    Ok((spec, tuning))
}

fn t_end(cfg: &RunConfig, spec: &ProblemSpec, default_span: f64) -> Result<f64, RunError> {
    let t = cfg.t_end.unwrap_or(spec.t0 + default_span);
    if !(t > spec.t0 && t.is_finite()) {
        return Err(RunError::Config(format!("--t-end {t} must exceed t0 = {}", spec.t0)));
    }
    Ok(t)
}

fn hypotheses(cfg: &RunConfig, spec: &ProblemSpec) -> Result<HypothesisReport, RunError> {
    let end = t_end(cfg, spec, 99.0)?;
    Ok(check_hypotheses(spec, (spec.t0, end), HYPOTHESIS_NT, cfg.nx.max(2))?)
}

fn banner(report: &HypothesisReport) -> String {
    let violated: Vec<&str> = report.entries().into_iter().filter(|e| e.is_violated()).map(|e| e.id).collect();
    format!(
        "WARNING: hypothesis sampling found violations ({}); criteria evaluated anyway because of --skip-hypotheses",
        violated.join(", ")
    )
}

fn evaluate_theorems(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    tuning: &TuningParams,
    out: &mut RunOutcome,
) -> Result<(), RunError> {
    let hyp = hypotheses(cfg, spec)?;
    let gated = hyp.any_violated() && !cfg.skip_hypotheses;
    if hyp.any_violated() && cfg.skip_hypotheses {
        out.warnings.push(banner(&hyp));
    }
    out.hypotheses = Some(hyp);
    let mut summary = Vec::new();
    if gated {
        for id in TheoremId::ALL {
            let reason = if cfg.theorems.contains(&id) { "hypotheses violated" } else { "not selected" };
            summary.push(SummaryRow { theorem: id, verdict: SummaryVerdict::Skipped(reason.into()) });
        }
    } else {
        let mut results = BTreeMap::new();
        for (id, r) in check_theorems(spec, tuning, &cfg.theorems) {
            let report = r.map_err(|source| RunError::Criterion { theorem: id, source })?;
            results.insert(id.as_str(), report);
        }
        for id in TheoremId::ALL {
            let verdict = match results.get(id.as_str()) {
                Some(r) => SummaryVerdict::Evaluated(r.summary()),
                None => SummaryVerdict::Skipped("not selected".into()),
            };
            summary.push(SummaryRow { theorem: id, verdict });
        }
        out.reports = results.into_values().collect();
    }
    out.summary = summary;
    Ok(())
}

fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = String::from("theorem  verdict\n");
    for r in rows {
        s += &format!("{:<8} {}\n", r.theorem.as_str(), r.verdict);
    }
    s
}

fn hypothesis_lines(h: &HypothesisReport) -> String {
    let mut s = String::new();
    for e in h.entries() {
        let status = if e.is_satisfied() {
            "satisfied on grid".to_string()
        } else if e.is_violated() {
            let w = e.witnesses().first().map(|w| format!(" (e.g. {} at t = {})", w.check, w.t)).unwrap_or_default();
            format!("VIOLATED{w}")
        } else {
            "unchecked".to_string()
        };
        s += &format!("{:<9} {status}\n", e.id);
    }
    s
}

fn simulate_reduced_problem(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    tuning: &TuningParams,
) -> Result<Trajectory, RunError> {
    let end = t_end(cfg, spec, 59.0)?;
    let d = derive_coefficients(spec, tuning).map_err(|source| RunError::Criterion { theorem: TheoremId::T2_1, source })?;
    let p1 = |t: f64| d.p1(t);
    let q = |t: f64| d.Q(t);
    Ok(simulate_reduced(&p1, &q, &spec.m, (spec.t0, end), (1.0, 0.0), cfg.dt, cfg.relax_tol, cfg.max_iter)?)
}

#[derive(Debug, Serialize)]
struct SimulationSummary<'a> {
    reduced: ReducedSummary<'a>,
    pde: PdeSummary,
}

#[derive(Debug, Serialize)]
struct ReducedSummary<'a> {
    window: (f64, f64),
    dt: f64,
    initial: (f64, f64),
    relaxation: &'a crate::sim::RelaxationInfo,
    sign_changes: &'a SignChangeReport,
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum PdeSummary {
    Completed { scheme: crate::sim::TraceScheme, sign_changes: SignChangeReport },
    BlowUp { t: f64, message: String, scheme: crate::sim::TraceScheme, sign_changes: SignChangeReport },
    NotRun { reason: String },
}

fn reduced_signs(tr: &Trajectory) -> SignChangeReport {
    detect_sign_changes(&tr.t, &tr.v, DEFAULT_SIGN_ATOL)
}

/// Evaluates a configuration. Nothing touches the file system except
/// reading the problem file and, for `reduce`, the trace.
pub fn evaluate(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let (spec, tuning) = resolve(cfg)?;
    let mut out = RunOutcome::default();
    match cfg.command {
        Command::Hypotheses => {
            let h = hypotheses(cfg, &spec)?;
            out.stdout = hypothesis_lines(&h);
            out.files.insert("hypotheses.json".into(), to_json(&h).into_bytes());
            out.hypotheses = Some(h);
        }
        Command::Check => {
            evaluate_theorems(cfg, &spec, &tuning, &mut out)?;
            out.stdout = summary_table(&out.summary);
            for r in &out.reports {
                out.files.insert(format!("report_{}.json", r.theorem.as_str().replace('.', "_")), to_json(r).into_bytes());
            }
            out.files.insert("summary.json".into(), to_json(&out.summary).into_bytes());
            if let Some(h) = &out.hypotheses {
                out.files.insert("hypotheses.json".into(), to_json(h).into_bytes());
            }
        }
        Command::Simulate => {
            let reduced = simulate_reduced_problem(cfg, &spec, &tuning)?;
            let signs = reduced_signs(&reduced);
            let end = reduced.end();
            let pde = match (&spec.domain, default_initial_data(&spec)) {
                (crate::problem::Domain::Box { .. }, _) => {
                    Err(PdeSummary::NotRun { reason: "PDE simulation supports intervals only".into() })
                }
                (_, Err(e)) => Err(PdeSummary::NotRun { reason: e.to_string() }),
                (_, Ok(init)) => match simulate_pde(&spec, cfg.nx, cfg.dt, (spec.t0, end), &init, cfg.relax_tol, cfg.max_iter) {
                    Ok(trace) => Ok((trace, None)),
                    Err(SimError::BlowUp { t, partial, guard }) => {
                        let msg = format!("|u| exceeded {guard} at t = {t}; partial trace kept");
                        Ok((*partial, Some((t, msg))))
                    }
                    Err(e @ SimError::InvalidInput(_)) => return Err(e.into()),
                    Err(e) => Err(PdeSummary::NotRun { reason: e.to_string() }),
                },
            };
            let pde_summary = match pde {
                Err(s) => s,
                Ok((trace, blow)) => {
                    let sc = if trace.t.len() >= 2 {
                        reduce_trace(&trace, spec.alpha, &spec.bc).map(|v| reduced_signs(&v))?
                    } else {
                        detect_sign_changes(&[], &[], DEFAULT_SIGN_ATOL)
                    };
                    if cfg.formats.csv {
                        out.files.insert("trace.csv".into(), trace_csv(&trace));
                    }
                    let scheme = trace.scheme.clone();
                    out.trace = Some(trace);
                    match blow {
                        None => PdeSummary::Completed { scheme, sign_changes: sc },
                        Some((t, message)) => {
                            out.warnings.push(format!("PDE run stopped: {message}"));
                            PdeSummary::BlowUp { t, message, scheme, sign_changes: sc }
                        }
                    }
                }
            };
            let summary = SimulationSummary {
                reduced: ReducedSummary {
                    window: (reduced.start(), reduced.end()),
                    dt: reduced.dt,
                    initial: (1.0, 0.0),
                    relaxation: &reduced.relaxation,
                    sign_changes: &signs,
                },
                pde: pde_summary,
            };
            out.stdout = format!(
                "reduced: {} sign change(s){}; relaxation {} after {} sweeps (delta {})\n",
                signs.count,
                signs.first.map(|t| format!(", first at t = {}", format_f64(t))).unwrap_or_default(),
                if reduced.relaxation.converged { "converged" } else { "NOT converged" },
                reduced.relaxation.iterations,
                format_f64(reduced.relaxation.final_delta),
            );
            out.stdout += &match &summary.pde {
                PdeSummary::Completed { sign_changes, .. } => format!("pde: completed, {} sign change(s) of v\n", sign_changes.count),
                PdeSummary::BlowUp { t, .. } => format!("pde: stopped at t = {}\n", format_f64(*t)),
                PdeSummary::NotRun { reason } => format!("pde: not run ({reason})\n"),
            };
            out.files.insert("simulation.json".into(), to_json(&summary).into_bytes());
            out.files.insert("reduced.csv".into(), trajectory_csv(&reduced));
            out.files.insert("signs.json".into(), to_json(&signs).into_bytes());
            out.files.insert("reduced.svg".into(), svg_plot("reduced v(t)", &reduced.t, &reduced.v, &signs.crossings).into_bytes());
            out.signs = Some(signs);
            out.reduced = Some(reduced);
        }
        Command::Reduce => {
            let path = cfg.trace.as_ref().ok_or_else(|| RunError::Config("reduce needs --trace PATH".into()))?;
            let bytes = std::fs::read(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
            let trace = read_trace_csv(&bytes).map_err(|e| RunError::Config(e.to_string()))?;
            let v = reduce_trace(&trace, spec.alpha, &spec.bc)?;
            let signs = reduced_signs(&v);
            out.stdout = format!("v(t): {} rows, {} sign change(s)\n", v.len(), signs.count);
            out.files.insert("reduced.csv".into(), trajectory_csv(&v));
            out.files.insert("signs.json".into(), to_json(&signs).into_bytes());
            out.files.insert("reduced.svg".into(), svg_plot("v(t) from trace", &v.t, &v.v, &signs.crossings).into_bytes());
            out.signs = Some(signs);
            out.reduced = Some(v);
        }
        Command::Report => {
            evaluate_theorems(cfg, &spec, &tuning, &mut out)?;
            let reduced = simulate_reduced_problem(cfg, &spec, &tuning)?;
            let signs = reduced_signs(&reduced);
            #[derive(Serialize)]
            struct Report<'a> {
                problem: String,
                summary: &'a [SummaryRow],
                hypotheses: &'a Option<HypothesisReport>,
                theorems: &'a [CriterionReport],
                reduced_simulation: ReducedSummary<'a>,
            }
            let doc = Report {
                problem: save_problem(&spec, Some(&tuning)),
                summary: &out.summary,
                hypotheses: &out.hypotheses,
                theorems: &out.reports,
                reduced_simulation: ReducedSummary {
                    window: (reduced.start(), reduced.end()),
                    dt: reduced.dt,
                    initial: (1.0, 0.0),
                    relaxation: &reduced.relaxation,
                    sign_changes: &signs,
                },
            };
            out.files.insert("report.json".into(), to_json(&doc).into_bytes());
            out.files.insert("reduced.csv".into(), trajectory_csv(&reduced));
            out.files.insert("reduced.svg".into(), svg_plot("reduced v(t)", &reduced.t, &reduced.v, &signs.crossings).into_bytes());
            out.stdout = summary_table(&out.summary);
            out.stdout += &format!("reduced simulation: {} sign change(s)\n", signs.count);
            out.signs = Some(signs);
            out.reduced = Some(reduced);
        }
    }
    Ok(out)
}

fn wanted(name: &str, f: Formats) -> bool {
    match Path::new(name).extension().and_then(|e| e.to_str()) {
        Some("json") => f.json,
        Some("csv") => f.csv,
        Some("svg") => f.svg,
        _ => true,
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), RunError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|source| RunError::Output { path, source })
}

/// Evaluates and then writes the selected artifacts into the output
/// directory.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let mut out = evaluate(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| RunError::Output { path: cfg.out_dir.clone(), source })?;
    for (name, bytes) in &out.files {
        if wanted(name, cfg.formats) {
            write_file(&cfg.out_dir, name, bytes)?;
            out.artifacts.push(PathBuf::from(name));
        }
    }
    Ok(out)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| run(&cfg).map(|o| (cfg, o)));
    match result {
        Ok((_, out)) => {
            for w in &out.warnings {
                eprintln!("{w}");
            }
            print!("{}", out.stdout);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.diagnostic()).expect("diagnostic JSON"));
            e.exit_code()
        }
    }
}
