//! The `bandit-sim` command line.
//!
//! Every subcommand reads one JSON config (`"schema": 1`). The config is
//! fully validated, instance construction included, before any simulation
//! starts. Exit codes: 0 on success, 1 on a runtime failure, 2 on a
//! configuration error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::curves::CurveSpec;
use crate::environment::Instance;
use crate::error::Error;
use crate::harness::{
    completion_count_diagnostic, fit_scaling, good_event_diagnostic, mean_stderr, run_sweep,
    write_results_csv, write_summary_csv, Experiment, InstanceSource, RunOptions, ViolationReport,
};
use crate::oracle;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "bandit-sim",
    version,
    about = "Budget-allocation bandit simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replications at one horizon and write the results CSV.
    Run(CommonArgs),
    /// Sweep horizons, write the summary CSV and print the log-log slope.
    Sweep(CommonArgs),
    /// Check confidence coverage and completion concentration.
    Diagnose(CommonArgs),
    /// Query the allocation oracle.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleAction {
    /// Maximize sum_k m_k F_k(x_k) and print the result as JSON.
    Solve(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces the master seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "BANDIT_SIM_JOBS", default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub quiet: bool,
}

/// Experiment config shared by `run`, `sweep` and `diagnose`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub schema: u64,
    #[serde(default)]
    pub id: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub horizons: Option<Vec<u64>>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default)]
    pub instance: Option<Instance>,
    #[serde(default)]
    pub generator: Option<InstanceSource>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    pub schema: u64,
    pub weights: Vec<f64>,
    pub curves: Vec<CurveSpec>,
    #[serde(default)]
    pub method: OracleChoice,
    #[serde(default)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleChoice {
    #[default]
    Auto,
    Concave,
    Step,
    Grid,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    match value.get("schema").and_then(|v| v.as_u64()) {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(CliError::Config(format!(
                "field \"schema\": unsupported version {v}, expected {SCHEMA_VERSION}"
            )))
        }
        None => return Err(CliError::Config("missing field `schema`".into())),
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl ExperimentFile {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let mut cfg: ExperimentFile = read_json(path)?;
        if let Some(s) = seed_override {
            cfg.seed = s;
        }
        if cfg.replications == 0 {
            return Err(CliError::Config(
                "field \"replications\" must be at least 1".into(),
            ));
        }
        if let Some(d) = cfg.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(CliError::Config(format!(
                    "field \"delta\" must lie in (0, 1), got {d}"
                )));
            }
        }
        if let Some(id) = &cfg.id {
            if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
                return Err(CliError::Config(
                    "field \"id\" must be non-empty and free of commas, quotes and newlines".into(),
                ));
            }
        }
        if cfg.instance.is_some() == cfg.generator.is_some() {
            return Err(CliError::Config(
                "exactly one of the fields \"instance\" and \"generator\" must be given".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn source(&self) -> InstanceSource {
        match (&self.instance, &self.generator) {
            (Some(instance), _) => InstanceSource::Fixed {
                instance: instance.clone(),
            },
            (None, Some(g)) => g.clone(),
            (None, None) => unreachable!("checked on load"),
        }
    }

    pub fn label(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| self.source().family().to_string())
    }

    fn require_horizon(&self) -> Result<u64, CliError> {
        match self.horizon {
            None => Err(CliError::Config("missing field `horizon`".into())),
            Some(0) => Err(CliError::Config(
                "field \"horizon\" must be at least 1".into(),
            )),
            Some(t) => Ok(t),
        }
    }

    /// Builds the instance for one horizon so constructor errors surface as
    /// configuration errors before any simulation.
    fn probe(&self, horizon: u64) -> Result<(), CliError> {
        let instance = self
            .source()
            .build(horizon, self.seed)
            .map_err(|e| CliError::Config(format!("field \"{}\": {e}", self.source_field())))?;
        crate::environment::optimal_value(&instance).map_err(config_err)?;
        Ok(())
    }

    fn source_field(&self) -> &'static str {
        if self.instance.is_some() {
            "instance"
        } else {
            "generator"
        }
    }

    fn experiment(&self) -> Result<Experiment, CliError> {
        let horizon = self.require_horizon()?;
        if let Some(cps) = &self.checkpoints {
            if cps.is_empty()
                || cps.windows(2).any(|w| w[1] <= w[0])
                || cps.iter().any(|&c| c == 0 || c > horizon)
            {
                return Err(CliError::Config(format!(
                    "field \"checkpoints\" must be strictly ascending within [1, {horizon}]"
                )));
            }
        }
        self.probe(horizon)?;
        Ok(Experiment {
            source: self.source(),
            horizon,
            replications: self.replications,
            seed: self.seed,
            options: RunOptions {
                delta_override: self.delta,
                checkpoints: self.checkpoints.clone().unwrap_or_default(),
                record_trace: false,
            },
        })
    }
}

/// Output sink: the `--out` file, or stdout.
fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

/// Human-readable lines go to stdout, or to stderr when stdout carries data.
struct Console {
    quiet: bool,
    to_stderr: bool,
}

impl Console {
    fn new(args: &CommonArgs) -> Self {
        Console {
            quiet: args.quiet,
            to_stderr: args.out.is_none(),
        }
    }

    fn say(&self, line: &str) {
        if self.quiet {
            return;
        }
        if self.to_stderr {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
}

fn jobs(args: &CommonArgs) -> usize {
    args.jobs.max(1)
}

fn finish(mut out: Box<dyn Write>) -> Result<(), CliError> {
    out.flush().map_err(runtime_err)
}

pub fn cmd_run(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = ExperimentFile::load(&args.config, args.seed)?;
    let exp = cfg.experiment()?;
    let runs = exp.run(jobs(args)).map_err(runtime_err)?;
    let k = cfg.source().task_count();

    let mut out = open_out(args.out.as_deref())?;
    write_results_csv(&mut out, &cfg.label(), k, &runs).map_err(runtime_err)?;
    finish(out)?;

    let finals: Vec<f64> = runs.iter().map(|r| r.final_regret()).collect();
    let (mean, se) = mean_stderr(&finals);
    let report = good_event_diagnostic(&runs, k);
    let console = Console::new(args);
    console.say(&format!(
        "final mean regret: {mean:.6} (stderr {se:.6}, {} runs)",
        runs.len()
    ));
    console.say(&format!(
        "good-event violation rate: {:.6} ({}/{})",
        report.frequency, report.violating_runs, report.runs
    ));
    Ok(())
}

pub fn cmd_sweep(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = ExperimentFile::load(&args.config, args.seed)?;
    let horizons = cfg
        .horizons
        .clone()
        .ok_or_else(|| CliError::Config("missing field `horizons`".into()))?;
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "field \"horizons\" must be non-empty and strictly ascending".into(),
        ));
    }
    for &t in &horizons {
        if t == 0 {
            return Err(CliError::Config(
                "field \"horizons\" entries must be at least 1".into(),
            ));
        }
        cfg.probe(t)?;
    }
    let source = cfg.source();
    let rows = run_sweep(
        &source,
        &horizons,
        cfg.replications,
        cfg.seed,
        cfg.delta,
        jobs(args),
    )
    .map_err(runtime_err)?;

    let family = cfg
        .id
        .clone()
        .unwrap_or_else(|| source.family().to_string());
    let mut out = open_out(args.out.as_deref())?;
    write_summary_csv(&mut out, &family, source.task_count(), &rows).map_err(runtime_err)?;
    finish(out)?;

    let console = Console::new(args);
    for row in &rows {
        console.say(&format!(
            "T = {:>8}  mean regret {:>12.4}  stderr {:>10.4}",
            row.horizon, row.mean_regret, row.stderr
        ));
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_regret > 0.0)
        .map(|r| (r.horizon as f64, r.mean_regret))
        .collect();
    match fit_scaling(&points) {
        Ok(fit) => console.say(&format!(
            "slope: {:.4} (r² = {:.4})",
            fit.slope, fit.r_squared
        )),
        Err(_) => console.say("slope: insufficient points"),
    }
    Ok(())
}

fn diagnostic_line(r: &ViolationReport) -> String {
    format!(
        "{:<18} {:<22} {:<12.6} {}",
        r.name,
        r.bound_label(),
        r.frequency,
        if r.pass { "pass" } else { "fail" }
    )
}

pub fn cmd_diagnose(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = ExperimentFile::load(&args.config, args.seed)?;
    let exp = cfg.experiment()?;
    let runs = exp.run(jobs(args)).map_err(runtime_err)?;
    let k = cfg.source().task_count();
    let reports = [
        good_event_diagnostic(&runs, k),
        completion_count_diagnostic(&runs, k),
    ];

    if let Some(path) = &args.out {
        let mut out = open_out(Some(path))?;
        let write = |out: &mut Box<dyn Write>| -> io::Result<()> {
            writeln!(
                out,
                "diagnostic,bound,tolerance,runs,violating_runs,frequency,pass"
            )?;
            for r in &reports {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.name,
                    crate::harness::format_float(r.bound),
                    crate::harness::format_float(r.tolerance),
                    r.runs,
                    r.violating_runs,
                    crate::harness::format_float(r.frequency),
                    r.pass as u8
                )?;
            }
            Ok(())
        };
        write(&mut out).map_err(runtime_err)?;
        finish(out)?;
    }

    if !args.quiet {
        println!(
            "{:<18} {:<22} {:<12} status",
            "diagnostic", "bound", "observed"
        );
        for r in &reports {
            println!("{}", diagnostic_line(r));
        }
    }
    Ok(())
}

pub fn cmd_oracle_solve(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: OracleFile = read_json(&args.config)?;
    let m = &cfg.weights;
    let result = match cfg.method {
        OracleChoice::Auto => oracle::maximize(m, &cfg.curves),
        OracleChoice::Concave => oracle::maximize_concave(m, &cfg.curves),
        OracleChoice::Grid => oracle::maximize_grid(
            m,
            &cfg.curves,
            cfg.resolution.unwrap_or(oracle::DEFAULT_GRID_RESOLUTION),
        ),
        OracleChoice::Step => {
            let thresholds: Option<Vec<f64>> = cfg
                .curves
                .iter()
                .map(|c| match c {
                    CurveSpec::Step { threshold } => Some(*threshold),
                    _ => None,
                })
                .collect();
            match thresholds {
                Some(t) => oracle::maximize_step(m, &t),
                None => Err(Error::UnsupportedInstance(
                    "method \"step\" needs every curve to be a step curve".into(),
                )),
            }
        }
    };
    let result = result.map_err(|e| match e {
        Error::Capacity(_) => runtime_err(e),
        other => config_err(other),
    })?;
    let mut out = open_out(args.out.as_deref())?;
    let json = serde_json::to_string_pretty(&result).map_err(runtime_err)?;
    writeln!(out, "{json}").map_err(runtime_err)?;
    finish(out)
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Oracle {
            action: OracleAction::Solve(a),
        } => cmd_oracle_solve(a),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bandit-sim: {e}");
            e.exit_code()
        }
    }
}
