//! `irc`: run contact scenarios, convergence studies, clutter sweeps and the
//! potential-existence checks.
//!
//! Exit codes: 0 success, 1 solver non-convergence or failed checks, 2 usage
//! or configuration error.

mod config;
mod output;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irc_core::exec::{configure_threads, Execution};
use irc_core::potentials::ModelId;
use irc_core::scenarios::{convergence_study, run_scenario, sweep, ScenarioId, ScenarioSpec, SweepParam};
use irc_core::validation::{validate, FieldId, SamplingSpec};

use config::RunConfig;

const THREADS_ENV: &str = "IRC_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] irc_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(irc_core::Error::InvalidParameter { .. } | irc_core::Error::Mismatch(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "irc", version, about = "Convex incremental contact scenarios and model checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory CSV.
    Run(RunArgs),
    /// Convergence study of one or more models against a Lagged reference.
    Study(StudyArgs),
    /// Clutter metrics over a stiffness or time-step sweep.
    Sweep(SweepArgs),
    /// Gradient, curl and Hessian checks of the contact impulse fields.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// key=value config file; later flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    duration: Option<String>,
    /// Extra key=value assignment, applied last (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    model: Option<String>,
    /// Summary file; stderr when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_delimiter = ',', default_value = "sap,lagged,similar")]
    models: Vec<String>,
    /// Time steps, largest first; defaults depend on the scenario.
    #[arg(long, value_delimiter = ',')]
    ladder: Vec<f64>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_delimiter = ',', default_value = "sap,lagged,similar")]
    models: Vec<String>,
    /// `k` (stiffness) or `dt` (time step).
    #[arg(long, default_value = "k")]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Length of the trailing window used for the penetration metrics, s.
    #[arg(long, default_value_t = 1.0)]
    tail: f64,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Fields to check: model ids, `naive`, or `all`.
    #[arg(long = "model", value_delimiter = ',', default_value = "all")]
    models: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Override the sampled Hunt & Crossley dissipation, s/m.
    #[arg(long, allow_hyphen_values = true)]
    dissipation: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

const GRADIENT_TOLERANCE: f64 = 1e-6;
const CURL_TOLERANCE: f64 = 1e-7;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = threads_from_env() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, spec)) => {
            eprintln!("error: {e}");
            if let Some(spec) = spec {
                eprintln!("effective config:");
                for (k, v) in spec.to_key_values() {
                    eprintln!("  {k}={v}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn threads_from_env() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    configure_threads(n).map_err(CliError::Config)
}

type Failure = (CliError, Option<Box<ScenarioSpec>>);

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(a) => cmd_run(a),
        Command::Study(a) => cmd_study(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a).map_err(|e| (e, None)),
    }
}

fn no_spec(e: impl Into<CliError>) -> Failure {
    (e.into(), None)
}

/// Config file, then flags, then `--set` assignments.
fn collect(args: &SpecArgs, model: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flags =
        [("scenario", args.scenario.as_deref()), ("model", model), ("dt", args.dt.as_deref()), ("duration", args.duration.as_deref())];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.push(k, v)?;
        }
    }
    for s in &args.sets {
        cfg.push_assignment(s)?;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => output::write_atomic(p, contents)?,
        None => std::io::stdout().lock().write_all(contents.as_bytes())?,
    }
    Ok(())
}

fn exec_mode(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn parse_models(names: &[String]) -> Result<Vec<ModelId>, CliError> {
    names.iter().map(|n| n.parse::<ModelId>().map_err(CliError::from)).collect()
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let mut cfg = collect(&a.spec, a.model.as_deref()).map_err(no_spec)?;
    if let Some(s) = a.summary {
        cfg.summary = Some(s);
    }
    let spec = cfg.spec(ScenarioId::Belt).map_err(no_spec)?;
    let fail = |e: CliError| (e, Some(Box::new(spec.clone())));
    let traj = run_scenario(&spec).map_err(|e| fail(e.into()))?;
    emit(cfg.out.as_deref(), &output::trajectory_csv(&traj)).map_err(fail)?;
    let summary = output::run_summary(&traj);
    match &cfg.summary {
        Some(p) => output::write_atomic(p, &summary).map_err(|e| fail(e.into()))?,
        None => eprint!("{summary}"),
    }
    Ok(())
}

fn default_ladder(scenario: ScenarioId) -> Vec<f64> {
    match scenario {
        ScenarioId::Belt => vec![5e-2, 1e-2, 2e-3],
        ScenarioId::FallingSphere => vec![1e-2, 2e-3, 4e-4],
        ScenarioId::SlidingRod => vec![1e-4, 5e-5, 1e-5],
        ScenarioId::Clutter => vec![1e-2, 5e-3, 2e-3],
    }
}

fn cmd_study(a: StudyArgs) -> Result<(), Failure> {
    let cfg = collect(&a.spec, None).map_err(no_spec)?;
    let spec = cfg.spec(ScenarioId::Belt).map_err(no_spec)?;
    let models = parse_models(&a.models).map_err(no_spec)?;
    let ladder = if a.ladder.is_empty() { default_ladder(spec.scenario) } else { a.ladder };
    let mut tables = Vec::with_capacity(models.len());
    for m in models {
        let s = spec.with_model(m);
        let t = convergence_study(&s, &ladder, exec_mode(a.sequential)).map_err(|e| (e.into(), Some(Box::new(s.clone()))))?;
        tables.push(t);
    }
    emit(cfg.out.as_deref(), &output::study_csv(&spec, &tables)).map_err(|e| (e, Some(Box::new(spec.clone()))))
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let cfg = collect(&a.spec, None).map_err(no_spec)?;
    let spec = cfg.spec(ScenarioId::Clutter).map_err(no_spec)?;
    let models = parse_models(&a.models).map_err(no_spec)?;
    let param: SweepParam = a.param.parse().map_err(no_spec)?;
    let fail = |e: CliError| (e, Some(Box::new(spec.clone())));
    let entries = sweep(&spec, &models, param, &a.values, a.tail, exec_mode(a.sequential)).map_err(|e| fail(e.into()))?;
    emit(cfg.out.as_deref(), &output::sweep_csv(&spec, param, a.tail, &entries)).map_err(fail)
}

fn cmd_validate(a: ValidateArgs) -> Result<(), CliError> {
    let fields: Vec<FieldId> = if a.models.iter().any(|m| m == "all") {
        FieldId::ALL.to_vec()
    } else {
        a.models.iter().map(|m| m.parse::<FieldId>()).collect::<Result<_, _>>()?
    };
    let mut sampling = SamplingSpec::canonical(a.seed).with_samples(a.samples);
    if let Some(d) = a.dissipation {
        sampling = sampling.with_dissipation(d);
    }
    let mut out = String::new();
    let mut failed = Vec::new();
    for field in fields {
        let report = validate(field, &sampling, exec_mode(a.sequential))?;
        let verdict = match field {
            FieldId::Naive => None,
            FieldId::Model(_) => {
                Some(report.max_gradient_error < GRADIENT_TOLERANCE && report.max_curl_asymmetry < CURL_TOLERANCE && report.psd_pass())
            }
        };
        if verdict == Some(false) {
            failed.push(field.to_string());
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&output::validation_block(&report, verdict));
    }
    emit(a.out.as_deref(), &out)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(format!("checks failed for {}", failed.join(", "))))
    }
}
