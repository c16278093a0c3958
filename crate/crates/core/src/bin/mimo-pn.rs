use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mimo_powernorm::experiment::{self, Engine, ExperimentSpec, RunOptions};
use mimo_powernorm::Error;

#[derive(Parser)]
#[command(name = "mimo-pn", version, about = "Massive MIMO downlink precoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV files and manifest.
    Run(Target),
    /// Check an experiment for assumption violations without running it.
    Validate(Target),
    /// List the built-in experiments.
    ListExperiments,
}

#[derive(Args)]
struct Target {
    /// Built-in experiment name (see `list-experiments`).
    name: Option<String>,
    /// Experiment file in TOML.
    #[arg(long, conflicts_with = "name")]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of MC, DE, ClosedForm.
    #[arg(long, value_delimiter = ',')]
    engines: Option<Vec<Engine>>,
    #[arg(long)]
    threads: Option<usize>,
}

struct Failure {
    code: u8,
    report: serde_json::Value,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::AssumptionViolated { .. } => "assumption_violated",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Inapplicable { .. } => "inapplicable",
            Error::NoConvergence { .. } => "no_convergence",
            _ => "numerical",
        };
        Failure {
            code: 1,
            report: json!({ "status": "error", "kind": kind, "message": e.to_string() }),
        }
    }
}

fn load(t: &Target) -> Result<ExperimentSpec, Failure> {
    let mut spec = match (&t.name, &t.config) {
        (_, Some(path)) => ExperimentSpec::load(path)?,
        (Some(name), None) => experiment::builtin(name)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{name}`")))?,
        (None, None) => return Err(Error::Config("give an experiment name or --config".into()).into()),
    };
    if let Some(s) = t.seed {
        spec.seed = s;
    }
    if let Some(n) = t.trials {
        spec.trials = n;
    }
    if let Some(e) = &t.engines {
        spec.engines = e.clone();
    }
    Ok(spec)
}

fn check(spec: &ExperimentSpec) -> Result<(), Failure> {
    let diagnostics = experiment::validate(spec);
    if diagnostics.is_empty() {
        return Ok(());
    }
    Err(Failure {
        code: 2,
        report: json!({ "status": "invalid", "experiment": spec.name, "diagnostics": diagnostics }),
    })
}

fn run(cli: Cli) -> Result<serde_json::Value, Failure> {
    match cli.command {
        Command::ListExperiments => Ok(json!(experiment::list_experiments()
            .into_iter()
            .map(|(name, description)| json!({ "name": name, "description": description }))
            .collect::<Vec<_>>())),
        Command::Validate(t) => {
            let spec = load(&t)?;
            check(&spec)?;
            Ok(json!({ "status": "ok", "experiment": spec.name, "diagnostics": [] }))
        }
        Command::Run(t) => {
            let spec = load(&t)?;
            check(&spec)?;
            let out = t
                .out
                .or_else(|| spec.output.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(&spec.name));
            let summary = experiment::run_experiment(&spec, &out, RunOptions { threads: t.threads })?;
            Ok(json!({ "status": "ok", "summary": summary }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = json!({ "status": "error", "kind": "usage", "message": e.kind().to_string(), "detail": e.to_string() });
            eprintln!("{report}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.report);
            ExitCode::from(f.code)
        }
    }
}
