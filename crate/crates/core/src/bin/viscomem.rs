//! Command-line front end: one subcommand per experiment kind.
//!
//! Exit status: 0 all checks pass, 1 a check failed, 2 usage or config
//! error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use viscomem::config::{ExperimentKind, ExperimentSpec};
use viscomem::experiment::{self, EXIT_USAGE};
use viscomem::Error;

#[derive(Parser)]
#[command(name = "viscomem", version, about = "Fading-memory flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature weights, positivity and sum-of-exponentials checks.
    KernelCheck(Common),
    /// Time-dependent run with energy diagnostics.
    RunTransient(Common),
    /// Steady problem with effective viscosity.
    SolveSteady(Common),
    /// Fitted decay rates of the distance to the steady state.
    DecayStudy(Common),
    /// Observed orders under grid or step refinement.
    ConvergenceStudy(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; missing keys take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if needed.
    #[arg(long)]
    out: PathBuf,
    /// Seed for every random draw; overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentSpec, Error> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", common.config.display())))?;
    let mut spec = ExperimentSpec::parse_unvalidated(&text)?;
    if text_sets_kind(&text) && spec.kind != kind {
        return Err(Error::Validation {
            key: "experiment.kind".into(),
            msg: format!(
                "config declares {} but the subcommand is {}",
                spec.kind.name(),
                kind.name()
            ),
        });
    }
    spec.kind = kind;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn text_sets_kind(text: &str) -> bool {
    let mut section = "";
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim();
        } else if section == "experiment" && line.split('=').next().map(str::trim) == Some("kind") {
            return true;
        }
    }
    false
}

fn fail(out: &Path, kind: ExperimentKind, err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if let Err(e) = experiment::write_error_record(out, Some(kind), err) {
        eprintln!("error: could not write error record: {e}");
    }
    ExitCode::from(experiment::exit_code(err) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (kind, common) = match &cli.command {
        Command::KernelCheck(c) => (ExperimentKind::KernelCheck, c),
        Command::RunTransient(c) => (ExperimentKind::RunTransient, c),
        Command::SolveSteady(c) => (ExperimentKind::SolveSteady, c),
        Command::DecayStudy(c) => (ExperimentKind::DecayStudy, c),
        Command::ConvergenceStudy(c) => (ExperimentKind::ConvergenceStudy, c),
    };
    let spec = match load(kind, common) {
        Ok(s) => s,
        Err(e) => return fail(&common.out, kind, &e),
    };
    match experiment::run_experiment(&spec, &common.out) {
        Ok(outcome) => {
            print!("{}", outcome.summary());
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => fail(&common.out, kind, &e),
    }
}
