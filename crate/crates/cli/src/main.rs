use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddform::Error;

mod config;
mod runner;

use config::{Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ddform", version, about = "Distinguished solutions and leading-term asymptotics for double divergence form equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Refine the mesh `k` times (doubling nodes per decade and angular order each time).
    #[arg(long, global = true, default_value_t = 0)]
    refine: u32,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run every experiment listed in the configuration.
    Run,
    /// Check admissibility of the coefficient modulus.
    CheckOmega,
    /// Solve for Z and write its field and profiles.
    BuildZ,
    /// Compare Z with the radial oracle and the far-field decay.
    CompareAsymptotic,
    /// Evaluate and classify the limit criterion.
    CorollaryScan,
    /// Weak residuals against the test-function battery.
    WeakResidual,
    /// Decompose a second solution as C·Z plus a remainder.
    Decompose,
    /// Fit the two-sided envelope of the annular means of Z.
    Envelope,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::CheckOmega => "check-omega",
            Command::BuildZ => "build-z",
            Command::CompareAsymptotic => "compare-asymptotic",
            Command::CorollaryScan => "corollary-scan",
            Command::WeakResidual => "weak-residual",
            Command::Decompose => "decompose",
            Command::Envelope => "envelope",
        }
    }

    fn experiment(self) -> Option<Experiment> {
        Some(match self {
            Command::Run => return None,
            Command::CheckOmega => Experiment::CheckOmega,
            Command::BuildZ => Experiment::BuildZ,
            Command::CompareAsymptotic => Experiment::CompareAsymptotic,
            Command::CorollaryScan => Experiment::CorollaryScan,
            Command::WeakResidual => Experiment::WeakResidual,
            Command::Decompose => Experiment::Decompose,
            Command::Envelope => Experiment::Envelope,
        })
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Json(_) | Error::Validation(_) | Error::Unsupported(_) => 2,
        Error::Inadmissible(_) => 3,
        Error::Divergence { .. } => 4,
        _ => 1,
    }
}

fn load(cli: &Cli) -> ddform::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = cli.command.experiment() {
        cfg.experiments = vec![e];
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    cfg.solver = cfg.solver.refined(cli.refine);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match runner::run(&cfg, cli.command.name()) {
        Ok(outcome) => {
            let n = outcome.summary.checks.len();
            let passed = outcome.summary.checks.iter().filter(|c| c.pass).count();
            println!("{passed} of {n} checks passed; summary in {}", cfg.output.join("summary.json").display());
            if let Some(e) = outcome.error {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
            if outcome.summary.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
