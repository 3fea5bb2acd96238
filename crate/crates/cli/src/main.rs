use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smoothlab_cli::config::{tol_scale_from_env, CommandKind, ConfigArgs, ExperimentConfig};
use smoothlab_cli::error::CliError;
use smoothlab_cli::execute_and_write;

/// Spectral laboratory for oversmoothing in attention updates.
#[derive(Debug, Parser)]
#[command(name = "smoothlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Combined spectrum against the explicit Kronecker eigenvalues.
    Spectrum(ConfigArgs),
    /// Iterate the update and write a trajectory CSV.
    Simulate(ConfigArgs),
    /// Dominance, verdict and limit for given A and H files.
    Classify(ConfigArgs),
    /// Predicted limits against deep iterates.
    Verify(ConfigArgs),
    /// Pre-/post-LN runs with positive and negative LN scale.
    LnImpact(ConfigArgs),
    /// Smooth- and sharpen-mode reparameterized H.
    ReparamDemo(ConfigArgs),
}

impl Command {
    fn split(&self) -> (CommandKind, &ConfigArgs) {
        match self {
            Command::Spectrum(a) => (CommandKind::Spectrum, a),
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Classify(a) => (CommandKind::Classify, a),
            Command::Verify(a) => (CommandKind::VerifyCampaign, a),
            Command::LnImpact(a) => (CommandKind::LnImpact, a),
            Command::ReparamDemo(a) => (CommandKind::ReparamDemo, a),
        }
    }
}

fn main_inner(cli: &Cli) -> Result<i32, CliError> {
    let (kind, args) = cli.command.split();
    let file = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let settings = file.apply_args(args).resolve(kind, tol_scale_from_env()?)?;
    let (outcome, files) = execute_and_write(&settings)?;
    if files.is_empty() {
        print!("{}", outcome.primary);
        eprintln!("{}", outcome.headline);
    } else {
        println!("{}", outcome.headline);
        for f in files {
            println!("wrote {}", f.display());
        }
    }
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match main_inner(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("smoothlab: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
