//! Experiment runner for `smoothlab`: seeded campaigns over the attention
//! update that write trajectory CSVs and JSON reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sampling;

use std::path::PathBuf;

use config::{CommandKind, Settings};
use error::CliError;
use output::{Artifacts, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    AllPass,
    VerificationFailed,
    Errored,
}

impl RunStatus {
    pub fn from_summary(s: &Summary) -> Self {
        if s.fail > 0 {
            RunStatus::VerificationFailed
        } else if s.errored > 0 {
            RunStatus::Errored
        } else {
            RunStatus::AllPass
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::AllPass => 0,
            RunStatus::VerificationFailed => 1,
            RunStatus::Errored => 3,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub status: RunStatus,
    pub artifacts: Artifacts,
    /// One-line human summary.
    pub headline: String,
    /// Artifact printed to stdout when no output directory is set.
    pub primary: String,
}

pub fn execute(settings: &Settings) -> Result<Outcome, CliError> {
    match settings.kind {
        CommandKind::Spectrum => commands::spectrum::run(settings),
        CommandKind::Simulate => commands::simulate::run(settings),
        CommandKind::Classify => commands::classify::run(settings),
        CommandKind::VerifyCampaign => commands::verify::run(settings),
        CommandKind::LnImpact => commands::ln_impact::run(settings),
        CommandKind::ReparamDemo => commands::reparam_demo::run(settings),
    }
}

/// Runs a command and writes its artifacts, returning the files written.
pub fn execute_and_write(settings: &Settings) -> Result<(Outcome, Vec<PathBuf>), CliError> {
    let outcome = execute(settings)?;
    let files = match &settings.output_path {
        Some(dir) => outcome.artifacts.write_to(dir)?,
        None => Vec::new(),
    };
    Ok((outcome, files))
}
