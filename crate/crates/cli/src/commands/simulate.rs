use serde::Serialize;
use smoothlab_core::dynamics::{run as run_dynamics, DynamicsError, LayerNormParams, LnMode, UpdateConfig};
use smoothlab_core::metrics::SmoothingMetrics;
use smoothlab_core::tensor_core::RealMatrix;

use crate::config::{HKind, Settings};
use crate::error::CliError;
use crate::output::{read_matrix, to_json, trajectory_csv, Artifacts, ReportHeader};
use crate::sampling::{normal_matrix, raw_h, reparam_h, symmetric_attention, trial_rng};
use crate::{Outcome, RunStatus};

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub layers: usize,
    pub records: usize,
    pub final_metrics: SmoothingMetrics,
    pub final_frobenius_log: f64,
}

pub fn update_config(s: &Settings, d: usize) -> UpdateConfig {
    UpdateConfig {
        residual: s.residual,
        ln_mode: s.ln_mode,
        ln_params: (s.ln_mode != LnMode::None).then(|| LayerNormParams::identity(d)),
        depth: s.depth,
        record_every: s.record_every,
        renormalize: s.renormalize,
    }
}

pub fn dynamics_error(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::Config(msg) | DynamicsError::Shape(msg) => CliError::Config(msg),
        other => CliError::numerical(other),
    }
}

/// `(A, H, X0)` from files where given, otherwise sampled from the seed.
fn inputs(s: &Settings) -> Result<(RealMatrix, RealMatrix, RealMatrix), CliError> {
    let mut rng = trial_rng(s.seed, 0);
    let a = match &s.a_path {
        Some(p) => read_matrix(p)?,
        None => symmetric_attention(s.n, &mut rng, &s.tolerances)
            .map_err(CliError::numerical)?
            .matrix()
            .clone(),
    };
    let h = match (&s.h_path, s.h_kind) {
        (Some(p), _) => read_matrix(p)?,
        (None, HKind::Raw) => raw_h(s.d, &mut rng),
        (None, HKind::Reparam) => {
            reparam_h(s.d, s.mode, Some(s.thresholds.eigenvalue_margin), &mut rng)
                .map_err(CliError::numerical)?
                .realized_h
        }
    };
    let x0 = match &s.x0_path {
        Some(p) => read_matrix(p)?,
        None => normal_matrix(a.rows(), h.rows(), 1.0, &mut rng),
    };
    Ok((a, h, x0))
}

pub fn run(s: &Settings) -> Result<Outcome, CliError> {
    let (a, h, x0) = inputs(s)?;
    let traj = run_dynamics(&x0, &a, &h, &update_config(s, x0.cols())).map_err(dynamics_error)?;
    let summary = SimulateSummary {
        header: ReportHeader::new(s),
        layers: s.depth,
        records: traj.records.len(),
        final_metrics: traj.last().metrics,
        final_frobenius_log: traj.final_frobenius_log,
    };
    let csv = trajectory_csv(&traj);
    let mut artifacts = Artifacts::default();
    artifacts.add("trajectory.csv", csv.clone());
    artifacts.add("simulate.json", to_json(&summary));
    let m = summary.final_metrics;
    Ok(Outcome {
        status: RunStatus::AllPass,
        headline: format!(
            "simulate: {} layers, final hfc_lfc {:.3e}, mean_cosine {:.6}, effective_rank {:.6}",
            s.depth, m.hfc_lfc, m.mean_cosine, m.effective_rank
        ),
        artifacts,
        primary: csv,
    })
}
