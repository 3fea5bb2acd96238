//! Reparameterized value projections in both clip modes: dominance type,
//! verdict and the metrics reached after `depth` layers.

use serde::Serialize;
use smoothlab_core::attention::AttentionMatrix;
use smoothlab_core::dynamics::{run as run_dynamics, Trajectory, UpdateConfig};
use smoothlab_core::metrics::{metrics_of, SmoothingMetrics};
use smoothlab_core::reparam::ReparamMode;
use smoothlab_core::serde_float;
use smoothlab_core::spectral::{
    clip_range_classification, combined_spectrum, dominance_report, predict_limit_with, smoothing_verdict, CaseBranch,
    ClipRange, DominantType, ResidualMode, SmoothingVerdict, SpectralError,
};
use smoothlab_core::tensor_core::{eig_general_with, EigOptions, RealMatrix};

use super::{collapsed, lambda1_vector_mixed_signs, metric_discrepancy, MetricFields};
use crate::config::Settings;
use crate::error::CliError;
use crate::output::{to_json, trajectory_csv, Artifacts, ReportHeader, Summary, TrialStatus};
use crate::sampling::{normal_matrix, reparam_h, symmetric_attention, trial_rng};
use crate::{Outcome, RunStatus};

pub const MODES: [ReparamMode; 2] = [ReparamMode::Smooth, ReparamMode::Sharpen];

#[derive(Debug, Clone, Default, Serialize)]
pub struct ModeTrial {
    pub trial: usize,
    pub mode: Option<ReparamMode>,
    pub status: Option<TrialStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub clipped_eigenvalues: Vec<f64>,
    pub clip_range: Option<ClipRange>,
    pub case_branch: Option<CaseBranch>,
    pub dominant_type: Option<DominantType>,
    pub expected_type: Option<DominantType>,
    pub verdict: Option<SmoothingVerdict>,
    #[serde(serialize_with = "serde_float::serialize_option")]
    pub gap_ratio: Option<f64>,
    pub table_agrees: Option<bool>,
    pub lambda1_vector_mixed_signs: bool,
    pub empirical_metrics_at_depth: Option<SmoothingMetrics>,
    pub predicted_metrics_of_limit: Option<SmoothingMetrics>,
    pub max_discrepancy: Option<f64>,
    pub agreement: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReparamReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub summary: Summary,
    pub smooth: Summary,
    pub sharpen: Summary,
    pub trials: Vec<ModeTrial>,
}

struct Inputs {
    a: AttentionMatrix,
    x0: RealMatrix,
    h: Vec<(Vec<f64>, RealMatrix)>,
}

fn sample(s: &Settings, k: usize) -> Result<Inputs, String> {
    let mut rng = trial_rng(s.seed, k as u64);
    let a = symmetric_attention(s.n, &mut rng, &s.tolerances).map_err(|e| e.to_string())?;
    let x0 = normal_matrix(s.n, s.d, 1.0, &mut rng);
    let h = MODES
        .iter()
        .map(|&mode| {
            reparam_h(s.d, mode, Some(s.thresholds.eigenvalue_margin), &mut rng)
                .map(|r| (r.clipped, r.realized_h))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    Ok(Inputs { a, x0, h })
}

fn expected_type(mode: ReparamMode) -> DominantType {
    match mode {
        ReparamMode::Smooth => DominantType::Type1Smoothing,
        ReparamMode::Sharpen => DominantType::Type2Sharpening,
    }
}

fn evaluate(
    s: &Settings,
    inputs: &Inputs,
    mode: ReparamMode,
    h: &RealMatrix,
    record_every: usize,
    t: &mut ModeTrial,
) -> Result<(TrialStatus, Option<Trajectory>), String> {
    let (tol, th) = (&s.tolerances, &s.thresholds);
    let a = &inputs.a;
    let opts = EigOptions {
        residual_tol: tol.eig_residual,
        ..EigOptions::default()
    };
    let spec_h = eig_general_with(h, &opts).map_err(|e| e.to_string())?;
    let report = dominance_report(
        &combined_spectrum(&spec_h, a.spectrum(), ResidualMode::WithResidual),
        tol,
    );
    t.clip_range = Some(clip_range_classification(spec_h.eigenvalues()));
    t.case_branch = Some(report.case_branch);
    t.dominant_type = Some(report.dominant_type);
    t.expected_type = Some(expected_type(mode));
    t.verdict = Some(smoothing_verdict(&report, a.spectrum(), &spec_h));
    t.gap_ratio = Some(report.gap_ratio);
    t.table_agrees = Some(report.table_agrees);
    t.lambda1_vector_mixed_signs = lambda1_vector_mixed_signs(a);

    let cfg = UpdateConfig {
        depth: s.depth,
        record_every,
        renormalize: true,
        ..UpdateConfig::default()
    };
    let traj = run_dynamics(&inputs.x0, a.matrix(), h, &cfg).map_err(|e| e.to_string())?;
    let empirical = traj.last().metrics;
    t.empirical_metrics_at_depth = Some(empirical);

    if report.dominant_type != expected_type(mode) {
        t.reason = Some(format!(
            "dominant type {:?}, expected {:?}",
            report.dominant_type,
            expected_type(mode)
        ));
        return Ok((TrialStatus::Fail, Some(traj)));
    }
    if report.gap_ratio < th.reparam_min_gap_ratio {
        t.reason = Some(format!(
            "gap_ratio {:.6} below {}",
            report.gap_ratio, th.reparam_min_gap_ratio
        ));
        return Ok((TrialStatus::Skipped, Some(traj)));
    }
    if report.oscillatory {
        t.reason = Some("oscillatory domination".into());
        return Ok((TrialStatus::Skipped, Some(traj)));
    }

    let mut failures = Vec::new();
    match mode {
        ReparamMode::Smooth => {
            if !collapsed(&empirical, th) {
                failures.push(format!(
                    "metrics {:.3e}, {:.12}, {:.9} have not reached the identical-token limits",
                    empirical.hfc_lfc, empirical.mean_cosine, empirical.effective_rank
                ));
            }
        }
        ReparamMode::Sharpen => {
            let lp = match predict_limit_with(&inputs.x0, &spec_h, a.spectrum(), &report, tol) {
                Ok(lp) => lp,
                Err(SpectralError::ZeroCoefficient { max_abs, .. }) => {
                    t.reason = Some(format!(
                        "zero coefficient on the dominating eigenvectors ({max_abs:.3e})"
                    ));
                    return Ok((TrialStatus::Skipped, Some(traj)));
                }
                Err(e) => return Err(e.to_string()),
            };
            let Some(limit) = lp.limit_direction.as_ref() else {
                t.reason = Some("no limit direction".into());
                return Ok((TrialStatus::Skipped, Some(traj)));
            };
            let predicted = metrics_of(limit).map_err(|e| e.to_string())?;
            t.predicted_metrics_of_limit = Some(predicted);
            let discrepancy = metric_discrepancy(&empirical, &predicted, MetricFields::HfcAndCosine);
            t.max_discrepancy = Some(discrepancy);
            if empirical.effective_rank > 1.0 + th.collapse_effective_rank {
                failures.push(format!("effective rank {:.9}", empirical.effective_rank));
            }
            if discrepancy > th.metric {
                failures.push(format!("metrics differ from the predicted limit by {discrepancy:.3e}"));
            }
            if t.lambda1_vector_mixed_signs && empirical.mean_cosine >= 1.0 - th.cosine_margin {
                failures.push(format!(
                    "mean cosine {:.9} despite a mixed-sign v^A_1",
                    empirical.mean_cosine
                ));
            }
        }
    }
    t.agreement = failures.is_empty();
    if !failures.is_empty() {
        t.reason = Some(failures.join("; "));
    }
    Ok((
        if t.agreement {
            TrialStatus::Pass
        } else {
            TrialStatus::Fail
        },
        Some(traj),
    ))
}

/// Per-mode trial records and, for the first trial, the trajectories.
pub fn campaign(s: &Settings) -> (ReparamReport, Vec<(ReparamMode, Trajectory)>) {
    let mut trials = Vec::new();
    let mut trajectories = Vec::new();
    for k in 0..s.trials {
        let inputs = sample(s, k);
        for (m, &mode) in MODES.iter().enumerate() {
            let mut t = ModeTrial {
                trial: k,
                mode: Some(mode),
                ..ModeTrial::default()
            };
            let result = inputs.as_ref().map_err(Clone::clone).and_then(|inp| {
                let (clipped, h) = &inp.h[m];
                t.clipped_eigenvalues = clipped.clone();
                let every = if k == 0 { s.record_every } else { s.depth };
                evaluate(s, inp, mode, h, every, &mut t)
            });
            match result {
                Ok((status, traj)) => {
                    t.status = Some(status);
                    if let (0, Some(traj)) = (k, traj) {
                        trajectories.push((mode, traj));
                    }
                }
                Err(e) => {
                    t.status = Some(TrialStatus::Errored);
                    t.reason = Some(e);
                }
            }
            trials.push(t);
        }
    }
    let by_mode = |mode| {
        Summary::of(
            trials
                .iter()
                .filter(|t| t.mode == Some(mode))
                .filter_map(|t| t.status.as_ref()),
        )
    };
    let report = ReparamReport {
        header: ReportHeader::new(s),
        summary: Summary::of(trials.iter().filter_map(|t| t.status.as_ref())),
        smooth: by_mode(ReparamMode::Smooth),
        sharpen: by_mode(ReparamMode::Sharpen),
        trials,
    };
    (report, trajectories)
}

pub fn mode_name(mode: ReparamMode) -> &'static str {
    match mode {
        ReparamMode::Smooth => "smooth",
        ReparamMode::Sharpen => "sharpen",
    }
}

pub fn run(s: &Settings) -> Result<Outcome, CliError> {
    let (report, trajectories) = campaign(s);
    let json = to_json(&report);
    let mut artifacts = Artifacts::default();
    for (mode, traj) in &trajectories {
        artifacts.add(format!("{}.csv", mode_name(*mode)), trajectory_csv(traj));
    }
    artifacts.add("reparam.json", json.clone());
    let line = |name: &str, sm: &Summary| {
        format!(
            "{name} {} pass, {} fail, {} skipped, {} errored",
            sm.pass, sm.fail, sm.skipped, sm.errored
        )
    };
    Ok(Outcome {
        status: RunStatus::from_summary(&report.summary),
        headline: format!(
            "reparam-demo: {} trials per mode; {}; {}",
            s.trials,
            line("smooth", &report.smooth),
            line("sharpen", &report.sharpen)
        ),
        artifacts,
        primary: json,
    })
}
