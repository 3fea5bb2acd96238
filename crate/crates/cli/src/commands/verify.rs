//! Limit-prediction campaign: the predicted asymptotic direction and metrics
//! against the iterate after `depth` layers.

use serde::Serialize;
use smoothlab_core::dynamics::{run as run_dynamics, UpdateConfig};
use smoothlab_core::metrics::{metrics_of, SmoothingMetrics};
use smoothlab_core::serde_float;
use smoothlab_core::spectral::{
    aligned_distance, combined_spectrum, dominance_report, predict_limit_with, smoothing_verdict, CaseBranch,
    DominanceReport, DominantType, ResidualMode, SmoothingVerdict, SpectralError,
};
use smoothlab_core::tensor_core::{eig_general_with, EigOptions};

use super::{metric_discrepancy, MetricFields};
use crate::config::Settings;
use crate::error::CliError;
use crate::output::{to_json, Artifacts, ReportHeader, Summary, TrialStatus};
use crate::sampling::{normal_matrix, raw_h, symmetric_attention, trial_rng};
use crate::{Outcome, RunStatus};

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyTrial {
    pub trial: usize,
    pub seed: u64,
    pub status: Option<TrialStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub case_branch: Option<CaseBranch>,
    pub dominant_type: Option<DominantType>,
    pub verdict: Option<SmoothingVerdict>,
    #[serde(serialize_with = "serde_float::serialize_option")]
    pub gap_ratio: Option<f64>,
    pub table_agrees: Option<bool>,
    pub empirical_metrics_at_depth: Option<SmoothingMetrics>,
    pub predicted_metrics_of_limit: Option<SmoothingMetrics>,
    pub direction_distance: Option<f64>,
    pub metric_discrepancy: Option<f64>,
    pub growth_log_rate: Option<f64>,
    pub empirical_log_rate: Option<f64>,
    pub growth_rate_error: Option<f64>,
    /// Rate error after removing `ln(‖limit term‖ / ‖X0‖) / depth`.
    pub corrected_growth_rate_error: Option<f64>,
    pub direction_agrees: Option<bool>,
    pub metrics_agree: Option<bool>,
    pub growth_agrees: Option<bool>,
    pub agreement: bool,
    pub max_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyTotals {
    pub eligible: usize,
    pub direction_agreements: usize,
    pub metric_agreements: usize,
    pub growth_agreements: usize,
    pub corrected_growth_agreements: usize,
    pub table_disagreements: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub summary: Summary,
    pub totals: VerifyTotals,
    pub trials: Vec<VerifyTrial>,
}

/// Why a trial cannot be compared against a single predicted direction.
pub fn ineligibility(report: &DominanceReport, min_gap: f64) -> Option<String> {
    if report.oscillatory {
        Some("oscillatory domination: the dominating eigenvalue is not real".into())
    } else if !report.single_value() {
        Some(format!(
            "{} distinct dominating eigenvalues tie in modulus",
            report.dominating.len()
        ))
    } else if report.gap_ratio < min_gap {
        Some(format!("gap_ratio {:.6} below {min_gap}", report.gap_ratio))
    } else {
        None
    }
}

fn trial(s: &Settings, k: usize) -> VerifyTrial {
    let mut t = VerifyTrial {
        trial: k,
        seed: s.seed,
        ..VerifyTrial::default()
    };
    match evaluate(s, k, &mut t) {
        Ok(status) => t.status = Some(status),
        Err(e) => {
            t.status = Some(TrialStatus::Errored);
            t.reason = Some(e);
        }
    }
    t
}

fn evaluate(s: &Settings, k: usize, t: &mut VerifyTrial) -> Result<TrialStatus, String> {
    let tol = &s.tolerances;
    let th = &s.thresholds;
    let mut rng = trial_rng(s.seed, k as u64);
    let a = symmetric_attention(s.n, &mut rng, tol).map_err(|e| e.to_string())?;
    let h = raw_h(s.d, &mut rng);
    let x0 = normal_matrix(s.n, s.d, 1.0, &mut rng);
    let opts = EigOptions {
        residual_tol: tol.eig_residual,
        ..EigOptions::default()
    };
    let spec_h = eig_general_with(&h, &opts).map_err(|e| e.to_string())?;
    let mode = if s.residual {
        ResidualMode::WithResidual
    } else {
        ResidualMode::NoResidual
    };
    let report = dominance_report(&combined_spectrum(&spec_h, a.spectrum(), mode), tol);
    t.case_branch = Some(report.case_branch);
    t.dominant_type = Some(report.dominant_type);
    t.verdict = Some(smoothing_verdict(&report, a.spectrum(), &spec_h));
    t.gap_ratio = Some(report.gap_ratio);
    t.table_agrees = Some(report.table_agrees);

    if let Some(reason) = ineligibility(&report, th.min_gap_ratio) {
        t.reason = Some(reason);
        return Ok(TrialStatus::Skipped);
    }
    let lp = match predict_limit_with(&x0, &spec_h, a.spectrum(), &report, tol) {
        Ok(lp) => lp,
        Err(SpectralError::ZeroCoefficient { max_abs, .. }) => {
            t.reason = Some(format!(
                "zero coefficient on the dominating eigenvectors ({max_abs:.3e})"
            ));
            return Ok(TrialStatus::Skipped);
        }
        Err(e) => return Err(e.to_string()),
    };
    let Some(limit) = lp.limit_direction.as_ref() else {
        t.reason = Some("no limit direction".into());
        return Ok(TrialStatus::Skipped);
    };

    let cfg = UpdateConfig {
        residual: s.residual,
        depth: s.depth,
        record_every: s.depth,
        renormalize: true,
        ..UpdateConfig::default()
    };
    let traj = run_dynamics(&x0, a.matrix(), &h, &cfg).map_err(|e| e.to_string())?;
    let empirical = traj.last().metrics;
    let predicted = metrics_of(limit).map_err(|e| e.to_string())?;
    let distance = aligned_distance(&traj.final_state, limit);
    let metric_err = metric_discrepancy(&empirical, &predicted, MetricFields::All);
    let depth = s.depth as f64;
    let empirical_rate = traj.final_frobenius_log / depth;
    let growth_err = (empirical_rate - lp.growth_log_rate).abs();
    let offset = (lp.limit_scale / x0.frobenius_norm()).ln() / depth;
    let corrected_err = (empirical_rate - offset - lp.growth_log_rate).abs();

    t.empirical_metrics_at_depth = Some(empirical);
    t.predicted_metrics_of_limit = Some(predicted);
    t.direction_distance = Some(distance);
    t.metric_discrepancy = Some(metric_err);
    t.growth_log_rate = Some(lp.growth_log_rate);
    t.empirical_log_rate = Some(empirical_rate);
    t.growth_rate_error = Some(growth_err);
    t.corrected_growth_rate_error = Some(corrected_err);
    t.direction_agrees = Some(distance <= th.direction);
    t.metrics_agree = Some(metric_err <= th.metric);
    t.growth_agrees = Some(growth_err <= th.growth_rate);
    t.agreement = distance <= th.direction && metric_err <= th.metric && growth_err <= th.growth_rate;
    t.max_discrepancy = Some(distance.max(metric_err).max(growth_err));
    if !t.agreement {
        let mut why = Vec::new();
        if distance > th.direction {
            why.push(format!("direction distance {distance:.3e}"));
        }
        if metric_err > th.metric {
            why.push(format!("metric discrepancy {metric_err:.3e}"));
        }
        if growth_err > th.growth_rate {
            why.push(format!("growth rate error {growth_err:.3e}"));
        }
        t.reason = Some(why.join("; "));
    }
    Ok(if t.agreement {
        TrialStatus::Pass
    } else {
        TrialStatus::Fail
    })
}

/// Runs up to `trials` trials, stopping early once `eligible_target`
/// trials were compared.
pub fn campaign(s: &Settings) -> VerifyReport {
    let mut trials = Vec::new();
    let mut totals = VerifyTotals::default();
    for k in 0..s.trials {
        let t = trial(s, k);
        totals.table_disagreements += (t.table_agrees == Some(false)) as usize;
        if t.direction_distance.is_some() {
            totals.eligible += 1;
            totals.direction_agreements += (t.direction_agrees == Some(true)) as usize;
            totals.metric_agreements += (t.metrics_agree == Some(true)) as usize;
            totals.growth_agreements += (t.growth_agrees == Some(true)) as usize;
            totals.corrected_growth_agreements +=
                (t.corrected_growth_rate_error
                    .is_some_and(|e| e <= s.thresholds.growth_rate)) as usize;
        }
        trials.push(t);
        if s.eligible_target.is_some_and(|target| totals.eligible >= target) {
            break;
        }
    }
    VerifyReport {
        header: ReportHeader::new(s),
        summary: Summary::of(trials.iter().filter_map(|t| t.status.as_ref())),
        totals,
        trials,
    }
}

pub fn run(s: &Settings) -> Result<Outcome, CliError> {
    let report = campaign(s);
    let json = to_json(&report);
    let mut artifacts = Artifacts::default();
    artifacts.add("verify.json", json.clone());
    let (sm, t) = (&report.summary, &report.totals);
    Ok(Outcome {
        status: RunStatus::from_summary(sm),
        headline: format!(
            "verify: {} trials, {} eligible ({} pass, {} fail), {} skipped, {} errored; direction {}/{}, metrics {}/{}, growth {}/{}",
            sm.trials,
            t.eligible,
            sm.pass,
            sm.fail,
            sm.skipped,
            sm.errored,
            t.direction_agreements,
            t.eligible,
            t.metric_agreements,
            t.eligible,
            t.growth_agreements,
            t.eligible
        ),
        artifacts,
        primary: json,
    })
}
