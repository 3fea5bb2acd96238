use serde::Serialize;
use smoothlab_core::attention::{AttentionError, AttentionMatrix};
use smoothlab_core::metrics::{metrics_of, SmoothingMetrics};
use smoothlab_core::spectral::{
    clip_range_classification, combined_spectrum, dominance_report, predict_limit_with, smoothing_verdict, ClipRange,
    DominanceReport, LimitPrediction, ResidualMode, SmoothingVerdict,
};
use smoothlab_core::tensor_core::{eig_general_with, EigOptions};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{read_matrix, to_json, Artifacts, ReportHeader};
use crate::sampling::{normal_matrix, trial_rng};
use crate::{Outcome, RunStatus};

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub attention_eigenvalues: Vec<f64>,
    pub clip_range: ClipRange,
    pub dominance: DominanceReport,
    pub verdict: SmoothingVerdict,
    pub limit: Option<LimitPrediction>,
    pub limit_metrics: Option<SmoothingMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_error: Option<String>,
}

fn attention_error(e: AttentionError) -> CliError {
    match e {
        AttentionError::Linalg(inner) => CliError::numerical(inner),
        other => CliError::Config(format!("attention matrix rejected: {other}")),
    }
}

pub fn classify(s: &Settings) -> Result<ClassifyReport, CliError> {
    let (Some(a_path), Some(h_path)) = (&s.a_path, &s.h_path) else {
        return Err(CliError::Config("classify needs both --a and --h matrix files".into()));
    };
    let a = AttentionMatrix::with_tolerances(read_matrix(a_path)?, &s.tolerances).map_err(attention_error)?;
    let h = read_matrix(h_path)?;
    if !h.is_square() {
        return Err(CliError::Config(format!("H must be square, got {:?}", h.shape())));
    }
    let x0 = match &s.x0_path {
        Some(p) => read_matrix(p)?,
        None => normal_matrix(a.n(), h.rows(), 1.0, &mut trial_rng(s.seed, 0)),
    };
    if x0.shape() != (a.n(), h.rows()) {
        return Err(CliError::Config(format!(
            "X0 is {:?} but A and H need {}x{}",
            x0.shape(),
            a.n(),
            h.rows()
        )));
    }
    let opts = EigOptions {
        residual_tol: s.tolerances.eig_residual,
        ..EigOptions::default()
    };
    let spec_h = eig_general_with(&h, &opts).map_err(CliError::numerical)?;
    let mode = if s.residual {
        ResidualMode::WithResidual
    } else {
        ResidualMode::NoResidual
    };
    let report = dominance_report(&combined_spectrum(&spec_h, a.spectrum(), mode), &s.tolerances);
    let verdict = smoothing_verdict(&report, a.spectrum(), &spec_h);
    let (limit, limit_error) = match predict_limit_with(&x0, &spec_h, a.spectrum(), &report, &s.tolerances) {
        Ok(l) => (Some(l), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let limit_metrics = limit
        .as_ref()
        .and_then(|l| l.limit_direction.as_ref())
        .and_then(|d| metrics_of(d).ok());
    Ok(ClassifyReport {
        header: ReportHeader::new(s),
        attention_eigenvalues: a.eigenvalues(),
        clip_range: clip_range_classification(spec_h.eigenvalues()),
        dominance: report,
        verdict,
        limit,
        limit_metrics,
        limit_error,
    })
}

pub fn run(s: &Settings) -> Result<Outcome, CliError> {
    let report = classify(s)?;
    let json = to_json(&report);
    let mut artifacts = Artifacts::default();
    artifacts.add("classify.json", json.clone());
    let (ic, ac, rc) = report.verdict.flags();
    let tf = |b: bool| if b { 'T' } else { 'F' };
    Ok(Outcome {
        status: RunStatus::AllPass,
        headline: format!(
            "classify: {:?}, {:?}, verdict ({}, {}, {}) {:?}",
            report.dominance.case_branch,
            report.dominance.dominant_type,
            tf(ic),
            tf(ac),
            tf(rc),
            report.verdict.theorem3_case
        ),
        artifacts,
        primary: json,
    })
}
