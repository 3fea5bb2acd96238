//! Combined-spectrum campaign: the factorized eigenvalues against a
//! brute-force eigensolve of the explicit Kronecker matrix, plus the
//! dominance case table against direct maximization.

use rand::Rng;
use serde::Serialize;
use smoothlab_core::serde_float;
use smoothlab_core::spectral::{combined_spectrum, dominance_report, CaseBranch, DominantType, ResidualMode};
use smoothlab_core::tensor_core::{eig_general_with, eigenvalues, kron, match_multisets, EigOptions, RealMatrix};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{to_json, Artifacts, ReportHeader, Summary, TrialStatus};
use crate::sampling::{raw_h, symmetric_attention, trial_rng};
use crate::{Outcome, RunStatus};

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumTrial {
    pub trial: usize,
    pub n: usize,
    pub d: usize,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub lemma1_discrepancy: Option<f64>,
    pub lemma1_agrees: bool,
    pub case_branch: Option<CaseBranch>,
    pub dominant_type: Option<DominantType>,
    pub table_agrees: Option<bool>,
    pub extremal_pairing_holds: Option<bool>,
    #[serde(serialize_with = "serde_float::serialize_option")]
    pub gap_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SpectrumTotals {
    pub lemma1_agreements: usize,
    pub table_agreements: usize,
    pub table_disagreements: usize,
    pub extremal_pairing_violations: usize,
    pub max_lemma1_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub summary: Summary,
    pub totals: SpectrumTotals,
    pub trials: Vec<SpectrumTrial>,
}

pub fn campaign(s: &Settings) -> SpectrumReport {
    let trials: Vec<SpectrumTrial> = (0..s.trials).map(|k| trial(s, k)).collect();
    let mut totals = SpectrumTotals::default();
    for t in &trials {
        totals.lemma1_agreements += t.lemma1_agrees as usize;
        match t.table_agrees {
            Some(true) => totals.table_agreements += 1,
            Some(false) => totals.table_disagreements += 1,
            None => {}
        }
        totals.extremal_pairing_violations += (t.extremal_pairing_holds == Some(false)) as usize;
        totals.max_lemma1_discrepancy = totals.max_lemma1_discrepancy.max(t.lemma1_discrepancy.unwrap_or(0.0));
    }
    SpectrumReport {
        header: ReportHeader::new(s),
        summary: Summary::of(trials.iter().map(|t| &t.status)),
        totals,
        trials,
    }
}

fn trial(s: &Settings, k: usize) -> SpectrumTrial {
    let mut rng = trial_rng(s.seed, k as u64);
    let (n, d) = if s.vary_size {
        (rng.random_range(s.n.min(2)..=s.n), rng.random_range(s.d.min(2)..=s.d))
    } else {
        (s.n, s.d)
    };
    let mut t = SpectrumTrial {
        trial: k,
        n,
        d,
        status: TrialStatus::Errored,
        reason: None,
        lemma1_discrepancy: None,
        lemma1_agrees: false,
        case_branch: None,
        dominant_type: None,
        table_agrees: None,
        extremal_pairing_holds: None,
        gap_ratio: None,
    };
    if let Err(e) = analyse(s, n, d, &mut rng, &mut t) {
        t.status = TrialStatus::Errored;
        t.reason = Some(e);
    }
    t
}

fn analyse(s: &Settings, n: usize, d: usize, rng: &mut impl Rng, t: &mut SpectrumTrial) -> Result<(), String> {
    let tol = &s.tolerances;
    let a = symmetric_attention(n, rng, tol).map_err(|e| e.to_string())?;
    let h = raw_h(d, rng);
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
    let cs = combined_spectrum(&spec_h, a.spectrum(), mode);

    let hk = kron(&h, a.matrix());
    let explicit = if s.residual {
        RealMatrix::identity(n * d).add(&hk)
    } else {
        hk
    };
    let brute = eigenvalues(&explicit).map_err(|e| e.to_string())?;
    let discrepancy = match_multisets(&cs.mu_values(), &brute)
        .map_err(|e| e.to_string())?
        .max_discrepancy;

    let report = dominance_report(&cs, tol);
    t.lemma1_discrepancy = Some(discrepancy);
    t.lemma1_agrees = discrepancy <= s.thresholds.spectrum_match;
    t.case_branch = Some(report.case_branch);
    t.dominant_type = Some(report.dominant_type);
    t.table_agrees = Some(report.table_agrees);
    t.extremal_pairing_holds = Some(report.extremal_pairing_holds);
    t.gap_ratio = Some(report.gap_ratio);

    let mut failures = Vec::new();
    if !t.lemma1_agrees {
        failures.push(format!(
            "combined spectrum differs from explicit eigenvalues by {discrepancy:.3e}"
        ));
    }
    if !report.table_agrees {
        failures.push(format!(
            "case table ({:?}) predicts |mu| = {:.12} but max |mu| = {:.12}",
            report.case_branch, report.table_modulus, report.max_modulus
        ));
    }
    if !report.extremal_pairing_holds {
        failures.push("max |mu| pairs neither lambda^A_1 nor lambda^A_n".into());
    }
    t.status = if failures.is_empty() {
        TrialStatus::Pass
    } else {
        TrialStatus::Fail
    };
    t.reason = (!failures.is_empty()).then(|| failures.join("; "));
    Ok(())
}

pub fn run(s: &Settings) -> Result<Outcome, CliError> {
    let report = campaign(s);
    let json = to_json(&report);
    let mut artifacts = Artifacts::default();
    artifacts.add("spectrum.json", json.clone());
    let t = &report.totals;
    Ok(Outcome {
        status: RunStatus::from_summary(&report.summary),
        headline: format!(
            "spectrum: {} trials, {} pass, {} fail, {} errored; combined-spectrum agreement {}/{}, case-table agreement {}/{}",
            report.summary.trials,
            report.summary.pass,
            report.summary.fail,
            report.summary.errored,
            t.lemma1_agreements,
            report.summary.trials,
            t.table_agreements,
            t.table_agreements + t.table_disagreements
        ),
        artifacts,
        primary: json,
    })
}
