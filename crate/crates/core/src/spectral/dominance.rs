use serde::Serialize;

use super::combined::{CombinedEntry, CombinedSpectrum};
use super::{in_left_half, phase, ResidualMode, SpectralError};
use crate::Tolerances;

/// Row of the case table that selects the dominating eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseBranch {
    /// `λ^A_1 > 0` and `|1 + λ^H_r λ^A_n| ≥ 1`: `(r, n)` dominates.
    #[serde(rename = "A1_pos_big")]
    A1PosBig,
    /// `λ^A_1 > 0` and `|1 + λ^H_r λ^A_n| < 1`: `(min, 1)` dominates.
    #[serde(rename = "A1_pos_small")]
    A1PosSmall,
    /// `λ^A_1 < 0`, `φ^H_r ∈ [−π/2, π/2]`: `(r, n)` versus `(k, 1)`.
    #[serde(rename = "A1_neg_phase_in")]
    A1NegPhaseIn,
    /// `λ^A_1 < 0`, `φ^H_r` in the left half-plane: `(r, n)` versus `(r, 1)`.
    #[serde(rename = "A1_neg_phase_out")]
    A1NegPhaseOut,
    /// The two candidates of a `λ^A_1 < 0` row have equal modulus.
    #[serde(rename = "tie")]
    Tie,
    /// No residual: `(j*, n)` with the largest `|λ^H|` dominates.
    #[serde(rename = "no_residual")]
    NoResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantType {
    /// Every dominating entry pairs `λ^A_n`.
    Type1Smoothing,
    /// Every dominating entry pairs `λ^A_1`.
    Type2Sharpening,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub residual_mode: ResidualMode,
    /// Entries whose `|μ|` ties the maximum.
    pub dominating: Vec<CombinedEntry>,
    pub max_modulus: f64,
    pub case_branch: CaseBranch,
    pub dominant_type: DominantType,
    /// `max |μ|` over the largest `|μ|` outside the tie band (`inf` if none).
    #[serde(serialize_with = "crate::serde_float::serialize")]
    pub gap_ratio: f64,
    pub oscillatory: bool,
    pub tie_tolerance_used: f64,
    /// Sorted `(j, i)` positions named by the case table.
    pub table_candidates: Vec<(usize, usize)>,
    /// Largest `|μ|` among the table candidates.
    pub table_modulus: f64,
    /// Whether the table's prediction attains `max |μ|` within the tie tolerance.
    pub table_agrees: bool,
    /// Whether `max |μ|` is attained by an entry pairing `λ^A_1` or `λ^A_n`.
    pub extremal_pairing_holds: bool,
    pub lambda_a_1: f64,
    pub lambda_a_n: f64,
}

impl DominanceReport {
    /// True when every dominating entry carries the same `μ`.
    pub fn single_value(&self) -> bool {
        let Some(first) = self.dominating.first() else {
            return false;
        };
        let band = self.tie_tolerance_used * self.max_modulus.max(f64::MIN_POSITIVE);
        self.dominating.iter().all(|e| (e.mu - first.mu).norm() <= band)
    }

    /// The dominating `μ` when it is a single value (up to the tie tolerance).
    pub fn dominating_mu(&self) -> Option<num_complex::Complex64> {
        self.single_value().then(|| self.dominating[0].mu)
    }

    pub fn pairs_lambda_n(&self, e: &CombinedEntry) -> bool {
        (e.lambda_a - self.lambda_a_n).abs() <= self.tie_tolerance_used
    }

    pub fn pairs_lambda_1(&self, e: &CombinedEntry) -> bool {
        (e.lambda_a - self.lambda_a_1).abs() <= self.tie_tolerance_used
    }
}

/// Strict classification: fails with `InternalInconsistency` when the case
/// table does not name a dominating eigenvalue.
pub fn classify_dominance(cs: &CombinedSpectrum) -> Result<DominanceReport, SpectralError> {
    classify_dominance_with(cs, &Tolerances::default())
}

pub fn classify_dominance_with(cs: &CombinedSpectrum, tol: &Tolerances) -> Result<DominanceReport, SpectralError> {
    let report = dominance_report(cs, tol);
    if !report.table_agrees {
        return Err(SpectralError::InternalInconsistency(format!(
            "branch {:?} predicts |μ| = {:.12} at {:?} but max |μ| = {:.12}",
            report.case_branch, report.table_modulus, report.table_candidates, report.max_modulus
        )));
    }
    Ok(report)
}

/// Dominance analysis that records, rather than raises, a disagreement
/// between the case table and the direct maximization.
pub fn dominance_report(cs: &CombinedSpectrum, tol: &Tolerances) -> DominanceReport {
    let tie = tol.tie;
    let max_modulus = cs.max_modulus();
    let band = tie * max_modulus;
    let dominating: Vec<CombinedEntry> = cs
        .entries
        .iter()
        .take_while(|e| max_modulus - e.modulus() <= band)
        .copied()
        .collect();
    let gap_ratio = match cs.entries.get(dominating.len()) {
        Some(next) if next.modulus() > 0.0 => max_modulus / next.modulus(),
        Some(_) if max_modulus > 0.0 => f64::INFINITY,
        Some(_) => 1.0,
        None => f64::INFINITY,
    };
    let oscillatory = dominating.iter().any(|e| e.mu.im.abs() > tol.oscillation * e.modulus());

    let n = cs.n();
    let lambda_a_1 = cs.lambda_a[0];
    let lambda_a_n = cs.lambda_a[n - 1];
    let pairs_n = |e: &CombinedEntry| (e.lambda_a - lambda_a_n).abs() <= tie;
    let pairs_1 = |e: &CombinedEntry| (e.lambda_a - lambda_a_1).abs() <= tie;
    let dominant_type = if dominating.iter().all(pairs_n) {
        DominantType::Type1Smoothing
    } else if dominating.iter().all(pairs_1) {
        DominantType::Type2Sharpening
    } else {
        DominantType::Mixed
    };

    let (case_branch, table_candidates) = table_prediction(cs, tie);
    let table_modulus = table_candidates
        .iter()
        .map(|&(j, i)| cs.mu(j, i).norm())
        .fold(0.0, f64::max);
    let table_agrees = max_modulus - table_modulus <= band;
    let extremal = cs
        .entries
        .iter()
        .filter(|e| pairs_1(e) || pairs_n(e))
        .map(CombinedEntry::modulus)
        .fold(0.0, f64::max);

    DominanceReport {
        residual_mode: cs.residual_mode,
        dominating,
        max_modulus,
        case_branch,
        dominant_type,
        gap_ratio,
        oscillatory,
        tie_tolerance_used: tie,
        table_candidates,
        table_modulus,
        table_agrees,
        extremal_pairing_holds: max_modulus - extremal <= band,
        lambda_a_1,
        lambda_a_n,
    }
}

/// Evaluates the case table literally on the sorted spectra.
fn table_prediction(cs: &CombinedSpectrum, tie: f64) -> (CaseBranch, Vec<(usize, usize)>) {
    let n1 = cs.n() - 1;
    let r = cs.d() - 1;
    let lh = &cs.lambda_h;

    if cs.residual_mode == ResidualMode::NoResidual {
        let jstar = (0..=r)
            .max_by(|&x, &y| lh[x].norm().total_cmp(&lh[y].norm()))
            .unwrap_or(r);
        return (CaseBranch::NoResidual, vec![(jstar, n1)]);
    }

    let lambda_a_1 = cs.lambda_a[0];
    let rn = cs.mu(r, n1).norm();
    // |λ^A_1| within 1e-12 of zero (e.g. uniform A) is read as the positive row
    if lambda_a_1 > 0.0 || lambda_a_1.abs() <= 1e-12 {
        if rn >= 1.0 {
            return (CaseBranch::A1PosBig, vec![(r, n1)]);
        }
        let jmin = (0..=r)
            .min_by(|&x, &y| lh[x].norm().total_cmp(&lh[y].norm()))
            .unwrap_or(0);
        return (CaseBranch::A1PosSmall, vec![(jmin, 0)]);
    }

    let compare = |branch: CaseBranch, other: (usize, usize)| {
        let om = cs.mu(other.0, other.1).norm();
        if (rn - om).abs() <= tie * rn.max(om) {
            (CaseBranch::Tie, vec![(r, n1), other])
        } else if rn > om {
            (branch, vec![(r, n1)])
        } else {
            (branch, vec![other])
        }
    };

    if !in_left_half(phase(lh[r])) {
        match (0..=r).rev().find(|&k| in_left_half(phase(lh[k]))) {
            Some(k) => compare(CaseBranch::A1NegPhaseIn, (k, 0)),
            None => (CaseBranch::A1NegPhaseIn, vec![(r, n1)]),
        }
    } else {
        compare(CaseBranch::A1NegPhaseOut, (r, 0))
    }
}
