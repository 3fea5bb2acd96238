use num_complex::Complex64;
use serde::Serialize;

use super::dominance::DominanceReport;
use super::ResidualMode;
use crate::tensor_core::{numerical_rank, ComplexMatrix, EigenDecomposition};

/// Distance under which two eigenvalues count as equal for multiplicity.
const MULTIPLICITY_TOL: f64 = 1e-8;
const RANK_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem3Case {
    Case1,
    Case2,
    Case3a,
    Case3ab,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SmoothingVerdict {
    pub input_convergence: bool,
    pub angle_convergence: bool,
    pub rank_collapse: bool,
    pub theorem3_case: Theorem3Case,
    /// Some dominating entry pairs a `λ^A` other than `λ^A_n`.
    pub clause_a: bool,
    /// `λ^A_1` and a dominating `λ^H` both have geometric multiplicity > 1.
    pub clause_b: bool,
}

impl SmoothingVerdict {
    fn new(flags: (bool, bool, bool), case: Theorem3Case, clause_a: bool, clause_b: bool) -> Self {
        Self {
            input_convergence: flags.0,
            angle_convergence: flags.1,
            rank_collapse: flags.2,
            theorem3_case: case,
            clause_a,
            clause_b,
        }
    }

    pub fn flags(&self) -> (bool, bool, bool) {
        (self.input_convergence, self.angle_convergence, self.rank_collapse)
    }
}

/// Which smoothing notions hold asymptotically, from the dominating set.
///
/// Several tied `μ` follow the three-clause rule: clause (b) gives
/// `(F, F, F)`, clause (a) alone `(F, F, T)`, and a tie in which every entry
/// pairs `λ^A_n` keeps identical rows and is reported as indeterminate with
/// `(T, T, T)`.
pub fn smoothing_verdict(
    report: &DominanceReport,
    spec_a: &EigenDecomposition,
    spec_h: &EigenDecomposition,
) -> SmoothingVerdict {
    use Theorem3Case::*;
    let clause_a = report.dominating.iter().any(|e| !report.pairs_lambda_n(e));
    if report.residual_mode == ResidualMode::NoResidual {
        return SmoothingVerdict::new((true, true, true), Case1, clause_a, false);
    }
    if report.single_value() {
        if report.dominating.iter().all(|e| report.pairs_lambda_n(e)) {
            return SmoothingVerdict::new((true, true, true), Case1, false, false);
        }
        if report.dominating.iter().all(|e| report.pairs_lambda_1(e)) {
            return SmoothingVerdict::new((false, false, true), Case2, true, false);
        }
    }
    let a1 = Complex64::new(report.lambda_a_1, 0.0);
    let clause_b = geometric_multiplicity(spec_a, a1, MULTIPLICITY_TOL) > 1
        && report
            .dominating
            .iter()
            .any(|e| geometric_multiplicity(spec_h, e.lambda_h, MULTIPLICITY_TOL) > 1);
    if clause_b {
        SmoothingVerdict::new((false, false, false), Case3ab, clause_a, true)
    } else if clause_a {
        SmoothingVerdict::new((false, false, true), Case3a, true, false)
    } else {
        SmoothingVerdict::new((true, true, true), Indeterminate, false, false)
    }
}

/// Number of independent eigenvectors whose eigenvalue lies within `tol` of `lambda`.
pub fn geometric_multiplicity(spec: &EigenDecomposition, lambda: Complex64, tol: f64) -> usize {
    let columns: Vec<Vec<Complex64>> = spec
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, z)| (*z - lambda).norm() <= tol)
        .map(|(k, _)| spec.vector(k))
        .collect();
    if columns.is_empty() {
        return 0;
    }
    let block = ComplexMatrix::from_columns(&columns);
    // the real embedding doubles the rank
    numerical_rank(&block.real_embedding(), RANK_CUTOFF).map_or(0, |r| r / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipRange {
    Sharpening,
    Smoothing,
    Unclassified,
}

/// Sharpening if every eigenvalue is real and in `[−1, 0)`, smoothing if
/// every eigenvalue is real and positive.
pub fn clip_range_classification(eigenvalues_h: &[Complex64]) -> ClipRange {
    let real = eigenvalues_h.iter().all(|z| z.im.abs() <= 1e-12);
    if !real || eigenvalues_h.is_empty() {
        return ClipRange::Unclassified;
    }
    if eigenvalues_h.iter().all(|z| (-1.0..0.0).contains(&z.re)) {
        ClipRange::Sharpening
    } else if eigenvalues_h.iter().all(|z| z.re > 0.0) {
        ClipRange::Smoothing
    } else {
        ClipRange::Unclassified
    }
}
