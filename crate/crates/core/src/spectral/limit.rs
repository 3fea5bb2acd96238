use num_complex::Complex64;
use serde::Serialize;

use super::dominance::DominanceReport;
use super::{phase, SpectralError};
use crate::tensor_core::{numerical_rank, solve_with, vec, ComplexMatrix, EigenDecomposition, RealMatrix, TokenMatrix};
use crate::Tolerances;

#[derive(Debug, Clone, Serialize)]
pub struct DominatingCoefficient {
    pub j: usize,
    pub i: usize,
    pub s: Complex64,
}

/// Asymptotic direction of `X_ℓ` predicted from the dominating eigenpairs.
#[derive(Debug, Clone, Serialize)]
pub struct LimitPrediction {
    /// Unit-Frobenius limit direction; `None` when the dominating `μ` do not
    /// share a common argument (the iterate keeps rotating).
    pub limit_direction: Option<RealMatrix>,
    /// `ln max |μ|`.
    pub growth_log_rate: f64,
    pub coefficients: Vec<DominatingCoefficient>,
    pub oscillatory: bool,
    pub rank_of_limit: Option<usize>,
    /// Frobenius norm of the summed dominating terms before normalization.
    pub limit_scale: f64,
    /// Relative size of the discarded imaginary part.
    pub imag_residue: f64,
}

pub fn predict_limit(
    x0: &TokenMatrix,
    spec_h: &EigenDecomposition,
    spec_a: &EigenDecomposition,
    report: &DominanceReport,
) -> Result<LimitPrediction, SpectralError> {
    predict_limit_with(x0, spec_h, spec_a, report, &Tolerances::default())
}

/// Expands `vec(X0)` in the eigenbasis `Q = V_H ⊗ V_A` and sums the
/// dominating terms `s_{j,i} v^A_i (v^H_j)ᵀ`.
pub fn predict_limit_with(
    x0: &TokenMatrix,
    spec_h: &EigenDecomposition,
    spec_a: &EigenDecomposition,
    report: &DominanceReport,
    tol: &Tolerances,
) -> Result<LimitPrediction, SpectralError> {
    let (n, d) = x0.shape();
    if spec_a.size() != n || spec_h.size() != d {
        return Err(SpectralError::Shape(format!(
            "X0 is {n}x{d} but the spectra have sizes {} (A) and {} (H)",
            spec_a.size(),
            spec_h.size()
        )));
    }
    if report.max_modulus == 0.0 {
        return Err(SpectralError::DegenerateSpectrum);
    }

    let va = spec_a.vectors();
    let vh = spec_h.vectors();
    let q = ComplexMatrix::from_fn(n * d, n * d, |r, c| vh[(r / n, c / n)] * va[(r % n, c % n)]);
    let rhs: Vec<Complex64> = vec(x0).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let s = solve_with(&q, &rhs, tol.pivot)?;

    let coefficients: Vec<DominatingCoefficient> = report
        .dominating
        .iter()
        .map(|e| DominatingCoefficient {
            j: e.j,
            i: e.i,
            s: s[e.h_col * n + e.a_col],
        })
        .collect();
    let threshold = tol.zero_coefficient * x0.frobenius_norm();
    let max_abs = coefficients.iter().fold(0.0f64, |m, c| m.max(c.s.norm()));
    if max_abs < threshold {
        return Err(SpectralError::ZeroCoefficient { max_abs, threshold });
    }

    let mut sum = ComplexMatrix::zeros(n, d);
    for (e, c) in report.dominating.iter().zip(&coefficients) {
        for r in 0..n {
            let left = c.s * va[(r, e.a_col)];
            for k in 0..d {
                sum[(r, k)] += left * vh[(k, e.h_col)];
            }
        }
    }
    let (re, im) = sum.parts();
    let limit_scale = re.frobenius_norm();
    let total = sum.frobenius_norm();
    let imag_residue = if total > 0.0 { im.frobenius_norm() / total } else { 0.0 };

    let phase0 = phase(report.dominating[0].mu);
    let coherent = report.dominating.iter().all(|e| {
        let diff = (phase(e.mu) - phase0).abs();
        diff.min(2.0 * std::f64::consts::PI - diff) <= 1e-12
    });
    let (limit_direction, rank_of_limit) = if coherent && limit_scale > 0.0 {
        let rank = numerical_rank(&re, tol.rank_cutoff)?;
        (Some(re.scale(1.0 / limit_scale)), Some(rank))
    } else {
        (None, None)
    };

    Ok(LimitPrediction {
        limit_direction,
        growth_log_rate: report.max_modulus.ln(),
        coefficients,
        oscillatory: report.oscillatory,
        rank_of_limit,
        limit_scale,
        imag_residue,
    })
}

/// `min(‖x̂ − l‖_F, ‖x̂ + l‖_F)` with `x̂ = x / ‖x‖_F`.
pub fn aligned_distance(x: &RealMatrix, l: &RealMatrix) -> f64 {
    let xn = x.scale(1.0 / x.frobenius_norm());
    xn.sub(l).frobenius_norm().min(xn.add(l).frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{attention_from_logits, AttentionMatrix};
    use crate::spectral::{combined_spectrum, dominance_report, ResidualMode};
    use crate::tensor_core::eig_general;
    use crate::testutil::random_matrix;

    fn iterate(x0: &RealMatrix, a: &RealMatrix, h: &RealMatrix, steps: usize) -> RealMatrix {
        let mut x = x0.clone();
        for _ in 0..steps {
            x = x.add(&a.matmul(&x).matmul_transposed(h));
            x.scale_in_place(1.0 / x.frobenius_norm());
        }
        x
    }

    #[test]
    fn two_by_two_worked_case() {
        let c = 9f64.ln();
        let a = attention_from_logits(&RealMatrix::from_rows(&[[c, 0.0], [0.0, c]])).unwrap();
        let h = RealMatrix::from_rows(&[[0.5]]);
        let x0 = RealMatrix::from_rows(&[[1.0], [0.0]]);
        let sh = eig_general(&h).unwrap();
        let cs = combined_spectrum(&sh, a.spectrum(), ResidualMode::WithResidual);
        let rep = dominance_report(&cs, &Tolerances::default());
        let lp = predict_limit(&x0, &sh, a.spectrum(), &rep).unwrap();
        let l = lp.limit_direction.unwrap();
        let expected = RealMatrix::from_rows(&[[1.0], [1.0]]).scale(std::f64::consts::FRAC_1_SQRT_2);
        assert!(aligned_distance(&l, &expected) < 1e-14);
        assert!(aligned_distance(&iterate(&x0, a.matrix(), &h, 500), &l) < 1e-12);
        assert_eq!(lp.rank_of_limit, Some(1));
        assert!((lp.growth_log_rate - 1.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn type1_rows_are_identical() {
        let g = random_matrix(4, 4, 8);
        let a = attention_from_logits(&g.add(&g.transpose()).scale(0.7)).unwrap();
        let h = RealMatrix::from_diag(&[0.9, 0.3, 0.1]);
        let sh = eig_general(&h).unwrap();
        let cs = combined_spectrum(&sh, a.spectrum(), ResidualMode::WithResidual);
        let rep = dominance_report(&cs, &Tolerances::default());
        let lp = predict_limit(&random_matrix(4, 3, 9), &sh, a.spectrum(), &rep).unwrap();
        let l = lp.limit_direction.unwrap();
        for r in 1..4 {
            for k in 0..3 {
                assert!((l[(r, k)] - l[(0, k)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_start_has_zero_coefficient() {
        let a = AttentionMatrix::uniform(2);
        let h = RealMatrix::from_rows(&[[0.5]]);
        let sh = eig_general(&h).unwrap();
        let cs = combined_spectrum(&sh, a.spectrum(), ResidualMode::WithResidual);
        let rep = dominance_report(&cs, &Tolerances::default());
        // X0 has zero column mean, so no component along the ones vector
        let x0 = RealMatrix::from_rows(&[[1.0], [-1.0]]);
        assert!(matches!(
            predict_limit(&x0, &sh, a.spectrum(), &rep),
            Err(SpectralError::ZeroCoefficient { .. })
        ));
    }

    #[test]
    fn rotating_pair_has_no_direction() {
        let a = AttentionMatrix::uniform(2);
        let h = RealMatrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        let sh = eig_general(&h).unwrap();
        let cs = combined_spectrum(&sh, a.spectrum(), ResidualMode::WithResidual);
        let rep = dominance_report(&cs, &Tolerances::default());
        assert!(rep.oscillatory);
        let lp = predict_limit(&random_matrix(2, 2, 1), &sh, a.spectrum(), &rep).unwrap();
        assert!(lp.limit_direction.is_none());
        assert!(lp.rank_of_limit.is_none());
    }
}
