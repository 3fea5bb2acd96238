//! Oversmoothing measurements of a token matrix: high/low frequency ratio,
//! mean pairwise cosine similarity and effective rank.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::tensor_core::{frobenius, ComplexMatrix, LinalgError, RealMatrix, TokenMatrix};

const NEGLIGIBLE: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingMetrics {
    /// `‖HFC‖_F / ‖LFC‖_F`; `+inf` when the column means vanish.
    #[serde(serialize_with = "crate::serde_float::serialize")]
    pub hfc_lfc: f64,
    pub mean_cosine: f64,
    pub effective_rank: f64,
}

/// `‖(I − 11ᵀ/n) X‖_F / ‖(11ᵀ/n) X‖_F`.
pub fn hfc_lfc_ratio(x: &TokenMatrix) -> Result<f64, MetricsError> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(MetricsError::NotApplicable("empty token matrix"));
    }
    let mean: Vec<f64> = (0..d)
        .map(|k| (0..n).map(|i| x[(i, k)]).sum::<f64>() / n as f64)
        .collect();
    let lfc = frobenius(&mean) * (n as f64).sqrt();
    let centred: Vec<f64> = (0..n * d).map(|idx| x[(idx / d, idx % d)] - mean[idx % d]).collect();
    let hfc = frobenius(&centred);
    ratio(hfc, lfc)
}

fn ratio(hfc: f64, lfc: f64) -> Result<f64, MetricsError> {
    match (hfc <= NEGLIGIBLE, lfc <= NEGLIGIBLE) {
        (true, true) => Err(MetricsError::Degenerate("both frequency components vanish")),
        (true, false) => Ok(0.0),
        (false, true) => Ok(f64::INFINITY),
        (false, false) => Ok(hfc / lfc),
    }
}

/// Low- and high-pass projectors `F⁻¹ diag(1, 0, …, 0) F` and its complement,
/// built from the unitary-scaled DFT matrix `F_{kl} = e^{−2πi kl/n}`.
pub fn build_dft_projectors(n: usize) -> (RealMatrix, RealMatrix) {
    let w =
        |k: usize, l: usize| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ((k * l) % n) as f64 / n as f64);
    let f = ComplexMatrix::from_fn(n, n, w);
    let f_inv = ComplexMatrix::from_fn(n, n, |k, l| w(k, l).conj() / n as f64);
    let mask = ComplexMatrix::from_fn(n, n, |k, l| {
        if k == 0 && l == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let (lfc, _) = f_inv.matmul(&mask).matmul(&f).parts();
    let hfc = RealMatrix::identity(n).sub(&lfc);
    (lfc, hfc)
}

/// HFC/LFC computed through the explicit projectors.
pub fn hfc_lfc_ratio_projected(x: &TokenMatrix) -> Result<f64, MetricsError> {
    let (lfc, hfc) = build_dft_projectors(x.rows());
    ratio(hfc.matmul(x).frobenius_norm(), lfc.matmul(x).frobenius_norm())
}

/// Mean of `cos(x_i, x_j)` over unordered row pairs; pairs involving a zero row are skipped.
pub fn mean_cosine_similarity(x: &TokenMatrix) -> Result<f64, MetricsError> {
    let n = x.rows();
    if n < 2 {
        return Err(MetricsError::NotApplicable("mean cosine needs at least two rows"));
    }
    let norms: Vec<f64> = (0..n).map(|i| frobenius(x.row(i))).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        if norms[i] <= NEGLIGIBLE {
            continue;
        }
        for j in i + 1..n {
            if norms[j] <= NEGLIGIBLE {
                continue;
            }
            let dot: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a / norms[i]) * (b / norms[j]))
                .sum();
            total += dot.clamp(-1.0, 1.0);
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::Degenerate("every row pair involves a zero row"));
    }
    Ok(total / count as f64)
}

/// `exp(−Σ p_i ln p_i)` with `p_i = σ_i / Σσ`.
pub fn effective_rank(x: &TokenMatrix) -> Result<f64, MetricsError> {
    let sigma = crate::tensor_core::singular_values(x)?;
    effective_rank_of(&sigma)
}

fn effective_rank_of(sigma: &[f64]) -> Result<f64, MetricsError> {
    let total: f64 = sigma.iter().sum();
    if !(total > 0.0) {
        return Err(MetricsError::Degenerate("zero matrix has no effective rank"));
    }
    let entropy: f64 = sigma
        .iter()
        .map(|&s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok(entropy.exp())
}

pub fn metrics_of(x: &TokenMatrix) -> Result<SmoothingMetrics, MetricsError> {
    Ok(SmoothingMetrics {
        hfc_lfc: hfc_lfc_ratio(x)?,
        mean_cosine: mean_cosine_similarity(x)?,
        effective_rank: effective_rank(x)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;

    fn col(v: &[f64]) -> RealMatrix {
        RealMatrix::from_fn(v.len(), 1, |i, _| v[i])
    }

    #[test]
    fn hfc_lfc_examples() {
        assert_eq!(hfc_lfc_ratio(&col(&[1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(hfc_lfc_ratio(&col(&[1.0, -1.0])).unwrap(), f64::INFINITY);
        assert!((hfc_lfc_ratio(&col(&[2.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((hfc_lfc_ratio_projected(&col(&[2.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            hfc_lfc_ratio(&col(&[0.0, 0.0])),
            Err(MetricsError::Degenerate(_))
        ));
    }

    #[test]
    fn dft_projectors() {
        let (l, h) = build_dft_projectors(1);
        assert_eq!((l[(0, 0)], h[(0, 0)]), (1.0, 0.0));
        let (l, h) = build_dft_projectors(4);
        assert!(l.data().iter().all(|&v| (v - 0.25).abs() < 1e-12));
        assert!(l.matmul(&l).sub(&l).max_abs() < 1e-12);
        assert!(h.matmul(&h).sub(&h).max_abs() < 1e-12);
        for seed in 0..5 {
            let x = random_matrix(6, 3, seed);
            assert!((hfc_lfc_ratio(&x).unwrap() - hfc_lfc_ratio_projected(&x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn cosine_examples() {
        let two = |a: [f64; 2], b: [f64; 2]| mean_cosine_similarity(&RealMatrix::from_rows(&[a, b])).unwrap();
        assert!((two([1.0, 2.0], [1.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(two([1.0, 0.0], [0.0, 1.0]), 0.0);
        assert!((two([1.0, 0.0], [1.0, 1.0]) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let with_zero = RealMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]);
        assert!((mean_cosine_similarity(&with_zero).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(mean_cosine_similarity(&RealMatrix::from_rows(&[[1.0, 0.0]])).is_err());
        assert!(mean_cosine_similarity(&RealMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn effective_rank_examples() {
        assert!((effective_rank(&RealMatrix::identity(2)).unwrap() - 2.0).abs() < 1e-14);
        let outer = RealMatrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * (j as f64 + 1.0));
        assert!((effective_rank(&outer).unwrap() - 1.0).abs() < 1e-12);
        let expected = (-(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln())).exp();
        assert!((effective_rank(&RealMatrix::from_diag(&[3.0, 1.0])).unwrap() - expected).abs() < 1e-14);
        assert!(effective_rank(&RealMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn identical_rows_are_fully_smoothed() {
        let x = RealMatrix::from_fn(5, 3, |_, j| [0.3, -1.0, 2.0][j]);
        let m = metrics_of(&x).unwrap();
        assert_eq!(m.hfc_lfc, 0.0);
        assert!((m.mean_cosine - 1.0).abs() < 1e-15);
        assert!((m.effective_rank - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_sign_rank_one() {
        let v = [1.0, -2.0, 0.5];
        let a = [0.3, 0.4];
        let x = RealMatrix::from_fn(3, 2, |i, j| v[i] * a[j]);
        let m = metrics_of(&x).unwrap();
        assert!((m.effective_rank - 1.0).abs() < 1e-12);
        assert!(m.mean_cosine < 1.0);
        assert!(m.hfc_lfc > 0.0);
    }
}
