//! Row-softmax attention matrices and their Perron structure.

use num_complex::Complex64;
use thiserror::Error;

use crate::tensor_core::{
    complex_norm, eig_general_with, EigOptions, EigenDecomposition, LinalgError, RealMatrix, TokenMatrix,
};
use crate::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("attention entry ({row}, {col}) underflowed to zero")]
    Underflow { row: usize, col: usize },
    #[error("attention entry ({row}, {col}) = {value} is not positive")]
    NotPositive { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    RowSum { row: usize, sum: f64 },
    #[error("attention spectrum is not real (max |Im λ| = {max_imag:.3e})")]
    ComplexSpectrum { max_imag: f64 },
    #[error("eigenvector matrix condition {condition:.3e} exceeds {threshold:.1e}")]
    NotDiagonalizable { condition: f64, threshold: f64 },
    #[error("Perron structure violated: {0}")]
    Perron(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Query/key projections `W_Q`, `W_K` (both `d × k`).
#[derive(Debug, Clone, PartialEq)]
pub struct QueryKeyWeights {
    w_q: RealMatrix,
    w_k: RealMatrix,
}

impl QueryKeyWeights {
    pub fn new(w_q: RealMatrix, w_k: RealMatrix) -> Result<Self, AttentionError> {
        if w_q.shape() != w_k.shape() || w_q.cols() == 0 {
            return Err(AttentionError::Shape(format!(
                "W_Q is {:?} and W_K is {:?}; both must be d x k with k >= 1",
                w_q.shape(),
                w_k.shape()
            )));
        }
        Ok(Self { w_q, w_k })
    }

    pub fn w_q(&self) -> &RealMatrix {
        &self.w_q
    }

    pub fn w_k(&self) -> &RealMatrix {
        &self.w_k
    }

    pub fn scale_dim(&self) -> usize {
        self.w_q.cols()
    }
}

/// A validated positive, row-stochastic, diagonalizable matrix with real
/// spectrum. Eigenpairs are sorted by ascending eigenvalue, so the Perron
/// pair is last.
#[derive(Debug, Clone)]
pub struct AttentionMatrix {
    a: RealMatrix,
    spectrum: EigenDecomposition,
    perron_index: usize,
}

impl AttentionMatrix {
    pub fn new(a: RealMatrix) -> Result<Self, AttentionError> {
        Self::with_tolerances(a, &Tolerances::default())
    }

    pub fn with_tolerances(a: RealMatrix, tol: &Tolerances) -> Result<Self, AttentionError> {
        check_stochastic(&a, tol)?;
        let n = a.rows();
        let opts = EigOptions {
            residual_tol: tol.eig_residual,
            ..EigOptions::default()
        };
        let mut spectrum = eig_general_with(&a, &opts)?;
        let max_imag = spectrum.eigenvalues().iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        if max_imag > tol.realness {
            return Err(AttentionError::ComplexSpectrum { max_imag });
        }
        spectrum.project_real();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| spectrum.eigenvalues()[x].re.total_cmp(&spectrum.eigenvalues()[y].re));
        let spectrum = spectrum.reordered(&order);

        if spectrum.eigvec_condition() >= tol.max_condition {
            return Err(AttentionError::NotDiagonalizable {
                condition: spectrum.eigvec_condition(),
                threshold: tol.max_condition,
            });
        }

        let values: Vec<f64> = spectrum.eigenvalues().iter().map(|z| z.re).collect();
        let near_one = values.iter().filter(|&&v| (v - 1.0).abs() <= tol.perron_value).count();
        if near_one != 1 {
            return Err(AttentionError::Perron(format!(
                "{near_one} eigenvalues within {:.0e} of 1 (expected exactly one)",
                tol.perron_value
            )));
        }
        if let Some(&v) = values.iter().find(|&&v| v <= -1.0 || v > 1.0 + tol.perron_value) {
            return Err(AttentionError::Perron(format!("eigenvalue {v} outside (-1, 1]")));
        }
        let perron_index = n - 1;
        let err = perron_vector_error(&spectrum.vector(perron_index));
        if err > tol.perron_vector {
            return Err(AttentionError::Perron(format!(
                "Perron eigenvector deviates from the normalized ones vector by {err:.3e}"
            )));
        }
        Ok(Self {
            a,
            spectrum,
            perron_index,
        })
    }

    /// The uniform matrix `(1/n) 1 1ᵀ`.
    pub fn uniform(n: usize) -> Self {
        Self::new(RealMatrix::from_fn(n, n, |_, _| 1.0 / n as f64)).expect("uniform attention is valid")
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn spectrum(&self) -> &EigenDecomposition {
        &self.spectrum
    }

    pub fn perron_index(&self) -> usize {
        self.perron_index
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum.eigenvalues().iter().map(|z| z.re).collect()
    }

    /// `1 − max_{i ≠ perron} |λ_i|`.
    pub fn perron_gap(&self) -> f64 {
        perron_gap(self)
    }
}

pub fn perron_gap(a: &AttentionMatrix) -> f64 {
    let rest = a
        .spectrum
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != a.perron_index)
        .fold(0.0f64, |m, (_, z)| m.max(z.norm()));
    1.0 - rest
}

/// `A = rowsoftmax(X W_Q W_Kᵀ Xᵀ / √k)`.
pub fn softmax_attention(x: &TokenMatrix, w: &QueryKeyWeights) -> Result<AttentionMatrix, AttentionError> {
    if x.cols() != w.w_q.rows() {
        return Err(AttentionError::Shape(format!(
            "tokens have {} features but the weights expect {}",
            x.cols(),
            w.w_q.rows()
        )));
    }
    let q = x.matmul(&w.w_q);
    let k = x.matmul(&w.w_k);
    let logits = q.matmul_transposed(&k).scale(1.0 / (w.scale_dim() as f64).sqrt());
    attention_from_logits(&logits)
}

pub fn attention_from_logits(logits: &RealMatrix) -> Result<AttentionMatrix, AttentionError> {
    attention_from_logits_with(logits, &Tolerances::default())
}

pub fn attention_from_logits_with(logits: &RealMatrix, tol: &Tolerances) -> Result<AttentionMatrix, AttentionError> {
    AttentionMatrix::with_tolerances(row_softmax(logits)?, tol)
}

/// Row-wise softmax with max subtraction. Fails on entries that evaluate to 0.
pub fn row_softmax(logits: &RealMatrix) -> Result<RealMatrix, AttentionError> {
    if !logits.is_square() {
        return Err(AttentionError::Shape(format!(
            "logits must be square, got {:?}",
            logits.shape()
        )));
    }
    let n = logits.rows();
    let mut a = RealMatrix::zeros(n, n);
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (j, e) in exps.into_iter().enumerate() {
            let v = e / total;
            if v == 0.0 {
                return Err(AttentionError::Underflow { row: i, col: j });
            }
            a[(i, j)] = v;
        }
    }
    Ok(a)
}

fn check_stochastic(a: &RealMatrix, tol: &Tolerances) -> Result<(), AttentionError> {
    if !a.is_square() || a.rows() == 0 {
        return Err(AttentionError::Shape(format!(
            "attention must be square and non-empty, got {:?}",
            a.shape()
        )));
    }
    for i in 0..a.rows() {
        for (j, &v) in a.row(i).iter().enumerate() {
            if !(v > 0.0) {
                return Err(AttentionError::NotPositive {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        let sum: f64 = a.row(i).iter().sum();
        if (sum - 1.0).abs() > tol.row_sum {
            return Err(AttentionError::RowSum { row: i, sum });
        }
    }
    Ok(())
}

fn perron_vector_error(v: &[Complex64]) -> f64 {
    let n = v.len() as f64;
    let target = Complex64::new(1.0 / n.sqrt(), 0.0);
    let diff: Vec<Complex64> = v.iter().map(|z| z - target).collect();
    let flipped: Vec<Complex64> = v.iter().map(|z| z + target).collect();
    complex_norm(&diff).min(complex_norm(&flipped))
}

/// Measured Perron structure of a positive row-stochastic matrix. Unlike
/// [`AttentionMatrix::new`] this does not require a real spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronReport {
    pub max_row_sum_error: f64,
    /// Number of eigenvalues within the Perron tolerance of 1.
    pub near_one: usize,
    /// Distance from the normalized ones vector of the eigenvector closest to 1.
    pub perron_vector_error: f64,
    pub max_modulus: f64,
    pub max_imag: f64,
}

impl PerronReport {
    pub fn holds(&self, tol: &Tolerances) -> bool {
        self.max_row_sum_error <= tol.row_sum
            && self.near_one == 1
            && self.perron_vector_error <= tol.perron_vector
            && self.max_modulus <= 1.0 + tol.perron_value
    }

    pub fn is_real(&self, tol: &Tolerances) -> bool {
        self.max_imag <= tol.realness
    }
}

pub fn perron_report(a: &RealMatrix, tol: &Tolerances) -> Result<PerronReport, AttentionError> {
    if !a.is_square() || a.rows() == 0 {
        return Err(AttentionError::Shape(format!(
            "expected a square matrix, got {:?}",
            a.shape()
        )));
    }
    let opts = EigOptions {
        residual_tol: tol.eig_residual,
        ..EigOptions::default()
    };
    let eig = eig_general_with(a, &opts)?;
    let ev = eig.eigenvalues();
    let one = Complex64::new(1.0, 0.0);
    let closest = (0..ev.len())
        .min_by(|&x, &y| (ev[x] - one).norm().total_cmp(&(ev[y] - one).norm()))
        .expect("non-empty");
    Ok(PerronReport {
        max_row_sum_error: (0..a.rows())
            .map(|i| (a.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max),
        near_one: ev.iter().filter(|z| (*z - one).norm() <= tol.perron_value).count(),
        perron_vector_error: perron_vector_error(&eig.vector(closest)),
        max_modulus: ev.iter().fold(0.0f64, |m, z| m.max(z.norm())),
        max_imag: ev.iter().fold(0.0f64, |m, z| m.max(z.im.abs())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;

    fn sym(seed: u64, n: usize) -> RealMatrix {
        let g = random_matrix(n, n, seed);
        g.add(&g.transpose()).scale(std::f64::consts::FRAC_1_SQRT_2)
    }

    #[test]
    fn zero_tokens_give_uniform_rows() {
        let w = QueryKeyWeights::new(random_matrix(3, 2, 1), random_matrix(3, 2, 2)).unwrap();
        let a = softmax_attention(&RealMatrix::zeros(4, 3), &w).unwrap();
        assert!(a.matrix().data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!((a.perron_gap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn huge_logit_underflows() {
        let logits = RealMatrix::from_rows(&[[1000.0, 0.0], [0.0, 0.0]]);
        assert_eq!(
            attention_from_logits(&logits).unwrap_err(),
            AttentionError::Underflow { row: 0, col: 1 }
        );
    }

    #[test]
    fn two_by_two_closed_form() {
        let c = 9f64.ln();
        let a = attention_from_logits(&RealMatrix::from_rows(&[[c, 0.0], [0.0, c]])).unwrap();
        let expected = [0.9, 0.1, 0.1, 0.9];
        for (x, y) in a.matrix().data().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
        let ev = a.eigenvalues();
        assert!((ev[0] - 0.8).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
        assert!((a.perron_gap() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn random_tokens_have_perron_structure() {
        let x = random_matrix(4, 4, 10);
        let w = QueryKeyWeights::new(random_matrix(4, 4, 11), random_matrix(4, 4, 12)).unwrap();
        let logits = x.matmul(w.w_q()).matmul_transposed(&x.matmul(w.w_k())).scale(0.5);
        let report = perron_report(&row_softmax(&logits).unwrap(), &Tolerances::default()).unwrap();
        assert!(report.holds(&Tolerances::default()), "{report:?}");
    }

    #[test]
    fn symmetric_logits_validate() {
        for seed in 0..50 {
            let a = attention_from_logits(&sym(seed, 2 + seed as usize % 7)).unwrap();
            assert!(a.perron_gap() > 0.0);
            assert_eq!(a.perron_index(), a.n() - 1);
            assert!(a.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn row_shift_invariance() {
        let logits = random_matrix(5, 5, 3);
        let shifted = RealMatrix::from_fn(5, 5, |i, j| logits[(i, j)] + 10.0 * i as f64 - 3.0);
        let a = row_softmax(&logits).unwrap();
        let b = row_softmax(&shifted).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-15);
    }

    #[test]
    fn rejects_non_stochastic_input() {
        let bad = RealMatrix::from_rows(&[[0.5, 0.6], [0.5, 0.5]]);
        assert!(matches!(
            AttentionMatrix::new(bad),
            Err(AttentionError::RowSum { row: 0, .. })
        ));
        let neg = RealMatrix::from_rows(&[[1.5, -0.5], [0.5, 0.5]]);
        assert!(matches!(
            AttentionMatrix::new(neg),
            Err(AttentionError::NotPositive { .. })
        ));
    }

    #[test]
    fn general_logits_can_have_complex_spectrum() {
        let found = (0..200).any(|seed| {
            matches!(
                attention_from_logits(&random_matrix(6, 6, 500 + seed)),
                Err(AttentionError::ComplexSpectrum { .. })
            )
        });
        assert!(found);
    }
}
