use num_complex::Complex64;
use serde::Serialize;

use super::ResidualMode;
use crate::tensor_core::EigenDecomposition;

/// One eigenvalue `μ = 1 + λ^H_j λ^A_i` (or `λ^H_j λ^A_i` without residual).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinedEntry {
    /// Sorted position of `λ^A`.
    pub i: usize,
    /// Sorted position of `λ^H`.
    pub j: usize,
    /// Column of the eigenvector in the decomposition of `A`.
    pub a_col: usize,
    /// Column of the eigenvector in the decomposition of `H`.
    pub h_col: usize,
    pub lambda_a: f64,
    pub lambda_h: Complex64,
    pub mu: Complex64,
}

impl CombinedEntry {
    pub fn modulus(&self) -> f64 {
        self.mu.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinedSpectrum {
    /// All `n·d` entries, by descending `|μ|`.
    pub entries: Vec<CombinedEntry>,
    pub residual_mode: ResidualMode,
    /// `λ^A` in ascending order.
    pub lambda_a: Vec<f64>,
    /// `λ^H` in ascending order of `|1 + λ^H|`.
    pub lambda_h: Vec<Complex64>,
}

impl CombinedSpectrum {
    pub fn n(&self) -> usize {
        self.lambda_a.len()
    }

    pub fn d(&self) -> usize {
        self.lambda_h.len()
    }

    pub fn max_modulus(&self) -> f64 {
        self.entries.first().map_or(0.0, CombinedEntry::modulus)
    }

    pub fn mu_values(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.mu).collect()
    }

    /// `μ` for sorted positions `(j, i)`.
    pub fn mu(&self, j: usize, i: usize) -> Complex64 {
        mu_of(self.lambda_h[j], self.lambda_a[i], self.residual_mode)
    }
}

fn mu_of(lambda_h: Complex64, lambda_a: f64, mode: ResidualMode) -> Complex64 {
    match mode {
        ResidualMode::WithResidual => 1.0 + lambda_h * lambda_a,
        ResidualMode::NoResidual => lambda_h * lambda_a,
    }
}

/// Eigenvalues of `I + H ⊗ A` (or `H ⊗ A`) from the factor spectra. The
/// eigenvalues of `spec_a` are taken as real.
pub fn combined_spectrum(
    spec_h: &EigenDecomposition,
    spec_a: &EigenDecomposition,
    mode: ResidualMode,
) -> CombinedSpectrum {
    let ev_h = spec_h.eigenvalues();
    let ev_a: Vec<f64> = spec_a.eigenvalues().iter().map(|z| z.re).collect();

    let mut h_order: Vec<usize> = (0..ev_h.len()).collect();
    h_order.sort_by(|&x, &y| {
        let (a, b) = (ev_h[x], ev_h[y]);
        (1.0 + a)
            .norm()
            .total_cmp(&(1.0 + b).norm())
            .then(a.re.total_cmp(&b.re))
            .then(a.im.total_cmp(&b.im))
    });
    let mut a_order: Vec<usize> = (0..ev_a.len()).collect();
    a_order.sort_by(|&x, &y| ev_a[x].total_cmp(&ev_a[y]));

    let mut entries = Vec::with_capacity(h_order.len() * a_order.len());
    for (j, &h_col) in h_order.iter().enumerate() {
        for (i, &a_col) in a_order.iter().enumerate() {
            let lambda_h = ev_h[h_col];
            let lambda_a = ev_a[a_col];
            entries.push(CombinedEntry {
                i,
                j,
                a_col,
                h_col,
                lambda_a,
                lambda_h,
                mu: mu_of(lambda_h, lambda_a, mode),
            });
        }
    }
    entries.sort_by(|x, y| y.modulus().total_cmp(&x.modulus()));

    CombinedSpectrum {
        entries,
        residual_mode: mode,
        lambda_a: a_order.iter().map(|&k| ev_a[k]).collect(),
        lambda_h: h_order.iter().map(|&k| ev_h[k]).collect(),
    }
}
