//! Spectral analysis of the update operator `I + H ⊗ A`.
//!
//! Eigenvalues of `H` are indexed in ascending order of `|1 + λ^H|` and those
//! of `A` in ascending order of value, so `i = n − 1` is the Perron pair
//! (`λ^A_n = 1`) and `i = 0` is `λ^A_1`. Indices `i`, `j` in this module
//! always refer to these sorted positions.

mod combined;
mod dominance;
mod limit;
mod verdict;

pub use combined::{combined_spectrum, CombinedEntry, CombinedSpectrum};
pub use dominance::{
    classify_dominance, classify_dominance_with, dominance_report, CaseBranch, DominanceReport, DominantType,
};
pub use limit::{aligned_distance, predict_limit, predict_limit_with, LimitPrediction};
pub use verdict::{
    clip_range_classification, geometric_multiplicity, smoothing_verdict, ClipRange, SmoothingVerdict, Theorem3Case,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor_core::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("dominance table disagrees with direct maximization: {0}")]
    InternalInconsistency(String),
    #[error("all dominating coefficients vanish (max |s| = {max_abs:.3e}, threshold {threshold:.3e})")]
    ZeroCoefficient { max_abs: f64, threshold: f64 },
    #[error("every combined eigenvalue is zero")]
    DegenerateSpectrum,
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    #[default]
    WithResidual,
    NoResidual,
}

/// Argument in `(−π, π]`; negative reals map to `+π`.
pub fn phase(z: num_complex::Complex64) -> f64 {
    if z.im == 0.0 {
        if z.re < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        }
    } else {
        z.im.atan2(z.re)
    }
}

/// Phase in `(π/2, π] ∪ [−π, −π/2)`.
pub(crate) fn in_left_half(phi: f64) -> bool {
    !(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2).contains(&phi)
}
