//! Value/projection matrices parameterized by their eigendecomposition,
//! `H = V_H · diag(clip(ψ)) · V_H⁻¹`, with the clip range selecting whether
//! `H` smooths or sharpens.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor_core::{condition_number, eigenvalues, inverse, match_multisets, LinalgError, RealMatrix};

const MAX_CONDITION: f64 = 1e12;
const WELL_CONDITIONED: f64 = 1e6;
const INIT_ATTEMPTS: usize = 16;
pub const PSI_STD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReparamError {
    #[error("eigenbasis condition number {condition:.3e} is not below {limit:.0e}")]
    SingularBasis { condition: f64, limit: f64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("realized spectrum differs from clip(psi) by {discrepancy:.3e} (allowed {allowed:.0e})")]
    Realization { discrepancy: f64, allowed: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReparamMode {
    /// Eigenvalues clipped into `[−1, 0]`.
    Sharpen,
    /// Eigenvalues clipped into `[0, 1]`.
    #[default]
    Smooth,
}

impl ReparamMode {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ReparamMode::Sharpen => (-1.0, 0.0),
            ReparamMode::Smooth => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReparamValueProjection {
    pub v_h: RealMatrix,
    pub psi: Vec<f64>,
    pub mode: ReparamMode,
    pub realized_h: RealMatrix,
    pub v_condition: f64,
    /// `clip(ψ)` in the order of the columns of `V_H`.
    pub clipped: Vec<f64>,
    /// Largest distance between the eigenvalues of `realized_h` and `clip(ψ)`
    /// after optimal matching.
    pub spectrum_discrepancy: f64,
    /// Some clipped eigenvalue is exactly zero, so neither dominance type is
    /// guaranteed.
    pub has_zero_eigenvalue: bool,
}

/// Componentwise `min(max(ψ, lower), upper)`.
pub fn clip(psi: &[f64], lower: f64, upper: f64) -> Vec<f64> {
    assert!(lower <= upper, "clip bounds reversed: [{lower}, {upper}]");
    psi.iter().map(|&p| p.max(lower).min(upper)).collect()
}

pub fn build_reparam(v_h: &RealMatrix, psi: &[f64], mode: ReparamMode) -> Result<ReparamValueProjection, ReparamError> {
    let d = v_h.rows();
    if !v_h.is_square() || psi.len() != d {
        return Err(ReparamError::Shape(format!(
            "V_H is {}x{} but psi has length {}",
            v_h.rows(),
            v_h.cols(),
            psi.len()
        )));
    }
    let v_condition = condition_number(v_h)?;
    if !(v_condition < MAX_CONDITION) {
        return Err(ReparamError::SingularBasis {
            condition: v_condition,
            limit: MAX_CONDITION,
        });
    }
    let (lo, hi) = mode.bounds();
    let clipped = clip(psi, lo, hi);
    let v_inv = inverse(v_h)?;
    let scaled = RealMatrix::from_fn(d, d, |r, c| v_h[(r, c)] * clipped[c]);
    let realized_h = scaled.matmul(&v_inv);

    let want: Vec<Complex64> = clipped.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let spectrum_discrepancy = match_multisets(&eigenvalues(&realized_h)?, &want)?.max_discrepancy;
    let allowed = if v_condition < WELL_CONDITIONED { 1e-8 } else { 1e-6 };
    if !(spectrum_discrepancy <= allowed) {
        return Err(ReparamError::Realization {
            discrepancy: spectrum_discrepancy,
            allowed,
        });
    }

    Ok(ReparamValueProjection {
        v_h: v_h.clone(),
        psi: psi.to_vec(),
        mode,
        realized_h,
        v_condition,
        has_zero_eigenvalue: clipped.contains(&0.0),
        clipped,
        spectrum_discrepancy,
    })
}

/// He-initialized `V_H` (std `√(2/d)`) and `ψ ~ N(0, 0.1²)`. Bases that fail
/// the condition check are redrawn.
pub fn init_reparam<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<(RealMatrix, Vec<f64>), ReparamError> {
    if d == 0 {
        return Err(ReparamError::Shape("d must be at least 1".into()));
    }
    let he = Normal::new(0.0, (2.0 / d as f64).sqrt()).expect("positive std");
    let psi_dist = Normal::new(0.0, PSI_STD).expect("positive std");
    let mut condition = f64::INFINITY;
    for _ in 0..INIT_ATTEMPTS {
        let v_h = RealMatrix::from_fn(d, d, |_, _| he.sample(rng));
        condition = condition_number(&v_h)?;
        if condition < MAX_CONDITION {
            let psi = (0..d).map(|_| psi_dist.sample(rng)).collect();
            return Ok((v_h, psi));
        }
    }
    Err(ReparamError::SingularBasis {
        condition,
        limit: MAX_CONDITION,
    })
}
