//! Dense real/complex kernels: column-stacking `vec`, Kronecker products,
//! the general (non-symmetric) eigensolver, SVD and LU solves.
//!
//! Everything here is sized for desk-scale problems (the eigen path accepts
//! matrices up to [`EigOptions::max_size`], 64 by default).

mod assignment;
mod eigen;
mod kron;
mod matrix;
mod solve;
mod svd;

pub use assignment::{match_multisets, MultisetMatch};
pub use eigen::{eig_general, eig_general_with, eigenvalues, EigOptions, EigenDecomposition};
pub use kron::{kron, unvec, vec};
pub use matrix::{complex_norm, ComplexMatrix, RealMatrix, TokenMatrix};
pub use solve::{inverse, solve, solve_with};
pub use svd::{condition_number, numerical_rank, svd, svd_with, SingularValueDecomposition};

pub(crate) use matrix::frobenius;
pub(crate) use svd::singular_values;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{routine} did not converge: {detail}")]
    NonConvergence { routine: &'static str, detail: String },
    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },
}
