//! Numerical laboratory for oversmoothing in the simplified attention update
//! `X ← X + A X Hᵀ`.
//!
//! The crate is organised bottom-up: [`tensor_core`] holds the dense kernels,
//! [`attention`] builds validated row-stochastic matrices, [`spectral`]
//! analyses the spectrum of `I + H ⊗ A`, [`dynamics`] iterates the update,
//! [`metrics`] measures smoothing, and [`reparam`] builds eigenvalue-clipped
//! value projections.

pub mod attention;
pub mod dynamics;
pub mod metrics;
pub mod reparam;
pub mod serde_float;
pub mod spectral;
pub mod tensor_core;
pub mod tolerance;

pub use tolerance::Tolerances;

#[cfg(test)]
pub(crate) mod testutil;
