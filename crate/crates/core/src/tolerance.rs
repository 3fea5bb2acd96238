use serde::{Deserialize, Serialize};

/// Numerical tolerances shared across the crate.
///
/// The defaults are the values every operation uses when no explicit
/// tolerance set is passed. [`Tolerances::scaled`] multiplies the
/// tolerance-like fields (not the iteration budgets or the condition
/// threshold) by a common factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigenpair residual accepted by the eigensolver.
    pub eig_residual: f64,
    /// Relative LU pivot threshold.
    pub pivot: f64,
    /// Relative difference under which two `|μ|` count as tied.
    pub tie: f64,
    /// `|Im μ| > oscillation * |μ|` marks a non-real dominating eigenvalue.
    pub oscillation: f64,
    /// Singular value cutoff (relative to σ_max) for numerical rank.
    pub rank_cutoff: f64,
    /// `|s| < zero_coefficient * ‖vec X0‖` counts as a vanishing coefficient.
    pub zero_coefficient: f64,
    /// Largest imaginary part projected away from an attention spectrum.
    pub realness: f64,
    /// Row-sum tolerance for a stochastic matrix.
    pub row_sum: f64,
    /// Distance from 1 accepted for the Perron eigenvalue.
    pub perron_value: f64,
    /// Distance from the normalized all-ones vector accepted for the Perron eigenvector.
    pub perron_vector: f64,
    /// Eigenvector condition number at or above which a matrix is treated as
    /// non-diagonalizable.
    pub max_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig_residual: 1e-10,
            pivot: 1e-13,
            tie: 1e-9,
            oscillation: 1e-12,
            rank_cutoff: 1e-8,
            zero_coefficient: 1e-13,
            realness: 1e-9,
            row_sum: 1e-12,
            perron_value: 1e-9,
            perron_vector: 1e-8,
            max_condition: 1e12,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            eig_residual: self.eig_residual * factor,
            pivot: self.pivot * factor,
            tie: self.tie * factor,
            oscillation: self.oscillation * factor,
            rank_cutoff: self.rank_cutoff * factor,
            zero_coefficient: self.zero_coefficient * factor,
            realness: self.realness * factor,
            row_sum: self.row_sum * factor,
            perron_value: self.perron_value * factor,
            perron_vector: self.perron_vector * factor,
            max_condition: self.max_condition,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_leaves_condition_threshold() {
        let t = Tolerances::default().scaled(10.0);
        assert_eq!(t.tie, 1e-8);
        assert_eq!(t.max_condition, 1e12);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let t: Tolerances = serde_json::from_str(r#"{"tie": 1e-6}"#).unwrap();
        assert_eq!(t.tie, 1e-6);
        assert_eq!(t.pivot, 1e-13);
    }
}
