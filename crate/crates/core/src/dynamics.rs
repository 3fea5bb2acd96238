//! Iteration of the attention update `X ← X + A X Hᵀ` and its layer-normalized
//! variants.
//!
//! The row-space form is chosen so that `vec(X_ℓ) = (I + H ⊗ A) vec(X_{ℓ−1})`
//! holds exactly; in terms of value/projection weights `H = W_projᵀ W_Vᵀ`.
//! The attention matrix is passed as a plain matrix so runs can use any
//! row-stochastic `A`, including ones whose spectrum is not real.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{metrics_of, MetricsError, SmoothingMetrics};
use crate::spectral::aligned_distance;
use crate::tensor_core::{RealMatrix, TokenMatrix};

const OVERFLOW_LIMIT: f64 = 1e300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid update config: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("iterate overflowed at layer {layer}; enable renormalize")]
    Overflow { layer: usize },
    #[error("iterate collapsed to zero at layer {layer}")]
    Vanished { layer: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: f64,
}

impl LayerNormParams {
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(gamma: Vec<f64>, beta: Vec<f64>, epsilon: f64) -> Result<Self, DynamicsError> {
        if gamma.len() != beta.len() {
            return Err(DynamicsError::Config(format!(
                "gamma has length {} but beta has length {}",
                gamma.len(),
                beta.len()
            )));
        }
        if !(epsilon > 0.0) {
            return Err(DynamicsError::Config(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self { gamma, beta, epsilon })
    }

    /// `γ = 1`, `β = 0`.
    pub fn identity(d: usize) -> Self {
        Self {
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LnMode {
    #[default]
    None,
    PreLn,
    PostLn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub residual: bool,
    pub ln_mode: LnMode,
    pub ln_params: Option<LayerNormParams>,
    pub depth: usize,
    pub record_every: usize,
    /// Rescale to unit Frobenius norm after every step (linear updates only).
    pub renormalize: bool,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            residual: true,
            ln_mode: LnMode::None,
            ln_params: None,
            depth: 2000,
            record_every: 10,
            renormalize: true,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self, d: usize) -> Result<(), DynamicsError> {
        if self.depth == 0 {
            return Err(DynamicsError::Config("depth must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(DynamicsError::Config("record_every must be at least 1".into()));
        }
        match (&self.ln_mode, &self.ln_params) {
            (LnMode::None, Some(_)) => Err(DynamicsError::Config("ln_params given but ln_mode is none".into())),
            (LnMode::PreLn | LnMode::PostLn, None) => Err(DynamicsError::Config("ln_mode needs ln_params".into())),
            (LnMode::PreLn | LnMode::PostLn, Some(_)) if self.renormalize => Err(DynamicsError::Config(
                "renormalize changes layer-normalized dynamics; disable it for pre_ln/post_ln".into(),
            )),
            (_, Some(p)) if p.dim() != d => Err(DynamicsError::Config(format!(
                "ln_params have dimension {} but tokens have {d} features",
                p.dim()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub layer: usize,
    pub metrics: SmoothingMetrics,
    /// `ln(‖X_ℓ‖_F / ‖X_0‖_F)`, accumulated across renormalizations.
    pub frobenius_log: f64,
    /// Sign-aligned Frobenius distance between the normalized iterates at
    /// layers `ℓ − 1` and `ℓ`.
    pub direction_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Iterate after the last layer (unit norm when renormalizing).
    pub final_state: RealMatrix,
    /// `ln(‖X_L‖_F / ‖X_0‖_F)`.
    pub final_frobenius_log: f64,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryRecord {
        self.records.last().expect("trajectories have at least one record")
    }

    pub fn final_direction(&self) -> RealMatrix {
        self.final_state.scale(1.0 / self.final_state.frobenius_norm())
    }
}

fn check_shapes(x: &TokenMatrix, a: &RealMatrix, h: &RealMatrix) -> Result<(), DynamicsError> {
    let (n, d) = x.shape();
    if a.shape() != (n, n) || h.shape() != (d, d) {
        return Err(DynamicsError::Shape(format!(
            "X is {n}x{d}, A is {:?}, H is {:?}",
            a.shape(),
            h.shape()
        )));
    }
    Ok(())
}

/// `X + A X Hᵀ`, or `A X Hᵀ` without the residual.
pub fn step(x: &TokenMatrix, a: &RealMatrix, h: &RealMatrix, residual: bool) -> TokenMatrix {
    let update = a.matmul(x).matmul_transposed(h);
    if residual {
        x.add(&update)
    } else {
        update
    }
}

/// Row-wise `(x − mean) / sqrt(var + ε) ⊙ γ + β` with population variance.
pub fn layer_norm(x: &TokenMatrix, ln: &LayerNormParams) -> TokenMatrix {
    let (n, d) = x.shape();
    let mut out = RealMatrix::zeros(n, d);
    for i in 0..n {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + ln.epsilon).sqrt();
        for (k, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = (row[k] - mean) * inv * ln.gamma[k] + ln.beta[k];
        }
    }
    out
}

/// `X + A · LN(X) · Hᵀ`.
pub fn step_pre_ln(x: &TokenMatrix, a: &RealMatrix, h: &RealMatrix, ln: &LayerNormParams) -> TokenMatrix {
    x.add(&a.matmul(&layer_norm(x, ln)).matmul_transposed(h))
}

/// `LN(X + A X Hᵀ)`.
pub fn step_post_ln(x: &TokenMatrix, a: &RealMatrix, h: &RealMatrix, ln: &LayerNormParams) -> TokenMatrix {
    layer_norm(&step(x, a, h, true), ln)
}

fn apply(x: &TokenMatrix, a: &RealMatrix, h: &RealMatrix, cfg: &UpdateConfig) -> TokenMatrix {
    match (cfg.ln_mode, &cfg.ln_params) {
        (LnMode::PreLn, Some(ln)) => {
            let branch = a.matmul(&layer_norm(x, ln)).matmul_transposed(h);
            if cfg.residual {
                x.add(&branch)
            } else {
                branch
            }
        }
        (LnMode::PostLn, Some(ln)) => layer_norm(&step(x, a, h, cfg.residual), ln),
        _ => step(x, a, h, cfg.residual),
    }
}

/// Applies the configured update `cfg.depth` times, recording metrics every
/// `record_every` layers and at the last layer.
pub fn run(x0: &TokenMatrix, a: &RealMatrix, h: &RealMatrix, cfg: &UpdateConfig) -> Result<Trajectory, DynamicsError> {
    check_shapes(x0, a, h)?;
    cfg.validate(x0.cols())?;
    let norm0 = x0.frobenius_norm();
    if norm0 == 0.0 {
        return Err(DynamicsError::Vanished { layer: 0 });
    }

    let mut x = if cfg.renormalize {
        x0.scale(1.0 / norm0)
    } else {
        x0.clone()
    };
    let mut log_scale = if cfg.renormalize { 0.0 } else { -norm0.ln() };
    let mut prev_dir = x0.scale(1.0 / norm0);
    let mut records = Vec::with_capacity(cfg.depth / cfg.record_every + 1);

    for layer in 1..=cfg.depth {
        x = apply(&x, a, h, cfg);
        if !x.is_finite() || x.max_abs() > OVERFLOW_LIMIT {
            return Err(DynamicsError::Overflow { layer });
        }
        let norm = x.frobenius_norm();
        if norm == 0.0 {
            return Err(DynamicsError::Vanished { layer });
        }
        let frobenius_log = if cfg.renormalize {
            log_scale += norm.ln();
            x.scale_in_place(1.0 / norm);
            log_scale
        } else {
            log_scale + norm.ln()
        };

        let dir = if cfg.renormalize {
            x.clone()
        } else {
            x.scale(1.0 / norm)
        };
        if layer % cfg.record_every == 0 || layer == cfg.depth {
            records.push(TrajectoryRecord {
                layer,
                metrics: metrics_of(&dir)?,
                frobenius_log,
                direction_delta: aligned_distance(&dir, &prev_dir),
            });
        }
        prev_dir = dir;
    }

    let final_frobenius_log = records.last().map_or(0.0, |r| r.frobenius_log);
    Ok(Trajectory {
        records,
        final_state: x,
        final_frobenius_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{attention_from_logits, AttentionMatrix};
    use crate::tensor_core::{kron, vec};
    use crate::testutil::random_matrix;

    fn attention(seed: u64, n: usize) -> RealMatrix {
        let g = random_matrix(n, n, seed);
        attention_from_logits(&g.add(&g.transpose())).unwrap().matrix().clone()
    }

    #[test]
    fn zero_h_is_identity_step() {
        let x = random_matrix(3, 2, 1);
        assert_eq!(step(&x, &attention(2, 3), &RealMatrix::zeros(2, 2), true), x);
    }

    #[test]
    fn step_matches_kronecker_form() {
        let x = random_matrix(3, 3, 1);
        let a = attention(2, 3);
        let h = random_matrix(3, 3, 3);
        let lhs = vec(&step(&x, &a, &h, true));
        let rhs = RealMatrix::identity(9).add(&kron(&h, &a)).matvec(&vec(&x));
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_attention_averages_rows() {
        let x = random_matrix(4, 3, 5);
        let out = step(
            &x,
            AttentionMatrix::uniform(4).matrix(),
            &RealMatrix::identity(3),
            false,
        );
        for k in 0..3 {
            let mean = (0..4).map(|i| x[(i, k)]).sum::<f64>() / 4.0;
            for i in 0..4 {
                assert!((out[(i, k)] - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pre_ln_cases() {
        let a = attention(7, 3);
        let h = random_matrix(2, 2, 8);
        let same = RealMatrix::from_fn(3, 2, |_, k| [0.4, -1.0][k]);
        let out = step_pre_ln(&same, &a, &h, &LayerNormParams::identity(2));
        for i in 1..3 {
            assert!(out.row(i).iter().zip(out.row(0)).all(|(p, q)| (p - q).abs() < 1e-14));
        }
        let zero = LayerNormParams::new(vec![0.0; 2], vec![0.0; 2], 1e-5).unwrap();
        let x = random_matrix(3, 2, 9);
        assert_eq!(step_pre_ln(&x, &a, &h, &zero), x);
    }

    #[test]
    fn pre_ln_by_hand() {
        // independent straight-line evaluation for a 2x2 case
        let x = RealMatrix::from_rows(&[[1.0, 3.0], [2.0, -2.0]]);
        let a = RealMatrix::from_rows(&[[0.75, 0.25], [0.5, 0.5]]);
        let h = RealMatrix::from_rows(&[[0.5, -1.0], [2.0, 0.25]]);
        let ln = LayerNormParams::new(vec![2.0, 0.5], vec![0.1, -0.3], 1e-5).unwrap();
        let n0 = 1.0 / (1.0f64 + 1e-5).sqrt();
        let n1 = 2.0 / (4.0f64 + 1e-5).sqrt();
        let l = [[-n0 * 2.0 + 0.1, n0 * 0.5 - 0.3], [n1 * 2.0 + 0.1, -n1 * 0.5 - 0.3]];
        let al = [
            [0.75 * l[0][0] + 0.25 * l[1][0], 0.75 * l[0][1] + 0.25 * l[1][1]],
            [0.5 * l[0][0] + 0.5 * l[1][0], 0.5 * l[0][1] + 0.5 * l[1][1]],
        ];
        let expected = RealMatrix::from_fn(2, 2, |i, k| x[(i, k)] + al[i][0] * h[(k, 0)] + al[i][1] * h[(k, 1)]);
        assert!(step_pre_ln(&x, &a, &h, &ln).sub(&expected).max_abs() < 1e-14);
    }

    #[test]
    fn post_ln_moments() {
        let a = attention(3, 4);
        let h = random_matrix(3, 3, 4);
        let ln = LayerNormParams::new(vec![1.0; 3], vec![0.0; 3], 1e-12).unwrap();
        let out = step_post_ln(&random_matrix(4, 3, 5), &a, &h, &ln);
        for i in 0..4 {
            let mean = out.row(i).iter().sum::<f64>() / 3.0;
            let var = out.row(i).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
        }
        // already standardized rows are a fixed point of LN
        assert!(layer_norm(&out, &ln).sub(&out).max_abs() < 1e-9);
    }

    #[test]
    fn renormalization_preserves_metrics() {
        let a = attention(11, 4);
        let h = random_matrix(3, 3, 12).scale(0.3);
        let x0 = random_matrix(4, 3, 13);
        let base = UpdateConfig {
            depth: 60,
            record_every: 5,
            ..UpdateConfig::default()
        };
        let on = run(&x0, &a, &h, &base).unwrap();
        let off = run(
            &x0,
            &a,
            &h,
            &UpdateConfig {
                renormalize: false,
                ..base.clone()
            },
        )
        .unwrap();
        assert_eq!(on.records.len(), 12);
        for (p, q) in on.records.iter().zip(&off.records) {
            assert_eq!(p.layer, q.layer);
            assert!((p.metrics.hfc_lfc - q.metrics.hfc_lfc).abs() <= 1e-10 * p.metrics.hfc_lfc.max(1.0));
            assert!((p.metrics.mean_cosine - q.metrics.mean_cosine).abs() <= 1e-10);
            assert!((p.metrics.effective_rank - q.metrics.effective_rank).abs() <= 1e-10);
            assert!((p.frobenius_log - q.frobenius_log).abs() <= 1e-10);
            assert!((p.direction_delta - q.direction_delta).abs() <= 1e-10);
        }
    }

    #[test]
    fn depth_one_matches_single_step() {
        let a = attention(1, 3);
        let h = random_matrix(2, 2, 2);
        let x0 = random_matrix(3, 2, 3);
        let cfg = UpdateConfig {
            depth: 1,
            renormalize: false,
            ..UpdateConfig::default()
        };
        let t = run(&x0, &a, &h, &cfg).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.final_state, step(&x0, &a, &h, true));
    }

    #[test]
    fn overflow_is_reported() {
        let a = attention(1, 2);
        let h = RealMatrix::identity(2).scale(1e3);
        let cfg = UpdateConfig {
            renormalize: false,
            depth: 500,
            ..UpdateConfig::default()
        };
        assert!(matches!(
            run(&random_matrix(2, 2, 1), &a, &h, &cfg),
            Err(DynamicsError::Overflow { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let ln = Some(LayerNormParams::identity(2));
        let bad = [
            UpdateConfig {
                depth: 0,
                ..UpdateConfig::default()
            },
            UpdateConfig {
                record_every: 0,
                ..UpdateConfig::default()
            },
            UpdateConfig {
                ln_mode: LnMode::PreLn,
                ..UpdateConfig::default()
            },
            UpdateConfig {
                ln_mode: LnMode::PreLn,
                ln_params: ln.clone(),
                ..UpdateConfig::default()
            },
            UpdateConfig {
                ln_params: ln.clone(),
                renormalize: false,
                ..UpdateConfig::default()
            },
            UpdateConfig {
                ln_mode: LnMode::PostLn,
                ln_params: Some(LayerNormParams::identity(3)),
                renormalize: false,
                ..UpdateConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate(2).is_err(), "{cfg:?}");
        }
        let ok = UpdateConfig {
            ln_mode: LnMode::PostLn,
            ln_params: ln,
            renormalize: false,
            ..UpdateConfig::default()
        };
        assert!(ok.validate(2).is_ok());
    }
}
