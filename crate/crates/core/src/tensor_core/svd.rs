//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use super::{LinalgError, RealMatrix};

const DEFAULT_MAX_SWEEPS: usize = 80;
const SVD_RESIDUAL_TOL: f64 = 1e-10;

/// `X = U diag(σ) Vᵀ` with `r = min(rows, cols)` and σ sorted descending.
#[derive(Debug, Clone)]
pub struct SingularValueDecomposition {
    pub u: RealMatrix,
    pub sigma: Vec<f64>,
    pub v: RealMatrix,
}

impl SingularValueDecomposition {
    pub fn reconstruct(&self) -> RealMatrix {
        let r = self.sigma.len();
        let us = RealMatrix::from_fn(self.u.rows(), r, |i, k| self.u[(i, k)] * self.sigma[k]);
        us.matmul_transposed(&self.v)
    }
}

pub fn svd(m: &RealMatrix) -> Result<SingularValueDecomposition, LinalgError> {
    svd_with(m, DEFAULT_MAX_SWEEPS)
}

pub fn svd_with(m: &RealMatrix, max_sweeps: usize) -> Result<SingularValueDecomposition, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite { row: 0, col: 0 });
    }
    let out = if m.rows() >= m.cols() {
        jacobi(m, max_sweeps, true)?
    } else {
        let t = jacobi(&m.transpose(), max_sweeps, true)?;
        SingularValueDecomposition {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }
    };
    let norm = m.frobenius_norm();
    let err = out.reconstruct().sub(m).frobenius_norm();
    if err > SVD_RESIDUAL_TOL * norm {
        return Err(LinalgError::NonConvergence {
            routine: "svd",
            detail: format!("reconstruction error {err:.3e} exceeds {SVD_RESIDUAL_TOL:.0e} * ‖X‖_F"),
        });
    }
    Ok(out)
}

/// Singular values only, descending.
pub(crate) fn singular_values(m: &RealMatrix) -> Result<Vec<f64>, LinalgError> {
    let work = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
    Ok(jacobi(&work, DEFAULT_MAX_SWEEPS, false)?.sigma)
}

/// `σ_max / σ_min` over the `min(rows, cols)` singular values; `inf` when rank deficient.
pub fn condition_number(m: &RealMatrix) -> Result<f64, LinalgError> {
    let sigma = singular_values(m)?;
    let (Some(&hi), Some(&lo)) = (sigma.first(), sigma.last()) else {
        return Ok(1.0);
    };
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Number of singular values above `rel_cutoff * σ_max`.
pub fn numerical_rank(m: &RealMatrix, rel_cutoff: f64) -> Result<usize, LinalgError> {
    let sigma = singular_values(m)?;
    let Some(&hi) = sigma.first() else {
        return Ok(0);
    };
    if hi == 0.0 {
        return Ok(0);
    }
    Ok(sigma.iter().filter(|&&s| s > rel_cutoff * hi).count())
}

/// Requires `rows >= cols`.
fn jacobi(m: &RealMatrix, max_sweeps: usize, want_vectors: bool) -> Result<SingularValueDecomposition, LinalgError> {
    let (rows, n) = m.shape();
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = if want_vectors {
        (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    } else {
        Vec::new()
    };
    let tol = f64::EPSILON * rows.max(1) as f64;
    // columns below this squared norm are rounding noise and are not rotated
    let negligible = (f64::EPSILON * m.frobenius_norm()).powi(2);

    let mut converged = n < 2;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = a[p].iter().zip(&a[q]).fold((0.0, 0.0, 0.0), |(al, be, ga), (&x, &y)| {
                    (al + x * x, be + y * y, ga + x * y)
                });
                if alpha <= negligible || beta <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                if want_vectors {
                    rotate(&mut v, p, q, c, s);
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(LinalgError::NonConvergence {
            routine: "svd",
            detail: format!("Jacobi sweeps did not converge within {max_sweeps} sweeps"),
        });
    }

    let norms: Vec<f64> = a.iter().map(|col| super::frobenius(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
    if !want_vectors {
        return Ok(SingularValueDecomposition {
            u: RealMatrix::zeros(rows, 0),
            sigma,
            v: RealMatrix::zeros(n, 0),
        });
    }

    let mut u = RealMatrix::zeros(rows, n);
    let mut vm = RealMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let s = norms[src];
        if s > 0.0 {
            for i in 0..rows {
                u[(i, k)] = a[src][i] / s;
            }
        }
        for i in 0..n {
            vm[(i, k)] = v[src][i];
        }
    }
    complete_basis(&mut u, &sigma);
    Ok(SingularValueDecomposition { u, sigma, v: vm })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the `U` columns of zero singular values with orthonormal vectors so
/// `U` keeps orthonormal columns.
fn complete_basis(u: &mut RealMatrix, sigma: &[f64]) {
    let (rows, r) = u.shape();
    for k in 0..r {
        if sigma[k] > 0.0 {
            continue;
        }
        for e in 0..rows {
            let mut cand: Vec<f64> = (0..rows).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
            for _ in 0..2 {
                for j in 0..r {
                    if j == k || (sigma[j] == 0.0 && j > k) {
                        continue;
                    }
                    let dot: f64 = (0..rows).map(|i| u[(i, j)] * cand[i]).sum();
                    for i in 0..rows {
                        cand[i] -= dot * u[(i, j)];
                    }
                }
            }
            let norm = super::frobenius(&cand);
            if norm > 0.5 {
                for i in 0..rows {
                    u[(i, k)] = cand[i] / norm;
                }
                break;
            }
        }
    }
}
