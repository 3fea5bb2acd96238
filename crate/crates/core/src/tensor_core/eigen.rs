//! General real eigensolver: Householder reduction to upper Hessenberg form,
//! Francis double-shift QR to real Schur form, and eigenvectors by
//! back-substitution on the quasi-triangular factor. The iteration follows the
//! EISPACK `orthes`/`hqr2` procedures as popularised by JAMA.

use num_complex::Complex64;

use super::solve::complex_inverse;
use super::svd::singular_values;
use super::{complex_norm, ComplexMatrix, LinalgError, RealMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    /// Largest accepted `max_k ‖M v_k − λ_k v_k‖ / ‖M‖_F`.
    pub residual_tol: f64,
    /// Largest matrix dimension accepted by the eigen path.
    pub max_size: usize,
    /// QR iteration budget is `sweep_factor * m` iterations in total.
    pub sweep_factor: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_size: 64,
            sweep_factor: 100,
        }
    }
}

/// Eigenvalues and unit right eigenvectors of a real square matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<Complex64>,
    vectors: ComplexMatrix,
    max_residual: f64,
    eigvec_condition: f64,
}

impl EigenDecomposition {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns, in the same order as [`Self::eigenvalues`].
    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }

    /// Largest relative residual `‖M v − λ v‖₂ / ‖M‖_F` over all pairs.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// 2-norm condition number of the eigenvector matrix (`inf` when singular).
    pub fn eigvec_condition(&self) -> f64 {
        self.eigvec_condition
    }

    /// `V diag(λ) V⁻¹`.
    pub fn reconstruct(&self) -> Result<ComplexMatrix, LinalgError> {
        let n = self.size();
        let inv = complex_inverse(&self.vectors, 0.0)?;
        let scaled = ComplexMatrix::from_fn(n, n, |i, j| self.vectors[(i, j)] * self.eigenvalues[j]);
        Ok(scaled.matmul(&inv))
    }

    /// The same decomposition with pairs listed in `order`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.size(), "order must be a permutation");
        let columns: Vec<Vec<Complex64>> = order.iter().map(|&k| self.vector(k)).collect();
        Self {
            eigenvalues: order.iter().map(|&k| self.eigenvalues[k]).collect(),
            vectors: ComplexMatrix::from_columns(&columns),
            max_residual: self.max_residual,
            eigvec_condition: self.eigvec_condition,
        }
    }

    /// Projects eigenvalues and eigenvectors onto their real parts.
    ///
    /// Used once a caller has established that the spectrum is real up to
    /// rounding; eigenvectors are renormalized.
    pub(crate) fn project_real(&mut self) {
        for z in &mut self.eigenvalues {
            z.im = 0.0;
        }
        let n = self.size();
        let mut columns = Vec::with_capacity(n);
        for k in 0..n {
            let mut v: Vec<Complex64> = self.vector(k).iter().map(|z| Complex64::new(z.re, 0.0)).collect();
            normalize(&mut v);
            columns.push(v);
        }
        self.vectors = ComplexMatrix::from_columns(&columns);
    }
}

/// Full eigendecomposition with default options.
pub fn eig_general(m: &RealMatrix) -> Result<EigenDecomposition, LinalgError> {
    eig_general_with(m, &EigOptions::default())
}

pub fn eig_general_with(m: &RealMatrix, opts: &EigOptions) -> Result<EigenDecomposition, LinalgError> {
    check_input(m, opts)?;
    let n = m.rows();
    let schur = hqr2(m, true, opts.sweep_factor * n.max(1))?;
    let Schur { d, e, v: basis } = schur;
    let basis = basis.expect("vectors requested");

    let mut eigenvalues = Vec::with_capacity(n);
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        if e[k] == 0.0 {
            eigenvalues.push(Complex64::new(d[k], 0.0));
            columns.push((0..n).map(|i| Complex64::new(basis[(i, k)], 0.0)).collect());
            k += 1;
        } else {
            // e[k] > 0 for the first member of a conjugate pair.
            let v: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(basis[(i, k)], basis[(i, k + 1)]))
                .collect();
            eigenvalues.push(Complex64::new(d[k], e[k]));
            eigenvalues.push(Complex64::new(d[k + 1], e[k + 1]));
            columns.push(v.clone());
            columns.push(v.iter().map(|z| z.conj()).collect());
            k += 2;
        }
    }
    for v in &mut columns {
        normalize(v);
        canonicalize_phase(v);
    }

    let mc = m.to_complex();
    let m_norm = m.frobenius_norm();
    let mut max_residual: f64 = 0.0;
    for (lambda, v) in eigenvalues.iter().zip(&columns) {
        let mv = mc.matvec(v);
        let r: Vec<Complex64> = mv.iter().zip(v).map(|(a, b)| a - lambda * b).collect();
        let res = complex_norm(&r);
        let rel = if m_norm > 0.0 { res / m_norm } else { res };
        max_residual = max_residual.max(rel);
    }
    if !(max_residual <= opts.residual_tol) {
        return Err(LinalgError::NonConvergence {
            routine: "eig_general",
            detail: format!(
                "eigenpair residual {max_residual:.3e} exceeds tolerance {:.3e}",
                opts.residual_tol
            ),
        });
    }

    let vectors = ComplexMatrix::from_columns(&columns);
    let sigma = singular_values(&vectors.real_embedding())?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let smin = sigma.last().copied().unwrap_or(0.0);
    let eigvec_condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
        max_residual,
        eigvec_condition,
    })
}

/// Eigenvalues only; skips vector accumulation and back-substitution.
pub fn eigenvalues(m: &RealMatrix) -> Result<Vec<Complex64>, LinalgError> {
    let opts = EigOptions::default();
    check_input(m, &opts)?;
    let schur = hqr2(m, false, opts.sweep_factor * m.rows().max(1))?;
    Ok(schur
        .d
        .iter()
        .zip(&schur.e)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect())
}

fn check_input(m: &RealMatrix, opts: &EigOptions) -> Result<(), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::Shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() > opts.max_size {
        return Err(LinalgError::Shape(format!(
            "matrix size {} exceeds eigen path limit {}",
            m.rows(),
            opts.max_size
        )));
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite { row: 0, col: 0 });
    }
    Ok(())
}

fn normalize(v: &mut [Complex64]) {
    let norm = complex_norm(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|z| *z /= norm);
    }
}

/// Rotates `v` so its first non-negligible component is real and positive.
fn canonicalize_phase(v: &mut [Complex64]) {
    let largest = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if largest == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-8 * largest) {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|z| *z *= phase);
        // real inputs stay exactly real after a sign flip
        for z in v.iter_mut() {
            if z.im.abs() <= f64::EPSILON * largest * 1e-3 {
                z.im = 0.0;
            }
        }
    }
}

struct Schur {
    d: Vec<f64>,
    e: Vec<f64>,
    v: Option<RealMatrix>,
}

/// Householder reduction to Hessenberg form. Returns `(H, V)` with `A = V H Vᵀ`.
fn orthes(a: &RealMatrix, want_vectors: bool) -> (RealMatrix, Option<RealMatrix>) {
    let n = a.rows();
    let mut h = a.clone();
    let mut ort = vec![0.0; n];
    let high = n.saturating_sub(1);
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let f: f64 = (m..=high).rev().map(|i| ort[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let f: f64 = (m..=high).rev().map(|j| ort[j] * h[(i, j)]).sum::<f64>() / hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    if !want_vectors {
        return (h, None);
    }
    let mut v = RealMatrix::identity(n);
    for m in (1..high).rev() {
        if h[(m, m - 1)] == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g: f64 = (m..=high).map(|i| ort[i] * v[(i, j)]).sum();
            g = (g / ort[m]) / h[(m, m - 1)];
            for i in m..=high {
                v[(i, j)] += g * ort[i];
            }
        }
    }
    (h, Some(v))
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

#[allow(clippy::many_single_char_names, unused_assignments)]
fn hqr2(a: &RealMatrix, want_vectors: bool, budget: usize) -> Result<Schur, LinalgError> {
    let nn = a.rows();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    if nn == 0 {
        return Ok(Schur {
            d,
            e,
            v: want_vectors.then(|| RealMatrix::zeros(0, 0)),
        });
    }
    let (mut h, mut vmat) = orthes(a, want_vectors);

    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut w, mut x, mut y): (f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    while n >= 0 {
        let nu = n as usize;
        // look for a single small sub-diagonal element
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)] == 0.0 || h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // one root
            h[(nu, nu)] += exshift;
            d[nu] = h[(nu, nu)];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // two roots
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            x = h[(nu, nu)];

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                if let Some(v) = vmat.as_mut() {
                    for i in 0..nn {
                        z = v[(i, nu - 1)];
                        v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                        v[(i, nu)] = q * v[(i, nu)] - p * z;
                    }
                }
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            total_iter += 1;
            if total_iter > budget {
                return Err(LinalgError::NonConvergence {
                    routine: "hqr2",
                    detail: format!("QR iteration budget of {budget} exhausted"),
                });
            }
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }

            // Wilkinson's exceptional shift
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            // MATLAB's exceptional shift
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;

            // look for two consecutive small sub-diagonal elements
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n and columns m..=n
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    if let Some(v) = vmat.as_mut() {
                        for i in 0..nn {
                            p = x * v[(i, k)] + y * v[(i, k + 1)];
                            if notlast {
                                p += z * v[(i, k + 2)];
                                v[(i, k + 2)] -= p * r;
                            }
                            v[(i, k)] -= p;
                            v[(i, k + 1)] -= p * q;
                        }
                    }
                }
                k += 1;
            }
        }
    }

    let Some(mut v) = vmat else {
        return Ok(Schur { d, e, v: None });
    };

    // back-substitute to find vectors of the upper (quasi-)triangular form
    if norm == 0.0 {
        return Ok(Schur { d, e, v: Some(v) });
    }
    for n in (0..nn).rev() {
        p = d[n];
        q = e[n];
        if q == 0.0 {
            // real vector
            let mut l = n;
            h[(n, n)] = 1.0;
            for i in (0..n).rev() {
                w = h[(i, i)] - p;
                r = (l..=n).map(|j| h[(i, j)] * h[(j, n)]).sum();
                if e[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        h[(i, n)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        let t = (x * s - z * r) / q;
                        h[(i, n)] = t;
                        h[(i + 1, n)] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    let t = h[(i, n)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            // complex vector, stored as columns n-1 (real) and n (imaginary)
            let mut l = n - 1;
            if h[(n, n - 1)].abs() > h[(n - 1, n)].abs() {
                h[(n - 1, n - 1)] = q / h[(n, n - 1)];
                h[(n - 1, n)] = -(h[(n, n)] - p) / h[(n, n - 1)];
            } else {
                let (cr, ci) = cdiv(0.0, -h[(n - 1, n)], h[(n - 1, n - 1)] - p, q);
                h[(n - 1, n - 1)] = cr;
                h[(n - 1, n)] = ci;
            }
            h[(n, n - 1)] = 0.0;
            h[(n, n)] = 1.0;
            for i in (0..n.saturating_sub(1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[(i, j)] * h[(j, n - 1)];
                    sa += h[(i, j)] * h[(j, n)];
                }
                w = h[(i, i)] - p;
                if e[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) = cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[(i + 1, n - 1)] = (-ra - w * h[(i, n - 1)] + q * h[(i, n)]) / x;
                            h[(i + 1, n)] = (-sa - w * h[(i, n)] - q * h[(i, n - 1)]) / x;
                        } else {
                            let (cr, ci) = cdiv(-r - y * h[(i, n - 1)], -s - y * h[(i, n)], z, q);
                            h[(i + 1, n - 1)] = cr;
                            h[(i + 1, n)] = ci;
                        }
                    }
                    let t = h[(i, n - 1)].abs().max(h[(i, n)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n - 1)] /= t;
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        }
    }

    // back-transform to eigenvectors of the original matrix
    for j in (0..nn).rev() {
        for i in 0..nn {
            z = (0..=j).map(|k| v[(i, k)] * h[(k, j)]).sum();
            v[(i, j)] = z;
        }
    }
    Ok(Schur { d, e, v: Some(v) })
}
