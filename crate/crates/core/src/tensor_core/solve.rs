use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError, RealMatrix};

/// Default relative pivot threshold: pivots below `1e-13 * ‖M‖_F` are singular.
pub const DEFAULT_PIVOT_THRESHOLD: f64 = 1e-13;

/// LU factorization with partial pivoting, stored in place.
struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

fn factor(m: &ComplexMatrix, relative_pivot: f64) -> Result<Lu, LinalgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(LinalgError::Shape(format!(
            "solve needs a square matrix, got {}x{}",
            n,
            m.cols()
        )));
    }
    let threshold = relative_pivot * m.frobenius_norm();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (p, pivot_abs) =
            (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs <= threshold || pivot_abs == 0.0 {
            return Err(LinalgError::Singular {
                pivot: pivot_abs,
                threshold,
            });
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                let tmp = lu[(p, j)];
                lu[(p, j)] = lu[(k, j)];
                lu[(k, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k + 1..n {
                let u = lu[(k, j)];
                lu[(i, j)] -= factor * u;
            }
        }
    }
    Ok(Lu { lu, perm })
}

impl Lu {
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.perm.len();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                x[i] = x[i] - l * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                x[i] = x[i] - u * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Solves `M x = b` for square complex `M`.
pub fn solve(m: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    solve_with(m, b, DEFAULT_PIVOT_THRESHOLD)
}

pub fn solve_with(m: &ComplexMatrix, b: &[Complex64], relative_pivot: f64) -> Result<Vec<Complex64>, LinalgError> {
    if b.len() != m.rows() {
        return Err(LinalgError::Shape(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            m.rows()
        )));
    }
    Ok(factor(m, relative_pivot)?.solve(b))
}

/// Inverse of a square real matrix.
pub fn inverse(m: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    let n = m.rows();
    let lu = factor(&m.to_complex(), DEFAULT_PIVOT_THRESHOLD)?;
    let mut out = RealMatrix::zeros(n, n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        e[j] = Complex64::new(1.0, 0.0);
        for (i, z) in lu.solve(&e).into_iter().enumerate() {
            out[(i, j)] = z.re;
        }
    }
    Ok(out)
}

/// Inverse of a square complex matrix.
pub(crate) fn complex_inverse(m: &ComplexMatrix, relative_pivot: f64) -> Result<ComplexMatrix, LinalgError> {
    let n = m.rows();
    let lu = factor(m, relative_pivot)?;
    let mut columns = Vec::with_capacity(n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        e[j] = Complex64::new(1.0, 0.0);
        columns.push(lu.solve(&e));
    }
    Ok(ComplexMatrix::from_columns(&columns))
}
