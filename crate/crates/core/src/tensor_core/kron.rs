use super::{LinalgError, RealMatrix};

/// Stacks the columns of `m` into one vector: column `j` occupies
/// positions `j*rows..(j+1)*rows`.
pub fn vec(m: &RealMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<RealMatrix, LinalgError> {
    if v.len() != rows * cols {
        return Err(LinalgError::Shape(format!(
            "cannot unvec length {} into {rows}x{cols}",
            v.len()
        )));
    }
    RealMatrix::new(
        rows,
        cols,
        (0..rows * cols).map(|k| v[(k % cols) * rows + k / cols]).collect(),
    )
}

/// Kronecker product `a ⊗ b`; block `(i, j)` is `a[i,j] * b`.
///
/// Satisfies `vec(B X Aᵀ) = (A ⊗ B) vec(X)`.
pub fn kron(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    let (p, q) = a.shape();
    let (m, n) = b.shape();
    RealMatrix::from_fn(p * m, q * n, |r, c| a[(r / m, c / n)] * b[(r % m, c % n)])
}
