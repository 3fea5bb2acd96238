use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor_core::{match_multisets, RealMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
    let mut r = rng(seed);
    RealMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}

pub fn assert_multiset_close(got: &[Complex64], want: &[Complex64], tol: f64) {
    let m = match_multisets(got, want).unwrap();
    assert!(
        m.max_discrepancy <= tol,
        "multisets differ by {:.3e}:\n got {got:?}\nwant {want:?}",
        m.max_discrepancy
    );
}
