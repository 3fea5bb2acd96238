use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smoothlab_core::tensor_core::{eig_general, eigenvalues, kron, match_multisets, svd, RealMatrix};

fn random(rows: usize, cols: usize, seed: u64) -> RealMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn nalgebra_eigenvalues(m: &RealMatrix) -> Vec<Complex64> {
    let dm = DMatrix::from_row_slice(m.rows(), m.cols(), m.data());
    dm.complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect()
}

#[test]
fn agrees_with_nalgebra_across_sizes() {
    for (seed, n) in [1usize, 2, 3, 5, 8, 13, 21, 32, 48, 64].into_iter().enumerate() {
        let m = random(n, n, seed as u64);
        let ours = eig_general(&m).unwrap();
        let theirs = nalgebra_eigenvalues(&m);
        let matched = match_multisets(ours.eigenvalues(), &theirs).unwrap();
        assert!(
            matched.max_discrepancy < 1e-8 * m.frobenius_norm(),
            "n={n}: {}",
            matched.max_discrepancy
        );
        assert!(ours.max_residual() <= 1e-10);
    }
}

#[test]
fn kronecker_sum_at_full_size() {
    // 64×64 I + H⊗A, the largest matrix the spectral oracle forms
    let h = random(8, 8, 40).scale(1.0 / 8f64.sqrt());
    let a = random(8, 8, 41);
    let k = RealMatrix::identity(64).add(&kron(&h, &a));
    let ours = eigenvalues(&k).unwrap();
    let matched = match_multisets(&ours, &nalgebra_eigenvalues(&k)).unwrap();
    assert!(matched.max_discrepancy < 1e-8, "{}", matched.max_discrepancy);
}

#[test]
fn conjugate_pairs_are_exact() {
    for seed in 0..50 {
        let m = random(7, 7, 100 + seed);
        let ev = eigenvalues(&m).unwrap();
        for z in &ev {
            if z.im != 0.0 {
                assert!(ev.iter().any(|w| *w == z.conj()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction(seed in any::<u64>(), n in 1usize..10) {
        let m = random(n, n, seed);
        let eig = eig_general(&m).unwrap();
        prop_assume!(eig.eigvec_condition() < 1e8);
        let rec = eig.reconstruct().unwrap();
        let err: f64 = rec.data().iter().zip(m.data())
            .map(|(z, &x)| (z - Complex64::new(x, 0.0)).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * m.frobenius_norm());
    }

    #[test]
    fn svd_invariants(seed in any::<u64>(), rows in 1usize..9, cols in 1usize..9) {
        let m = random(rows, cols, seed);
        let s = svd(&m).unwrap();
        prop_assert_eq!(s.sigma.len(), rows.min(cols));
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.sigma.iter().all(|&x| x >= 0.0));
        prop_assert!(s.reconstruct().sub(&m).frobenius_norm() <= 1e-10 * m.frobenius_norm());
    }
}
