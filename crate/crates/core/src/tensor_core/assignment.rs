//! Optimal one-to-one matching of two complex multisets.

use num_complex::Complex64;

use super::LinalgError;

#[derive(Debug, Clone, PartialEq)]
pub struct MultisetMatch {
    /// `pairing[i]` is the index in the right multiset matched to left element `i`.
    pub pairing: Vec<usize>,
    pub max_discrepancy: f64,
    pub total_discrepancy: f64,
}

/// Matches `left` to `right` minimizing the summed distance `|l − r|`
/// (Hungarian algorithm, O(n³)).
pub fn match_multisets(left: &[Complex64], right: &[Complex64]) -> Result<MultisetMatch, LinalgError> {
    if left.len() != right.len() {
        return Err(LinalgError::Shape(format!(
            "multisets differ in size: {} vs {}",
            left.len(),
            right.len()
        )));
    }
    let n = left.len();
    let cost = |i: usize, j: usize| (left[i] - right[j]).norm();

    // potentials u (rows), v (cols); way/p use 1-based indexing with 0 as sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairing = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            pairing[p[j] - 1] = j - 1;
        }
    }
    let dists: Vec<f64> = pairing.iter().enumerate().map(|(i, &j)| cost(i, j)).collect();
    Ok(MultisetMatch {
        max_discrepancy: dists.iter().copied().fold(0.0, f64::max),
        total_discrepancy: dists.iter().sum(),
        pairing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reals(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn permutation_is_recovered() {
        let m = match_multisets(&reals(&[3.0, 1.0, 4.0, 1.5]), &reals(&[1.5, 4.0, 3.0, 1.0])).unwrap();
        assert_eq!(m.pairing, vec![2, 3, 1, 0]);
        assert_eq!(m.max_discrepancy, 0.0);
    }

    #[test]
    fn complex_points() {
        let left = [
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let right = [
            Complex64::new(2.0, 0.1),
            Complex64::new(0.0, -1.1),
            Complex64::new(0.1, 1.0),
        ];
        let m = match_multisets(&left, &right).unwrap();
        assert_eq!(m.pairing, vec![2, 1, 0]);
        assert!((m.max_discrepancy - 0.1).abs() < 1e-12);
        assert!((m.total_discrepancy - 0.3).abs() < 1e-12);
    }

    fn best_by_enumeration(left: &[Complex64], right: &[Complex64]) -> f64 {
        fn go(i: usize, used: &mut Vec<bool>, acc: f64, l: &[Complex64], r: &[Complex64], best: &mut f64) {
            if i == l.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..r.len() {
                if !used[j] {
                    used[j] = true;
                    go(i + 1, used, acc + (l[i] - r[j]).norm(), l, r, best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(0, &mut vec![false; right.len()], 0.0, left, right, &mut best);
        best
    }

    #[test]
    fn optimal_against_enumeration() {
        use rand::Rng;
        let mut rng = crate::testutil::rng(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let mut point = || Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let left: Vec<Complex64> = (0..n).map(|_| point()).collect();
            let right: Vec<Complex64> = (0..n).map(|_| point()).collect();
            let m = match_multisets(&left, &right).unwrap();
            let mut seen = m.pairing.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            assert!((m.total_discrepancy - best_by_enumeration(&left, &right)).abs() < 1e-12);
        }
    }

    #[test]
    fn size_mismatch() {
        assert!(match_multisets(&reals(&[1.0]), &reals(&[])).is_err());
        assert!(match_multisets(&[], &[]).unwrap().pairing.is_empty());
    }
}
