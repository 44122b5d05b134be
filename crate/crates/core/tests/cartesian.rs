use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use corrsketch::cartesian::{cart_exact, cart_masked_diag, CartesianTransform};
use corrsketch::ecc::Codebook;
use corrsketch::stream::DenseMatrix;

fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    DenseMatrix::from_rows(n, n, data).unwrap()
}

/// Direct double sum over the partition and sign functions.
fn brute_force(t: &CartesianTransform, a: &DenseMatrix) -> Vec<f64> {
    let pi = t.pi();
    let mut out = vec![0.0; pi * pi];
    for i in 0..t.n() {
        for j in 0..t.n() {
            out[t.p1(i) * pi + t.p2(j)] += t.s1(i) * t.s2(j) * a.get(i, j);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_are_balanced(n in 2usize..200, pi_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let pi = 1 + (pi_frac * (n - 1) as f64) as usize;
        let t = CartesianTransform::new(n, pi, seed).unwrap();
        prop_assert_eq!(t.n_padded(), pi * n.div_ceil(pi));
        let cap = t.n_padded() / pi;
        for groups in [t.row_groups(), t.col_groups()] {
            prop_assert_eq!(groups.len(), pi);
            prop_assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), n);
            prop_assert!(groups.iter().all(|g| g.len() <= cap));
        }
        for i in 0..n {
            prop_assert!(t.p1(i) < pi && t.p2(i) < pi);
            prop_assert!(t.s1(i).abs() == 1.0 && t.s2(i).abs() == 1.0);
        }
    }

    #[test]
    fn bucket_values_are_linear_and_exact(seed in any::<u64>(), c in -3.0f64..3.0) {
        let n = 13;
        let t = CartesianTransform::new(n, 4, seed).unwrap();
        let a = random_matrix(n, seed ^ 7);
        let b = random_matrix(n, seed ^ 8);
        let combo = DenseMatrix::from_rows(
            n,
            n,
            a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + c * y).collect(),
        )
        .unwrap();
        let ca = cart_exact(&t, &a).unwrap();
        let cb = cart_exact(&t, &b).unwrap();
        let cc = cart_exact(&t, &combo).unwrap();
        for k in 0..16 {
            prop_assert!((cc.as_slice()[k] - ca.as_slice()[k] - c * cb.as_slice()[k]).abs() < 1e-9);
        }
        for (got, want) in ca.as_slice().iter().zip(brute_force(&t, &a)) {
            prop_assert!((got - want).abs() < 1e-9);
        }
    }
}

#[test]
fn masked_diagonal_matches_masked_identity() {
    let n = 40;
    let cb = Codebook::for_indices(n).unwrap();
    let t = CartesianTransform::new(n, 6, 3).unwrap();
    for l in 0..cb.codeword_len() {
        let mut diag = DenseMatrix::zeros(n, n);
        for i in 0..n {
            if cb.mask_bit(l, i).unwrap() {
                diag.set(i, i, 1.0);
            }
        }
        assert_eq!(cart_masked_diag(&t, &cb, l).unwrap(), cart_exact(&t, &diag).unwrap());
    }
}

#[test]
fn transform_is_seed_deterministic() {
    let a = CartesianTransform::new(50, 7, 11).unwrap();
    let b = CartesianTransform::new(50, 7, 11).unwrap();
    let c = CartesianTransform::new(50, 7, 12).unwrap();
    let signature = |t: &CartesianTransform| (0..50).map(|i| (t.p1(i), t.p2(i), t.s1(i), t.s2(i))).collect::<Vec<_>>();
    assert_eq!(signature(&a), signature(&b));
    assert_ne!(signature(&a), signature(&c));
}

#[test]
fn invalid_bucket_counts_are_rejected() {
    assert!(CartesianTransform::new(10, 0, 1).is_err());
    assert!(CartesianTransform::new(10, 11, 1).is_err());
    assert!(CartesianTransform::new(10, 10, 1).is_ok());
    let t = CartesianTransform::new(10, 3, 1).unwrap();
    assert!(cart_exact(&t, &DenseMatrix::zeros(9, 9)).is_err());
}
