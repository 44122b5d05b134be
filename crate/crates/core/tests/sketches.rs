use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use corrsketch::oracle::correlation;
use corrsketch::sketch::{
    buckets_for_epsilon, depth_for_delta, read_snapshot, sketch_vector, write_snapshot, OnesBuild, RowSketchStore,
    SketchTransform, StoreOptions, SNAPSHOT_VERSION,
};
use corrsketch::stream::{DenseMatrix, StreamUpdate};
use corrsketch::Error;

fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    DenseMatrix::from_rows(n, p, data).unwrap()
}

fn store_of(m: &DenseMatrix, t: SketchTransform) -> RowSketchStore {
    let mut s = RowSketchStore::new(t, m.rows()).unwrap();
    s.ingest_matrix(m).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sketch_is_linear(
        x in prop::collection::vec(-10.0f64..10.0, 12),
        y in prop::collection::vec(-10.0f64..10.0, 12),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let t = SketchTransform::new(12, 7, 3, seed).unwrap();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let mut expect = sketch_vector(&t, &x).unwrap();
        expect.scale(a);
        expect.add_scaled(&sketch_vector(&t, &y).unwrap(), b).unwrap();
        let got = sketch_vector(&t, &combo).unwrap();
        for (g, e) in got.values().iter().zip(expect.values()) {
            prop_assert!((g - e).abs() <= 1e-9 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn snapshot_round_trips(n in 2usize..6, p in 3usize..9, seed in any::<u64>(), standardize in any::<bool>()) {
        let m = gaussian_matrix(n, p, seed);
        let mut store = store_of(&m, SketchTransform::new(p, 5, 3, seed ^ 1).unwrap());
        if standardize {
            store.standardize().unwrap();
        }
        let mut bytes = Vec::new();
        let written = write_snapshot(&store, &mut bytes).unwrap();
        prop_assert_eq!(written, bytes.len());
        let back = read_snapshot(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &store);
    }

    #[test]
    fn estimates_are_symmetric(seed in any::<u64>()) {
        let m = gaussian_matrix(4, 16, seed);
        let mut store = store_of(&m, SketchTransform::new(16, 9, 5, seed).unwrap());
        store.standardize().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert_eq!(store.estimate(i, j).unwrap(), store.estimate(j, i).unwrap());
            }
        }
    }
}

#[test]
fn transforms_are_deterministic_in_the_seed() {
    let x: Vec<f64> = (0..40).map(|k| (k as f64).sin()).collect();
    let a = sketch_vector(&SketchTransform::new(40, 11, 3, 5).unwrap(), &x).unwrap();
    let b = sketch_vector(&SketchTransform::new(40, 11, 3, 5).unwrap(), &x).unwrap();
    let c = sketch_vector(&SketchTransform::new(40, 11, 3, 6).unwrap(), &x).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn accuracy_sizing_matches_formulas() {
    assert_eq!(buckets_for_epsilon(0.1).ceil() as usize, 400);
    assert_eq!(buckets_for_epsilon(0.05).ceil() as usize, 1600);
    // Depth is the smallest odd integer at least 8 ln(1 / delta).
    let d = depth_for_delta(0.05);
    assert!(d % 2 == 1 && d as f64 >= 8.0 * 20f64.ln() && (d as f64 - 2.0) < 8.0 * 20f64.ln());
    let t = SketchTransform::from_accuracy(100, 0.1, 0.05, 1).unwrap();
    assert_eq!((t.buckets(), t.depth()), (400, d));
}

#[test]
fn exact_sketches_reproduce_correlations() {
    let m = gaussian_matrix(6, 50, 3);
    let mut store = store_of(&m, SketchTransform::identity(50).unwrap());
    store.standardize().unwrap();
    let c = correlation(&m);
    for i in 0..6 {
        for j in 0..6 {
            assert!((store.estimate(i, j).unwrap() - c.get(i, j)).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_rows_are_degenerate() {
    let mut m = gaussian_matrix(3, 20, 4);
    m.row_mut(1).iter_mut().for_each(|v| *v = 2.5);
    let mut store = store_of(&m, SketchTransform::identity(20).unwrap());
    let summary = store.standardize().unwrap();
    assert_eq!(summary.degenerate_rows, vec![1]);
    assert!(store.is_degenerate(1));
    assert_eq!(store.estimate(0, 1).unwrap(), 0.0);
}

#[test]
fn store_rejects_misuse() {
    let t = SketchTransform::new(8, 5, 3, 1).unwrap();
    let options = StoreOptions {
        ones: OnesBuild::Amortized,
        exact_rescaling: false,
    };
    let mut store = RowSketchStore::with_options(t, 3, options).unwrap();
    assert!(matches!(store.update(&StreamUpdate::new(1.0, 3, 0)), Err(Error::Bounds { .. })));
    assert!(matches!(store.update(&StreamUpdate::new(1.0, 0, 8)), Err(Error::Bounds { .. })));
    // The ones sketch is incomplete until every column has been seen.
    store.update(&StreamUpdate::new(1.0, 0, 0)).unwrap();
    assert!(matches!(store.clone().standardize(), Err(Error::State(_))));
    store.finalize_ones();
    assert_eq!(store.ones_built(), 8);
    let (copy, _) = store.standardized_copy().unwrap();
    assert!(!store.is_standardized() && copy.is_standardized());
    store.standardize().unwrap();
    assert!(matches!(store.update(&StreamUpdate::new(1.0, 0, 0)), Err(Error::State(_))));
    assert!(matches!(store.standardize(), Err(Error::State(_))));
}

#[test]
fn corrupted_snapshots_are_rejected() {
    let store = store_of(&gaussian_matrix(2, 4, 1), SketchTransform::new(4, 3, 3, 2).unwrap());
    let mut bytes = Vec::new();
    write_snapshot(&store, &mut bytes).unwrap();

    let mut wrong_version = bytes.clone();
    wrong_version[8..12].copy_from_slice(&(SNAPSHOT_VERSION + 1).to_le_bytes());
    assert!(matches!(read_snapshot(wrong_version.as_slice()), Err(Error::Format(_))));

    assert!(matches!(read_snapshot(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(read_snapshot(trailing.as_slice()), Err(Error::Format(_))));
    assert!(matches!(read_snapshot(&b"garbage!"[..]), Err(Error::Format(_))));

    let identity = store_of(&gaussian_matrix(2, 4, 1), SketchTransform::identity(4).unwrap());
    assert!(write_snapshot(&identity, Vec::new()).is_err());
}

#[test]
fn sketch_size_is_accounted() {
    let store = RowSketchStore::new(SketchTransform::new(10, 7, 3, 0).unwrap(), 5).unwrap();
    assert_eq!(store.sketch_bytes(), 8 * (6 * 21 + 5));
}
