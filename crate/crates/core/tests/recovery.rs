use std::collections::BTreeSet;

use corrsketch::ecc::Codebook;
use corrsketch::oracle::{correlation, large_set, plant_dataset, PlantedSpec};
use corrsketch::recovery::{
    recover, recover_diff, route_costs, select_parameters, verify_candidates, CandidateMultiset, ParamMode,
    ProductRoute, QueryParams, QueryRequest, RecoverOptions, Workload,
};
use corrsketch::sketch::{RowSketchStore, SketchTransform};
use corrsketch::stream::DenseMatrix;
use corrsketch::Error;

fn standardized(m: &DenseMatrix, t: SketchTransform) -> RowSketchStore {
    let mut s = RowSketchStore::new(t, m.rows()).unwrap();
    s.ingest_matrix(m).unwrap();
    s.standardize().unwrap();
    s
}

fn params(phi: f64, pi: usize, gamma: usize, epsilon: f64, cb: &Codebook) -> QueryParams {
    QueryParams {
        phi,
        k: 0,
        residual: 0.0,
        pi,
        epsilon,
        delta: 0.05,
        gamma,
        theta: 2.0 / 3.0,
        lambda: cb.lambda(),
        mode: ParamMode::Practical,
        warnings: Vec::new(),
    }
}

fn upper(set: BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    set.into_iter().filter(|(i, j)| i < j).collect()
}

#[test]
fn exact_sketches_recover_planted_pairs() {
    let plants = vec![(1, 20, 0.95), (4, 33, -0.9), (8, 9, 0.92)];
    let data = plant_dataset(&PlantedSpec::new(40, 600, plants, 2)).unwrap();
    let truth = upper(large_set(&correlation(&data.matrix), 0.8));
    assert_eq!(truth.len(), 3);
    let store = standardized(&data.matrix, SketchTransform::identity(600).unwrap());
    let cb = Codebook::for_indices(40).unwrap();
    for route in [ProductRoute::GroupFirst, ProductRoute::Gram] {
        let options = RecoverOptions { verify: false, route };
        let report = recover(&store, &params(0.8, 20, 5, 0.0, &cb), &cb, 7, &options).unwrap();
        assert_eq!(report.pair_set(), truth, "route {route}");
        assert_eq!(report.route, route);
        assert_eq!(report.diagnostics.len(), 5);
    }
}

#[test]
fn routes_agree_on_sketched_data() {
    let data = plant_dataset(&PlantedSpec::new(32, 300, vec![(0, 31, 0.95)], 9)).unwrap();
    let store = standardized(&data.matrix, SketchTransform::new(300, 200, 5, 4).unwrap());
    let cb = Codebook::for_indices(32).unwrap();
    let p = params(0.8, 16, 6, 0.1, &cb);
    let run = |route| {
        recover(&store, &p, &cb, 3, &RecoverOptions { verify: false, route })
            .unwrap()
            .candidates
    };
    assert_eq!(run(ProductRoute::GroupFirst), run(ProductRoute::Gram));
}

#[test]
fn vote_counts_grow_with_repetitions() {
    let data = plant_dataset(&PlantedSpec::new(48, 400, vec![(3, 40, 0.9), (10, 11, 0.88)], 5)).unwrap();
    let store = standardized(&data.matrix, SketchTransform::new(400, 300, 5, 6).unwrap());
    let cb = Codebook::for_indices(48).unwrap();
    let options = RecoverOptions::default();
    let runs: Vec<CandidateMultiset> = [8, 16, 32]
        .iter()
        .map(|&g| recover(&store, &params(0.8, 24, g, 0.1, &cb), &cb, 21, &options).unwrap().candidates)
        .collect();
    for w in runs.windows(2) {
        for (pair, count) in w[0].iter() {
            assert!(w[1].count(pair) >= count, "{pair:?} lost votes");
        }
    }
}

#[test]
fn majority_canonicalises_orientation() {
    let mut m = CandidateMultiset::new();
    for _ in 0..3 {
        m.insert((5, 2));
    }
    m.insert((2, 5));
    m.insert((4, 4));
    m.insert((1, 7));
    assert_eq!(m.count((4, 4)), 0);
    let maj = m.majority(2);
    assert_eq!(maj.into_iter().collect::<Vec<_>>(), vec![((2, 5), 3)]);
    let mut other = CandidateMultiset::new();
    other.insert((1, 7));
    m.merge(&other);
    assert_eq!(m.majority(2).get(&(1, 7)), Some(&2));
}

#[test]
fn verification_uses_direct_estimates() {
    let data = plant_dataset(&PlantedSpec::new(10, 500, vec![(2, 7, 0.9)], 1)).unwrap();
    let store = standardized(&data.matrix, SketchTransform::identity(500).unwrap());
    let out = verify_candidates(&store, &[(2, 7), (0, 1), (3, 3)], 0.8).unwrap();
    assert!(out[0].accepted && (out[0].estimate - data.pairs[0].realized).abs() < 1e-9);
    assert!(!out[1].accepted);
    assert!(!out[2].accepted, "diagonal pairs are never accepted");

    let mut raw = RowSketchStore::new(SketchTransform::identity(500).unwrap(), 10).unwrap();
    raw.ingest_matrix(&data.matrix).unwrap();
    assert!(matches!(verify_candidates(&raw, &[(2, 7)], 0.8), Err(Error::State(_))));
}

#[test]
fn verified_reports_never_contain_low_estimates() {
    let data = plant_dataset(&PlantedSpec::new(40, 300, vec![(0, 39, 0.85)], 3)).unwrap();
    let store = standardized(&data.matrix, SketchTransform::new(300, 100, 3, 2).unwrap());
    let cb = Codebook::for_indices(40).unwrap();
    let eps = store.transform().epsilon();
    let options = RecoverOptions {
        verify: true,
        route: ProductRoute::Auto,
    };
    let report = recover(&store, &params(0.5, 20, 6, eps, &cb), &cb, 4, &options).unwrap();
    for p in &report.pairs {
        assert!(p.estimate.abs() >= 0.5 - 4.0 * eps);
    }
    for p in &report.rejected {
        assert!(p.estimate.abs() < 0.5 - 4.0 * eps);
    }
}

#[test]
fn thresholds_above_one_report_nothing() {
    let data = plant_dataset(&PlantedSpec::new(20, 200, vec![(0, 1, 0.99)], 3)).unwrap();
    let store = standardized(&data.matrix, SketchTransform::identity(200).unwrap());
    let cb = Codebook::for_indices(20).unwrap();
    let report = recover(&store, &params(1.01, 10, 3, 0.0, &cb), &cb, 1, &RecoverOptions::default()).unwrap();
    assert!(report.pairs.is_empty() && report.candidates.is_empty());
}

#[test]
fn differencing_finds_only_the_change() {
    let before = plant_dataset(&PlantedSpec::new(30, 400, vec![(5, 6, 0.9)], 8)).unwrap();
    let after = plant_dataset(&PlantedSpec::new(30, 400, vec![(5, 6, 0.9), (12, 25, 0.95)], 8)).unwrap();
    let t = SketchTransform::identity(400).unwrap();
    let a = standardized(&after.matrix, t.clone());
    let b = standardized(&before.matrix, t);
    let cb = Codebook::for_indices(30).unwrap();
    let report = recover_diff(&a, &b, &params(0.7, 15, 5, 0.0, &cb), &cb, 2, &RecoverOptions::default()).unwrap();
    assert_eq!(report.pair_set(), BTreeSet::from([(12, 25)]));
}

#[test]
fn differencing_requires_compatible_stores() {
    let m = plant_dataset(&PlantedSpec::new(12, 50, vec![], 1)).unwrap().matrix;
    let cb = Codebook::for_indices(12).unwrap();
    let p = params(0.8, 4, 1, 0.1, &cb);
    let a = standardized(&m, SketchTransform::new(50, 20, 3, 1).unwrap());
    let b = standardized(&m, SketchTransform::new(50, 20, 3, 2).unwrap());
    assert!(matches!(
        recover_diff(&a, &b, &p, &cb, 0, &RecoverOptions::default()),
        Err(Error::Compatibility(_))
    ));
    let small = plant_dataset(&PlantedSpec::new(10, 50, vec![], 1)).unwrap().matrix;
    let c = standardized(&small, SketchTransform::new(50, 20, 3, 1).unwrap());
    assert!(matches!(
        recover_diff(&a, &c, &p, &cb, 0, &RecoverOptions::default()),
        Err(Error::Compatibility(_))
    ));
}

#[test]
fn queries_validate_their_inputs() {
    let m = plant_dataset(&PlantedSpec::new(12, 50, vec![], 1)).unwrap().matrix;
    let cb = Codebook::for_indices(12).unwrap();
    let store = standardized(&m, SketchTransform::new(50, 20, 3, 1).unwrap());
    let opts = RecoverOptions::default();
    assert!(recover(&store, &params(0.8, 13, 1, 0.1, &cb), &cb, 0, &opts).is_err());
    assert!(recover(&store, &params(0.8, 0, 1, 0.1, &cb), &cb, 0, &opts).is_err());
    assert!(recover(&store, &params(0.8, 4, 0, 0.1, &cb), &cb, 0, &opts).is_err());
    let small_cb = Codebook::for_indices(8).unwrap();
    assert!(recover(&store, &params(0.8, 4, 1, 0.1, &small_cb), &small_cb, 0, &opts).is_err());

    let mut raw = RowSketchStore::new(SketchTransform::new(50, 20, 3, 1).unwrap(), 12).unwrap();
    raw.ingest_matrix(&m).unwrap();
    assert!(matches!(recover(&raw, &params(0.8, 4, 1, 0.1, &cb), &cb, 0, &opts), Err(Error::State(_))));
}

#[test]
fn strict_selection_meets_every_bound() {
    let cb = Codebook::for_indices(64).unwrap();
    let mut req = QueryRequest::new(0.8, 2, 0.5);
    req.mode = ParamMode::Strict;
    req.theta = 0.0;
    req.epsilon = Some(0.0);
    req.delta = Some(0.0);
    let p = select_parameters(64, &req, &cb).unwrap();
    let lambda = cb.lambda();
    assert!(p.pi >= 18 * 2);
    assert!(p.pi as f64 >= 18.0 * 0.5 / (0.8 * lambda.sqrt()));
    assert_eq!(p.gamma, 60);
    req.epsilon = Some(0.3);
    assert!(matches!(select_parameters(64, &req, &cb), Err(Error::Infeasible { .. })));
    req.epsilon = Some(0.0);
    req.pi = Some(65);
    assert!(matches!(select_parameters(64, &req, &cb), Err(Error::Parameter(_))));
    req.pi = None;
    req.k = 10;
    assert!(matches!(
        select_parameters(64, &req, &cb),
        Err(Error::Infeasible { constraint: "pi", .. })
    ));
}

#[test]
fn practical_selection_warns_instead_of_failing() {
    let cb = Codebook::for_indices(64).unwrap();
    let mut req = QueryRequest::new(0.8, 2, 0.5);
    req.epsilon = Some(0.3);
    let p = select_parameters(64, &req, &cb).unwrap();
    assert_eq!(p.mode, ParamMode::Practical);
    assert!(!p.warnings.is_empty());
    assert!(p.pi >= 1 && p.pi <= 64);
}

#[test]
fn planner_prefers_gram_for_many_bits() {
    let costs = route_costs(
        64,
        7,
        400.0,
        &Workload {
            pi: 16,
            gamma: 16,
            code_len: 63,
        },
    );
    assert!(costs.1 < costs.0, "{costs:?}");
}
