//! The query pipeline: parameter selection, masked bucket approximation,
//! per-repetition decoding and majority voting across repetitions.

mod approximate;
mod params;
mod step;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

pub use approximate::{
    approximate, route_costs, Approximator, MaskedBucketSet, ProductRoute, Repetition, Workload,
    DEFAULT_GRAM_LIMIT_BYTES,
};
pub use params::{
    max_delta, max_epsilon, min_buckets, scaled_buckets, select_parameters, strict_bounds, strict_gamma, ParamMode,
    QueryParams, QueryRequest, StrictBounds, DEFAULT_DELTA, DEFAULT_EPSILON, DEFAULT_PRACTICAL_GAMMA, DEFAULT_THETA,
};
pub use step::{recovery_step, Baseline, StepOutput};

use crate::cartesian::CartesianTransform;
use crate::ecc::Codebook;
use crate::error::{Error, Result};
use crate::hash::mix_seed;
use crate::sketch::RowSketchStore;

/// Seed of the Cartesian transform used in repetition `index`. Runs with
/// more repetitions extend, rather than reshuffle, runs with fewer.
pub fn repetition_seed(seed: u64, index: usize) -> u64 {
    mix_seed(seed, index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecoverOptions {
    /// Keep only candidates whose direct sketch estimate clears the
    /// threshold minus the sketch error allowance.
    pub verify: bool,
    pub route: ProductRoute,
}

/// Occurrence counts of ordered index pairs across repetitions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateMultiset {
    counts: BTreeMap<(usize, usize), usize>,
}

impl CandidateMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Diagonal pairs are ignored.
    pub fn insert(&mut self, pair: (usize, usize)) {
        if pair.0 != pair.1 {
            *self.counts.entry(pair).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: &CandidateMultiset) {
        for (&pair, &c) in &other.counts {
            *self.counts.entry(pair).or_insert(0) += c;
        }
    }

    pub fn count(&self, pair: (usize, usize)) -> usize {
        self.counts.get(&pair).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        self.counts.iter().map(|(&p, &c)| (p, c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Unordered pairs `(i < j)` whose ordered count in either orientation
    /// reaches `min_count`, reported with the larger of the two counts.
    pub fn majority(&self, min_count: usize) -> BTreeMap<(usize, usize), usize> {
        let mut out = BTreeMap::new();
        for (&(i, j), &c) in &self.counts {
            if c >= min_count {
                let key = (i.min(j), i.max(j));
                let e = out.entry(key).or_insert(0);
                *e = (*e).max(c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepDiagnostics {
    pub repetition: usize,
    pub seed: u64,
    pub empty_buckets: usize,
    pub decode_failures: usize,
    pub diagonal_hits: usize,
    pub candidates: usize,
    pub elapsed_ms: f64,
}

impl fmt::Display for RepDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rep={} decode_failures={} candidates={} elapsed_ms={:.3} empty_buckets={} diagonal={}",
            self.repetition, self.decode_failures, self.candidates, self.elapsed_ms, self.empty_buckets, self.diagonal_hits
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifiedPair {
    pub i: usize,
    pub j: usize,
    pub estimate: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredPair {
    pub i: usize,
    pub j: usize,
    /// Votes for the better-supported orientation.
    pub count: usize,
    /// Direct sketch estimate of the correlation (or of its change).
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    /// Surviving pairs with `i < j`, ascending.
    pub pairs: Vec<RecoveredPair>,
    /// Majority survivors removed by verification.
    pub rejected: Vec<RecoveredPair>,
    pub candidates: CandidateMultiset,
    pub diagnostics: Vec<RepDiagnostics>,
    pub route: ProductRoute,
    pub seed: u64,
    pub gamma: usize,
    pub verified: bool,
}

impl RecoveryReport {
    pub fn pair_set(&self) -> BTreeSet<(usize, usize)> {
        self.pairs.iter().map(|p| (p.i, p.j)).collect()
    }

    pub fn elapsed_ms(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.elapsed_ms).sum()
    }
}

/// Direct sketch estimates for candidate pairs, accepted when
/// `|estimate| >= phi - 4 epsilon`. Diagonal pairs are never accepted.
pub fn verify_candidates(store: &RowSketchStore, pairs: &[(usize, usize)], phi: f64) -> Result<Vec<VerifiedPair>> {
    if !store.is_standardized() {
        return Err(Error::State("verification needs a standardized store"));
    }
    let floor = phi - 4.0 * store.transform().epsilon();
    pairs
        .iter()
        .map(|&(i, j)| {
            let estimate = store.estimate(i, j)?;
            Ok(VerifiedPair {
                i,
                j,
                estimate,
                accepted: i != j && estimate.abs() >= floor,
            })
        })
        .collect()
}

fn check_query(store: &RowSketchStore, params: &QueryParams, cb: &Codebook) -> Result<()> {
    if !store.is_standardized() {
        return Err(Error::State("queries need a standardized store"));
    }
    if cb.n() < store.n() {
        return Err(Error::Dimension(format!(
            "codebook covers {} indices, store has {} rows",
            cb.n(),
            store.n()
        )));
    }
    if params.gamma == 0 {
        return Err(Error::Parameter("gamma must be at least 1".into()));
    }
    if params.pi == 0 || params.pi > store.n() {
        return Err(Error::Parameter(format!("pi = {} must lie in [1, {}]", params.pi, store.n())));
    }
    Ok(())
}

fn run_repetitions<F>(gamma: usize, seed: u64, body: F) -> Result<(CandidateMultiset, Vec<RepDiagnostics>)>
where
    F: Fn(u64) -> Result<StepOutput> + Sync,
{
    let outputs = (0..gamma)
        .into_par_iter()
        .map(|g| {
            let start = Instant::now();
            let rep_seed = repetition_seed(seed, g);
            let out = body(rep_seed)?;
            let diag = RepDiagnostics {
                repetition: g,
                seed: rep_seed,
                empty_buckets: out.empty_buckets,
                decode_failures: out.decode_failures,
                diagonal_hits: out.diagonal_hits,
                candidates: out.pairs.len(),
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            log::debug!("{diag}");
            Ok((out.pairs, diag))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut multiset = CandidateMultiset::new();
    let mut diagnostics = Vec::with_capacity(gamma);
    for (pairs, diag) in outputs {
        pairs.into_iter().for_each(|p| multiset.insert(p));
        diagnostics.push(diag);
    }
    Ok((multiset, diagnostics))
}

fn finish(
    multiset: &CandidateMultiset,
    gamma: usize,
    verify: Option<f64>,
    estimate: impl Fn(usize, usize) -> Result<f64>,
) -> Result<(Vec<RecoveredPair>, Vec<RecoveredPair>)> {
    let mut pairs = Vec::new();
    let mut rejected = Vec::new();
    for ((i, j), count) in multiset.majority(gamma.div_ceil(2)) {
        let pair = RecoveredPair {
            i,
            j,
            count,
            estimate: estimate(i, j)?,
        };
        match verify {
            Some(floor) if pair.estimate.abs() < floor => rejected.push(pair),
            _ => pairs.push(pair),
        }
    }
    Ok((pairs, rejected))
}

/// Pairs with `|correlation| >= phi`, by majority over `params.gamma`
/// independent repetitions. A threshold above 1 yields an empty report
/// without running any repetition.
pub fn recover(
    store: &RowSketchStore,
    params: &QueryParams,
    cb: &Codebook,
    seed: u64,
    options: &RecoverOptions,
) -> Result<RecoveryReport> {
    check_query(store, params, cb)?;
    let n = store.n();
    let workload = Workload {
        pi: params.pi,
        gamma: params.gamma,
        code_len: cb.codeword_len(),
    };
    let approx = Approximator::new(store, options.route, workload)?;
    if params.phi > 1.0 {
        // No correlation reaches the threshold.
        return Ok(RecoveryReport {
            pairs: Vec::new(),
            rejected: Vec::new(),
            candidates: CandidateMultiset::new(),
            diagnostics: Vec::new(),
            route: approx.route(),
            seed,
            gamma: params.gamma,
            verified: options.verify,
        });
    }
    let (candidates, diagnostics) = run_repetitions(params.gamma, seed, |rep_seed| {
        let t = CartesianTransform::new(n, params.pi, rep_seed)?;
        let rep = approx.prepare(&t)?;
        let buckets = approx.masked_buckets(&rep, cb)?;
        recovery_step(&buckets, &t, cb, params.phi, Baseline::UnitDiagonal)
    })?;
    let floor = options
        .verify
        .then(|| params.phi - 4.0 * store.transform().epsilon());
    let (pairs, rejected) = finish(&candidates, params.gamma, floor, |i, j| {
        store.estimate(i, j)
    })?;
    Ok(RecoveryReport {
        pairs,
        rejected,
        candidates,
        diagnostics,
        route: approx.route(),
        seed,
        gamma: params.gamma,
        verified: options.verify,
    })
}

/// Pairs whose correlation changed by at least `phi` between two stores
/// built with the same sketch transform.
///
/// Each repetition sketches the difference of the two correlation estimates
/// through one shared Cartesian transform; the unit diagonals cancel, so no
/// baseline is subtracted. Verification accepts a pair when the difference
/// of direct estimates reaches `phi - 8 epsilon`.
pub fn recover_diff(
    a: &RowSketchStore,
    b: &RowSketchStore,
    params: &QueryParams,
    cb: &Codebook,
    seed: u64,
    options: &RecoverOptions,
) -> Result<RecoveryReport> {
    if a.transform() != b.transform() {
        return Err(Error::Compatibility("stores use different sketch transforms".into()));
    }
    if a.n() != b.n() {
        return Err(Error::Compatibility(format!("stores have {} and {} rows", a.n(), b.n())));
    }
    check_query(a, params, cb)?;
    check_query(b, params, cb)?;
    let n = a.n();
    let workload = Workload {
        pi: params.pi,
        gamma: params.gamma,
        code_len: cb.codeword_len(),
    };
    let approx_a = Approximator::new(a, options.route, workload)?;
    let approx_b = Approximator::new(b, approx_a.route(), workload)?;
    let (candidates, diagnostics) = run_repetitions(params.gamma, seed, |rep_seed| {
        let t = CartesianTransform::new(n, params.pi, rep_seed)?;
        let ra = approx_a.prepare(&t)?;
        let rb = approx_b.prepare(&t)?;
        let buckets = approx_a.masked_buckets_diff(&ra, &approx_b, &rb, cb)?;
        recovery_step(&buckets, &t, cb, params.phi, Baseline::None)
    })?;
    let floor = options
        .verify
        .then(|| params.phi - 8.0 * a.transform().epsilon());
    let (pairs, rejected) = finish(&candidates, params.gamma, floor, |i, j| {
        Ok(a.estimate(i, j)? - b.estimate(i, j)?)
    })?;
    Ok(RecoveryReport {
        pairs,
        rejected,
        candidates,
        diagnostics,
        route: approx_a.route(),
        seed,
        gamma: params.gamma,
        verified: options.verify,
    })
}
