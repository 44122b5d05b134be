//! Timing of ingest and query over a grid of sizes, with log-log growth
//! exponents.
//!
//! For each `n` the bucket count is `pi = ceil(n^theta (k + R / phi))` and
//! the sketch accuracy is `epsilon = min(1/2, eps_scale * pi / n)`, so the
//! bucket count per row grows as `n^(2 - 2 theta)`. The codebook is built
//! once for the largest `n` so that code length stays fixed along the grid.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::ecc::Codebook;
use crate::error::{Error, Result};
use crate::oracle::{plant_dataset, PlantedSpec};
use crate::recovery::{recover, scaled_buckets, ParamMode, ProductRoute, QueryParams, RecoverOptions};
use crate::sketch::{buckets_for_epsilon, RowSketchStore, SketchTransform};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchGrid {
    pub ns: Vec<usize>,
    pub p: usize,
    pub theta: f64,
    pub phi: f64,
    pub k: usize,
    pub residual: f64,
    pub eps_scale: f64,
    pub depth: usize,
    pub gamma: usize,
    pub seed: u64,
    pub route: ProductRoute,
    /// Rows after the first one that pushes total elapsed time past this
    /// budget are skipped.
    pub budget_secs: f64,
}

impl Default for BenchGrid {
    fn default() -> Self {
        Self {
            ns: vec![256, 512, 1024],
            p: 4096,
            theta: 2.0 / 3.0,
            phi: 0.8,
            k: 1,
            residual: 0.0,
            eps_scale: 1.0,
            depth: 3,
            gamma: 1,
            seed: 1,
            route: ProductRoute::GroupFirst,
            budget_secs: 600.0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("invalid value {value:?} for grid key {key}")))
}

impl FromStr for BenchGrid {
    type Err = Error;

    /// `key=value` pairs separated by `;`, for example
    /// `n=256,512,1024;p=4096;theta=0.6667`. Unset keys keep defaults.
    fn from_str(spec: &str) -> Result<Self> {
        let mut grid = BenchGrid::default();
        for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("grid entry {part:?} is not key=value")))?;
            let key = key.trim();
            match key {
                "n" => {
                    grid.ns = value
                        .split(',')
                        .map(|v| parse_value(key, v))
                        .collect::<Result<Vec<usize>>>()?
                }
                "p" => grid.p = parse_value(key, value)?,
                "theta" => grid.theta = parse_value(key, value)?,
                "phi" => grid.phi = parse_value(key, value)?,
                "k" => grid.k = parse_value(key, value)?,
                "R" | "r" => grid.residual = parse_value(key, value)?,
                "eps_scale" => grid.eps_scale = parse_value(key, value)?,
                "d" | "depth" => grid.depth = parse_value(key, value)?,
                "gamma" => grid.gamma = parse_value(key, value)?,
                "seed" => grid.seed = parse_value(key, value)?,
                "route" => grid.route = value.trim().parse()?,
                "budget" => grid.budget_secs = parse_value(key, value)?,
                other => return Err(Error::Parameter(format!("unknown grid key {other:?}"))),
            }
        }
        grid.validate()?;
        Ok(grid)
    }
}

impl BenchGrid {
    fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 2) {
            return Err(Error::Parameter("grid needs sizes n >= 2".into()));
        }
        if self.p < 3 {
            return Err(Error::Parameter("grid needs p >= 3".into()));
        }
        if self.depth % 2 == 0 {
            return Err(Error::Parameter("sketch depth must be odd".into()));
        }
        if self.gamma == 0 || !(self.eps_scale > 0.0) || !(self.phi > 0.0) {
            return Err(Error::Parameter("gamma, eps_scale and phi must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Parameter("theta must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn pi_for(&self, n: usize) -> usize {
        scaled_buckets(n, self.theta, self.phi, self.k, self.residual).clamp(1, n)
    }

    pub fn epsilon_for(&self, n: usize) -> f64 {
        (self.eps_scale * self.pi_for(n) as f64 / n as f64).min(0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub p: usize,
    pub pi: usize,
    pub buckets: usize,
    pub depth: usize,
    pub gamma: usize,
    pub code_len: usize,
    pub sketch_bytes: usize,
    pub ingest_ms: f64,
    pub query_ms: f64,
    pub recovered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Slope of log(query time) against log(n); `None` with fewer than two rows.
    pub query_exponent: Option<f64>,
    pub bytes_exponent: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Ingests one planted instance of size `n` and times a query on it.
pub fn run_point(grid: &BenchGrid, n: usize, codebook: &Codebook) -> Result<BenchRow> {
    let pi = grid.pi_for(n);
    let epsilon = grid.epsilon_for(n);
    let buckets = buckets_for_epsilon(epsilon) as usize;
    let planted = plant_dataset(&PlantedSpec::new(n, grid.p, vec![(0, n - 1, 0.95)], grid.seed ^ n as u64))?;
    let transform = SketchTransform::new(grid.p, buckets, grid.depth, grid.seed)?;

    let start = Instant::now();
    let mut store = RowSketchStore::new(transform, n)?;
    store.ingest_matrix(&planted.matrix)?;
    let ingest_ms = start.elapsed().as_secs_f64() * 1e3;
    let sketch_bytes = store.sketch_bytes();

    let params = QueryParams {
        phi: grid.phi,
        k: grid.k,
        residual: grid.residual,
        pi,
        epsilon,
        delta: (-(grid.depth as f64) / 8.0).exp(),
        gamma: grid.gamma,
        theta: grid.theta,
        lambda: codebook.lambda(),
        mode: ParamMode::Practical,
        warnings: Vec::new(),
    };
    let options = RecoverOptions {
        verify: false,
        route: grid.route,
    };
    let start = Instant::now();
    store.standardize()?;
    let report = recover(&store, &params, codebook, grid.seed, &options)?;
    let query_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(BenchRow {
        n,
        p: grid.p,
        pi,
        buckets,
        depth: grid.depth,
        gamma: grid.gamma,
        code_len: codebook.codeword_len(),
        sketch_bytes,
        ingest_ms,
        query_ms,
        recovered: report.pairs.len(),
    })
}

pub fn run_bench(grid: &BenchGrid) -> Result<BenchReport> {
    grid.validate()?;
    let n_max = *grid.ns.iter().max().expect("non-empty grid");
    let codebook = Codebook::for_indices(n_max)?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(grid.ns.len());
    for &n in &grid.ns {
        if start.elapsed().as_secs_f64() > grid.budget_secs {
            log::warn!("time budget exhausted, skipping n = {n} and larger");
            break;
        }
        let row = run_point(grid, n, &codebook)?;
        log::info!(
            "n={} pi={} b={} query_ms={:.1} ingest_ms={:.1}",
            row.n,
            row.pi,
            row.buckets,
            row.query_ms,
            row.ingest_ms
        );
        rows.push(row);
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let query: Vec<f64> = rows.iter().map(|r| r.query_ms).collect();
    let bytes: Vec<f64> = rows.iter().map(|r| r.sketch_bytes as f64).collect();
    Ok(BenchReport {
        query_exponent: fit_exponent(&ns, &query),
        bytes_exponent: fit_exponent(&ns, &bytes),
        rows,
    })
}

pub fn write_csv<W: Write>(report: &BenchReport, mut out: W) -> Result<()> {
    writeln!(
        out,
        "n,p,pi,b,d,gamma,code_len,sketch_bytes,ingest_ms,query_ms,recovered"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.3},{:.3},{}",
            r.n, r.p, r.pi, r.buckets, r.depth, r.gamma, r.code_len, r.sketch_bytes, r.ingest_ms, r.query_ms, r.recovered
        )?;
    }
    Ok(())
}
