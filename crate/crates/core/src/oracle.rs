//! Exact reference computations on a dense matrix, and a generator for
//! instances with planted correlated pairs.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::stream::DenseMatrix;

/// Sample Pearson correlations of the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    values: Vec<f64>,
    degenerate: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!("{} values for a {n} x {n} matrix", values.len())));
        }
        Ok(Self {
            n,
            values,
            degenerate: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows with zero sample variance.
    pub fn degenerate_rows(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_rows(self.n, self.n, self.values.clone()).expect("square values")
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }
}

/// Sample means, covariances with the `1 / (p - 1)` factor, and
/// correlations. Rows of zero variance get unit diagonal and zero
/// off-diagonal entries.
pub fn correlation(m: &DenseMatrix) -> CorrelationMatrix {
    let (n, p) = (m.rows(), m.cols());
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row = m.row(i);
            let mean = row.iter().sum::<f64>() / p as f64;
            row.iter().map(|v| v - mean).collect()
        })
        .collect();
    let scale = 1.0 / (p as f64 - 1.0);
    let var: Vec<f64> = centered.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() * scale).collect();
    let degenerate: Vec<usize> = (0..n)
        .filter(|&i| {
            let energy = m.row(i).iter().map(|v| v * v).sum::<f64>() * scale;
            var[i] <= 1e-24 * energy.max(f64::MIN_POSITIVE) || var[i] == 0.0
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        if degenerate.contains(&i) {
            continue;
        }
        for j in i + 1..n {
            if degenerate.contains(&j) {
                continue;
            }
            let cov = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() * scale;
            let c = cov / (var[i] * var[j]).sqrt();
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    CorrelationMatrix { n, values, degenerate }
}

/// Ordered off-diagonal pairs with `|C[i][j]| >= phi`.
pub fn large_set(c: &CorrelationMatrix, phi: f64) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..c.n() {
        for j in 0..c.n() {
            if i != j && c.get(i, j).abs() >= phi {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Frobenius norm of the off-diagonal part after zeroing the `k` largest
/// entries in magnitude. Entries are counted individually, so a symmetric
/// pair uses two; ties go to the lexicographically smaller `(row, column)`.
pub fn residual_norm(c: &CorrelationMatrix, k: usize) -> f64 {
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(c.n() * c.n());
    for i in 0..c.n() {
        for j in 0..c.n() {
            if i != j {
                entries.push((c.get(i, j).abs(), i, j));
            }
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    entries.iter().skip(k).map(|e| e.0 * e.0).sum::<f64>().sqrt()
}

/// Recipe for a Gaussian instance with planted correlated row pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    pub p: usize,
    /// `(i, j, target correlation)`; row `j` is rebuilt from row `i`.
    pub planted: Vec<(usize, usize, f64)>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn new(n: usize, p: usize, planted: Vec<(usize, usize, f64)>, seed: u64) -> Self {
        Self {
            n,
            p,
            planted,
            noise_scale: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 3 {
            return Err(Error::Parameter(format!("need n >= 2 and p >= 3, got {} x {}", self.n, self.p)));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::Parameter(format!("noise scale must be positive, got {}", self.noise_scale)));
        }
        let mut used = BTreeSet::new();
        for &(i, j, rho) in &self.planted {
            if i >= self.n || j >= self.n || i == j {
                return Err(Error::Parameter(format!("invalid planted pair ({i}, {j}) for n = {}", self.n)));
            }
            if !(rho.is_finite() && rho.abs() < 1.0) {
                return Err(Error::Parameter(format!("planted correlation {rho} must satisfy |rho| < 1")));
            }
            if !used.insert(i) || !used.insert(j) {
                return Err(Error::Parameter(format!("planted pair ({i}, {j}) shares an index with another pair")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPair {
    pub i: usize,
    pub j: usize,
    pub target: f64,
    pub realized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDataset {
    pub matrix: DenseMatrix,
    pub pairs: Vec<PlantedPair>,
}

/// Largest allowed gap between target and realized planted correlations.
pub const PLANT_TOLERANCE: f64 = 0.02;
const PLANT_ATTEMPTS: usize = 8;

fn pair_correlation(x: &[f64], y: &[f64]) -> f64 {
    let m = DenseMatrix::from_rows(2, x.len(), x.iter().chain(y).copied().collect()).expect("two rows");
    correlation(&m).get(0, 1)
}

fn blend(x: &[f64], z: &[f64], mix: f64) -> Vec<f64> {
    let rest = (1.0 - mix * mix).max(0.0).sqrt();
    x.iter().zip(z).map(|(a, b)| mix * a + rest * b).collect()
}

pub fn plant_dataset(spec: &PlantedSpec) -> Result<PlantedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..len)
            .map(|_| spec.noise_scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect()
    };
    let data: Vec<f64> = noise(spec.n * spec.p, &mut rng);
    let mut matrix = DenseMatrix::from_rows(spec.n, spec.p, data)?;
    let mut pairs = Vec::with_capacity(spec.planted.len());
    for &(i, j, target) in &spec.planted {
        let x = matrix.row(i).to_vec();
        let mut planted = None;
        for _ in 0..PLANT_ATTEMPTS {
            let z = noise(spec.p, &mut rng);
            // The realized correlation increases with the mixing weight.
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if pair_correlation(&x, &blend(&x, &z, mid)) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let row = blend(&x, &z, 0.5 * (lo + hi));
            let realized = pair_correlation(&x, &row);
            if (realized - target).abs() <= PLANT_TOLERANCE {
                planted = Some((row, realized));
                break;
            }
        }
        let (row, realized) = planted.ok_or_else(|| {
            Error::Generation(format!("could not plant correlation {target} for ({i}, {j})"))
        })?;
        matrix.row_mut(j).copy_from_slice(&row);
        pairs.push(PlantedPair { i, j, target, realized });
    }
    Ok(PlantedDataset { matrix, pairs })
}

/// Ground-truth listing: a `truth <n> <p> <count>` header, then
/// `i j target realized` per planted pair.
pub fn write_truth<W: Write>(dataset: &PlantedDataset, mut out: W) -> Result<()> {
    writeln!(
        out,
        "truth {} {} {}",
        dataset.matrix.rows(),
        dataset.matrix.cols(),
        dataset.pairs.len()
    )?;
    for p in &dataset.pairs {
        writeln!(out, "{} {} {} {}", p.i, p.j, p.target, p.realized)?;
    }
    Ok(())
}

pub fn read_truth<R: BufRead>(input: R) -> Result<Vec<PlantedPair>> {
    let mut lines = input.lines().enumerate();
    let bad = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing truth header"))?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "truth" {
        return Err(bad(1, "expected `truth <n> <p> <count>`"));
    }
    let count: usize = fields[3].parse().map_err(|_| bad(1, "invalid pair count"))?;
    let mut pairs = Vec::with_capacity(count);
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let parse_err = || bad(idx + 1, "expected `i j target realized`");
        if f.len() != 4 {
            return Err(parse_err());
        }
        pairs.push(PlantedPair {
            i: f[0].parse().map_err(|_| parse_err())?,
            j: f[1].parse().map_err(|_| parse_err())?,
            target: f[2].parse().map_err(|_| parse_err())?,
            realized: f[3].parse().map_err(|_| parse_err())?,
        });
    }
    if pairs.len() != count {
        return Err(bad(1, &format!("header announces {count} pairs, found {}", pairs.len())));
    }
    Ok(pairs)
}
