//! Cartesian sketches: an `n x n` matrix compressed to `pi x pi` buckets by
//! two independent balanced partitions of the indices and two sign maps.

use rand::seq::SliceRandom;

use crate::ecc::Codebook;
use crate::error::{check_index, Error, Result};
use crate::hash::{seeded_rng, PolyHash};
use crate::stream::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianTransform {
    n: usize,
    n_padded: usize,
    pi: usize,
    seed: u64,
    p1: Vec<u32>,
    p2: Vec<u32>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

fn balanced_partition(n_padded: usize, pi: usize, seed: u64, stream: u64) -> Vec<u32> {
    let mut order: Vec<usize> = (0..n_padded).collect();
    order.shuffle(&mut seeded_rng(seed, stream));
    let block = n_padded / pi;
    let mut map = vec![0u32; n_padded];
    for (pos, &i) in order.iter().enumerate() {
        map[i] = (pos / block) as u32;
    }
    map
}

fn signs(n_padded: usize, seed: u64, stream: u64) -> Vec<f64> {
    let h = PolyHash::from_rng(&mut seeded_rng(seed, stream));
    (0..n_padded as u64).map(|x| h.sign(x)).collect()
}

impl CartesianTransform {
    /// Indices are padded to the next multiple of `pi`; padding indices
    /// never carry data.
    pub fn new(n: usize, pi: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("Cartesian transform needs n >= 1".into()));
        }
        if pi == 0 || pi > n {
            return Err(Error::Parameter(format!("bucket count pi = {pi} must lie in [1, {n}]")));
        }
        let n_padded = pi * n.div_ceil(pi);
        Ok(Self {
            n,
            n_padded,
            pi,
            seed,
            p1: balanced_partition(n_padded, pi, seed, 0),
            p2: balanced_partition(n_padded, pi, seed, 1),
            s1: signs(n_padded, seed, 2),
            s2: signs(n_padded, seed, 3),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_padded(&self) -> usize {
        self.n_padded
    }

    pub fn pi(&self) -> usize {
        self.pi
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn p1(&self, i: usize) -> usize {
        self.p1[i] as usize
    }

    #[inline]
    pub fn p2(&self, i: usize) -> usize {
        self.p2[i] as usize
    }

    #[inline]
    pub fn s1(&self, i: usize) -> f64 {
        self.s1[i]
    }

    #[inline]
    pub fn s2(&self, i: usize) -> f64 {
        self.s2[i]
    }

    /// Real (non-padding) indices in each bucket of the row partition.
    pub fn row_groups(&self) -> Vec<Vec<usize>> {
        groups(&self.p1[..self.n], self.pi)
    }

    /// Real indices in each bucket of the column partition.
    pub fn col_groups(&self) -> Vec<Vec<usize>> {
        groups(&self.p2[..self.n], self.pi)
    }
}

fn groups(map: &[u32], pi: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); pi];
    for (i, &h) in map.iter().enumerate() {
        out[h as usize].push(i);
    }
    out
}

/// A `pi x pi` array of bucket values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketMatrix {
    pi: usize,
    values: Vec<f64>,
}

impl BucketMatrix {
    pub fn zeros(pi: usize) -> Self {
        Self {
            pi,
            values: vec![0.0; pi * pi],
        }
    }

    pub fn from_values(pi: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != pi * pi {
            return Err(Error::Dimension(format!(
                "{} values for a {pi} x {pi} bucket matrix",
                values.len()
            )));
        }
        Ok(Self { pi, values })
    }

    pub fn pi(&self) -> usize {
        self.pi
    }

    #[inline]
    pub fn get(&self, h: usize, g: usize) -> f64 {
        self.values[h * self.pi + g]
    }

    #[inline]
    pub fn add(&mut self, h: usize, g: usize, v: f64) {
        self.values[h * self.pi + g] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &BucketMatrix) -> Result<BucketMatrix> {
        if self.pi != other.pi {
            return Err(Error::Dimension(format!("bucket sizes {} and {} differ", self.pi, other.pi)));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { pi: self.pi, values })
    }
}

/// Exact Cartesian sketch of a dense `n x n` matrix in `O(n^2)`.
pub fn cart_exact(t: &CartesianTransform, a: &DenseMatrix) -> Result<BucketMatrix> {
    if a.rows() != t.n() || a.cols() != t.n() {
        return Err(Error::Dimension(format!(
            "expected a {n} x {n} matrix, got {} x {}",
            a.rows(),
            a.cols(),
            n = t.n()
        )));
    }
    let mut out = BucketMatrix::zeros(t.pi());
    for x in 0..t.n() {
        let h = t.p1(x);
        let sx = t.s1(x);
        for (y, &v) in a.row(x).iter().enumerate() {
            if v != 0.0 {
                out.add(h, t.p2(y), sx * t.s2(y) * v);
            }
        }
    }
    Ok(out)
}

/// Cartesian sketch of the diagonal 0/1 matrix selecting indices whose
/// codeword has bit `l` set, in `O(n)`.
pub fn cart_masked_diag(t: &CartesianTransform, cb: &Codebook, l: usize) -> Result<BucketMatrix> {
    check_index("code bit", l, cb.codeword_len())?;
    if cb.n() < t.n() {
        return Err(Error::Dimension(format!(
            "codebook covers {} indices, transform needs {}",
            cb.n(),
            t.n()
        )));
    }
    let mut out = BucketMatrix::zeros(t.pi());
    for i in 0..t.n() {
        if cb.bit(l, i) {
            out.add(t.p1(i), t.p2(i), t.s1(i) * t.s2(i));
        }
    }
    Ok(out)
}
