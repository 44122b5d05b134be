//! Fast AMS (tug-of-war) sketches of the matrix rows.
//!
//! Each of the `d` sketch rows hashes a column index `j` to one of `b`
//! buckets and multiplies the value by a random sign, so an update touches
//! exactly `d` cells. The inner-product query `⊙` is the median over sketch
//! rows of the per-row dot products.

mod snapshot;
mod store;

pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use store::{OnesBuild, RowSketchStore, StandardizeSummary, StoreOptions};

use crate::error::{Error, Result};
use crate::hash::{seeded_rng, PolyHash};

/// Upper bound on `b * d` accepted by the constructors (about 800 MB per row
/// sketch would follow beyond this).
pub const MAX_SKETCH_CELLS: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Hashed { seed: u64, rows: Vec<(PolyHash, PolyHash)> },
    /// `b = p`, one row, unit signs: sketches are the vectors themselves.
    Identity,
}

/// The random linear map `S` from `R^p` to `d x b` arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchTransform {
    p: usize,
    buckets: usize,
    depth: usize,
    kind: Kind,
}

/// `ceil` that ignores representation error just above an integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Buckets per row for an `epsilon` guarantee: `ceil(4 / epsilon^2)`.
pub fn buckets_for_epsilon(epsilon: f64) -> f64 {
    ceil_tol(4.0 / (epsilon * epsilon))
}

/// Sketch rows for a `delta` guarantee: smallest odd integer `>= 8 ln(1/delta)`.
pub fn depth_for_delta(delta: f64) -> usize {
    let raw = ceil_tol(8.0 * (1.0 / delta).ln()).max(1.0) as usize;
    if raw % 2 == 0 {
        raw + 1
    } else {
        raw
    }
}

impl SketchTransform {
    pub fn new(p: usize, buckets: usize, depth: usize, seed: u64) -> Result<Self> {
        if p == 0 || buckets == 0 {
            return Err(Error::Parameter("sketch needs p >= 1 and b >= 1".into()));
        }
        if depth % 2 == 0 {
            return Err(Error::Parameter(format!("sketch depth must be odd, got {depth}")));
        }
        if buckets.saturating_mul(depth) > MAX_SKETCH_CELLS {
            return Err(Error::Parameter(format!(
                "sketch of {depth} x {buckets} cells exceeds the {MAX_SKETCH_CELLS} cell limit"
            )));
        }
        let rows = (0..depth)
            .map(|t| {
                let mut rng = seeded_rng(seed, t as u64);
                let bucket = PolyHash::from_rng(&mut rng);
                let sign = PolyHash::from_rng(&mut rng);
                (bucket, sign)
            })
            .collect();
        Ok(Self {
            p,
            buckets,
            depth,
            kind: Kind::Hashed { seed, rows },
        })
    }

    /// Transform with `b = ceil(4/eps^2)` buckets and `d` the smallest odd
    /// integer at least `8 ln(1/delta)`.
    pub fn from_accuracy(p: usize, epsilon: f64, delta: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!(
                "need 0 < epsilon, delta < 1, got epsilon = {epsilon}, delta = {delta}"
            )));
        }
        let b = buckets_for_epsilon(epsilon);
        if b > MAX_SKETCH_CELLS as f64 {
            return Err(Error::Parameter(format!("epsilon = {epsilon} needs {b} buckets")));
        }
        Self::new(p, b as usize, depth_for_delta(delta), seed)
    }

    /// Exact "sketch": the identity map on `R^p`. Inner products are exact.
    pub fn identity(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Parameter("identity transform needs p >= 1".into()));
        }
        Ok(Self {
            p,
            buckets: p,
            depth: 1,
            kind: Kind::Identity,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.kind {
            Kind::Hashed { seed, .. } => Some(*seed),
            Kind::Identity => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    /// Additive error guaranteed by the bucket count, `2 / sqrt(b)`; zero for
    /// the identity transform.
    pub fn epsilon(&self) -> f64 {
        if self.is_identity() {
            0.0
        } else {
            2.0 / (self.buckets as f64).sqrt()
        }
    }

    /// Failure probability guaranteed by the depth, `exp(-d/8)`; zero for
    /// the identity transform.
    pub fn delta(&self) -> f64 {
        if self.is_identity() {
            0.0
        } else {
            (-(self.depth as f64) / 8.0).exp()
        }
    }

    /// Bucket and sign of column `j` in sketch row `t`.
    #[inline]
    pub fn locate(&self, t: usize, j: usize) -> (usize, f64) {
        match &self.kind {
            Kind::Hashed { rows, .. } => {
                let (bucket, sign) = &rows[t];
                (bucket.bucket(j as u64, self.buckets), sign.sign(j as u64))
            }
            Kind::Identity => (j, 1.0),
        }
    }

    /// Sketch cells per row sketch.
    pub fn cells(&self) -> usize {
        self.depth * self.buckets
    }
}

/// A `d x b` sketch array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AmsSketch {
    depth: usize,
    buckets: usize,
    values: Vec<f64>,
}

impl AmsSketch {
    pub fn zeros(depth: usize, buckets: usize) -> Self {
        Self {
            depth,
            buckets,
            values: vec![0.0; depth * buckets],
        }
    }

    pub fn for_transform(t: &SketchTransform) -> Self {
        Self::zeros(t.depth, t.buckets)
    }

    pub fn from_values(depth: usize, buckets: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != depth * buckets {
            return Err(Error::Dimension(format!(
                "{} values for a {depth}x{buckets} sketch",
                values.len()
            )));
        }
        Ok(Self { depth, buckets, values })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.buckets..(t + 1) * self.buckets]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Adds `alpha * S(e_j)`.
    #[inline]
    pub fn add_basis(&mut self, transform: &SketchTransform, j: usize, alpha: f64) {
        for t in 0..self.depth {
            let (c, s) = transform.locate(t, j);
            self.values[t * self.buckets + c] += alpha * s;
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &AmsSketch, scale: f64) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn check_shape(&self, other: &AmsSketch) -> Result<()> {
        if self.depth != other.depth || self.buckets != other.buckets {
            return Err(Error::Dimension(format!(
                "sketch shapes {}x{} and {}x{} differ",
                self.depth, self.buckets, other.depth, other.buckets
            )));
        }
        Ok(())
    }

    /// Per-row dot products `sum_c a[t][c] * b[t][c]`.
    pub fn row_products(&self, other: &AmsSketch) -> Result<Vec<f64>> {
        self.check_shape(other)?;
        Ok((0..self.depth)
            .map(|t| dot(self.row(t), other.row(t)))
            .collect())
    }

    /// The `⊙` query: median over rows of the per-row dot products.
    pub fn inner_product(&self, other: &AmsSketch) -> Result<f64> {
        let mut prods = self.row_products(other)?;
        Ok(median_in_place(&mut prods))
    }
}

/// Free-function form of [`AmsSketch::inner_product`].
pub fn inner_product(a: &AmsSketch, b: &AmsSketch) -> Result<f64> {
    a.inner_product(b)
}

/// Dense reference path: `S(v) = sum_j v_j S(e_j)`.
pub fn sketch_vector(transform: &SketchTransform, v: &[f64]) -> Result<AmsSketch> {
    if v.len() != transform.p {
        return Err(Error::Dimension(format!(
            "vector of length {} for a transform over p = {}",
            v.len(),
            transform.p
        )));
    }
    let mut out = AmsSketch::for_transform(transform);
    for (j, &x) in v.iter().enumerate() {
        if x != 0.0 {
            out.add_basis(transform, j, x);
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let o = 4 * k;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Median of a non-empty slice; reorders the slice. Even lengths average the
/// two middle values.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let len = values.len();
    assert!(len > 0, "median of empty slice");
    let mid = len / 2;
    let (lower, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if len % 2 == 1 {
        m
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_to_shape_mapping() {
        assert_eq!(buckets_for_epsilon(0.02), 10_000.0);
        assert_eq!(buckets_for_epsilon(0.1), 400.0);
        assert_eq!(depth_for_delta(0.01), 37);
        assert_eq!(depth_for_delta(0.05), 25);
        let t = SketchTransform::from_accuracy(64, 0.05, 0.05, 1).unwrap();
        assert_eq!((t.buckets(), t.depth()), (1600, 25));
    }

    #[test]
    fn even_depth_rejected() {
        assert!(SketchTransform::new(8, 4, 2, 0).is_err());
        assert!(SketchTransform::new(8, 0, 3, 0).is_err());
    }

    #[test]
    fn zero_vector_gives_zero_sketch() {
        let t = SketchTransform::new(16, 8, 3, 5).unwrap();
        assert!(sketch_vector(&t, &[0.0; 16]).unwrap().is_zero());
        assert!(sketch_vector(&t, &[0.0; 15]).is_err());
    }

    #[test]
    fn basis_vector_has_one_signed_entry_per_row() {
        let t = SketchTransform::new(16, 8, 5, 5).unwrap();
        let mut e = vec![0.0; 16];
        e[3] = 1.0;
        let s = sketch_vector(&t, &e).unwrap();
        for r in 0..5 {
            let nz: Vec<f64> = s.row(r).iter().copied().filter(|&v| v != 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert_eq!(nz[0].abs(), 1.0);
        }
        assert_eq!(s.inner_product(&s).unwrap(), 1.0);
    }

    #[test]
    fn zero_sketch_inner_product() {
        let t = SketchTransform::new(16, 8, 3, 5).unwrap();
        let z = AmsSketch::for_transform(&t);
        let v: Vec<f64> = (0..16).map(|x| x as f64 - 3.5).collect();
        let s = sketch_vector(&t, &v).unwrap();
        assert_eq!(z.inner_product(&s).unwrap(), 0.0);
        let other = AmsSketch::zeros(5, 8);
        assert!(z.inner_product(&other).is_err());
    }

    #[test]
    fn ones_vector_equals_folded_basis_updates() {
        let t = SketchTransform::new(64, 32, 5, 9).unwrap();
        let dense = sketch_vector(&t, &[1.0; 64]).unwrap();
        let mut folded = AmsSketch::for_transform(&t);
        for j in 0..64 {
            folded.add_basis(&t, j, 1.0);
        }
        assert_eq!(dense, folded);
    }

    #[test]
    fn identity_transform_is_exact() {
        let t = SketchTransform::identity(5).unwrap();
        let a = sketch_vector(&t, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let b = sketch_vector(&t, &[1.0, -1.0, 0.5, 0.0, 2.0]).unwrap();
        assert_eq!(a.inner_product(&b).unwrap(), 1.0 - 2.0 + 1.5 + 10.0);
        assert_eq!(t.epsilon(), 0.0);
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median_in_place(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median_in_place(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
