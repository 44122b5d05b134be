//! Masked bucket matrices from standardized row sketches.
//!
//! For code bit `l` and sketch row `t`, the row-`t` value of `L[l][h][g]` is
//!
//! ```text
//! sum over i in P1^-1(h), j in P2^-1(g) of mask(l, i) s1(i) s2(j) <r_i[t], r_j[t]>
//! ```
//!
//! and `R[l]` puts the mask on `j` instead. The bucket value is the median of
//! these over `t`. Two evaluation orders give the same sums:
//!
//! * [`ProductRoute::GroupFirst`] aggregates row sketches into `pi` group
//!   sketches and multiplies the `pi x b` group arrays, once per code bit.
//! * [`ProductRoute::Gram`] forms every row Gram matrix `R_t R_t^T` once per
//!   query and aggregates its entries per repetition and bit, which is much
//!   cheaper when `n` is small relative to `pi * b`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cartesian::{BucketMatrix, CartesianTransform};
use crate::ecc::Codebook;
use crate::error::{Error, Result};
use crate::matmul::{BlockedMatMul, MatMul};
use crate::sketch::{median_in_place, RowSketchStore};

/// Gram matrices above this many bytes are never chosen automatically.
pub const DEFAULT_GRAM_LIMIT_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProductRoute {
    #[default]
    Auto,
    GroupFirst,
    Gram,
}

impl FromStr for ProductRoute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "group" | "group-first" => Ok(Self::GroupFirst),
            "gram" => Ok(Self::Gram),
            other => Err(Error::Parameter(format!("unknown product route {other:?}"))),
        }
    }
}

impl fmt::Display for ProductRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::GroupFirst => "group-first",
            Self::Gram => "gram",
        })
    }
}

/// The query shape used to pick a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workload {
    pub pi: usize,
    pub gamma: usize,
    pub code_len: usize,
}

/// `L[l]` and `R[l]` for every code bit `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedBucketSet {
    pub left: Vec<BucketMatrix>,
    pub right: Vec<BucketMatrix>,
}

impl MaskedBucketSet {
    pub fn pi(&self) -> usize {
        self.left.first().map_or(0, BucketMatrix::pi)
    }

    pub fn code_len(&self) -> usize {
        self.left.len()
    }

    pub fn sub(&self, other: &MaskedBucketSet) -> Result<MaskedBucketSet> {
        if self.code_len() != other.code_len() {
            return Err(Error::Dimension("masked bucket sets differ in code length".into()));
        }
        let left = self.left.iter().zip(&other.left).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        let right = self.right.iter().zip(&other.right).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(Self { left, right })
    }
}

/// Row sketches restricted, per sketch row, to buckets that are nonzero in
/// at least one row. Dropping all-zero columns leaves every product intact.
#[derive(Debug)]
struct CompactRows {
    n: usize,
    widths: Vec<usize>,
    /// `data[t]` is `n x widths[t]`, row-major.
    data: Vec<Vec<f64>>,
}

impl CompactRows {
    fn from_store(store: &RowSketchStore) -> Self {
        let n = store.n();
        let t_count = store.transform().depth();
        let b = store.transform().buckets();
        let mut widths = Vec::with_capacity(t_count);
        let mut data = Vec::with_capacity(t_count);
        for t in 0..t_count {
            let mut active = vec![false; b];
            for row in store.rows() {
                for (a, &v) in active.iter_mut().zip(row.row(t)) {
                    *a |= v != 0.0;
                }
            }
            let cols: Vec<usize> = (0..b).filter(|&c| active[c]).collect();
            let w = cols.len();
            let mut block = vec![0.0; n * w];
            for (i, row) in store.rows().iter().enumerate() {
                let src = row.row(t);
                for (dst, &c) in block[i * w..(i + 1) * w].iter_mut().zip(&cols) {
                    *dst = src[c];
                }
            }
            widths.push(w);
            data.push(block);
        }
        Self { n, widths, data }
    }

    fn depth(&self) -> usize {
        self.widths.len()
    }

    fn row(&self, t: usize, i: usize) -> &[f64] {
        let w = self.widths[t];
        &self.data[t][i * w..(i + 1) * w]
    }

    fn mean_width(&self) -> f64 {
        self.widths.iter().sum::<usize>() as f64 / self.depth().max(1) as f64
    }
}

/// Per-repetition precomputation for one Cartesian transform.
#[derive(Debug)]
pub struct Repetition<'t> {
    transform: &'t CartesianTransform,
    parts: Parts,
}

#[derive(Debug)]
enum Parts {
    /// Per sketch row: `pi x w` signed group sums under `P1` and `P2`.
    Groups { left: Vec<Vec<f64>>, right: Vec<Vec<f64>> },
    /// Per sketch row: `n x pi` arrays `q1[j][h] = sum_{P1(i)=h} s1(i) K[j][i]`
    /// and `q2[i][g] = sum_{P2(j)=g} s2(j) K[i][j]`.
    Gram { q1: Vec<Vec<f64>>, q2: Vec<Vec<f64>> },
}

/// Query-time state shared by every repetition over one standardized store.
#[derive(Debug)]
pub struct Approximator<'a> {
    store: &'a RowSketchStore,
    rows: CompactRows,
    route: ProductRoute,
    gram: Option<Vec<Vec<f64>>>,
    kernel: Arc<dyn MatMul>,
}

/// Rough operation counts of the two routes for a whole query.
pub fn route_costs(n: usize, depth: usize, width: f64, w: &Workload) -> (f64, f64) {
    let (n, d, pi, g, l) = (n as f64, depth as f64, w.pi as f64, w.gamma as f64, w.code_len as f64);
    let group = g * d * (2.0 * n * width + l * (n * width + 2.0 * pi * pi * width));
    let gram = d * n * n * width + g * d * (2.0 * n * n + l * (n * pi + 2.0 * pi * pi));
    (group, gram)
}

impl<'a> Approximator<'a> {
    pub fn new(store: &'a RowSketchStore, route: ProductRoute, workload: Workload) -> Result<Self> {
        Self::with_kernel(store, route, workload, Arc::new(BlockedMatMul::default()))
    }

    pub fn with_kernel(
        store: &'a RowSketchStore,
        route: ProductRoute,
        workload: Workload,
        kernel: Arc<dyn MatMul>,
    ) -> Result<Self> {
        if !store.is_standardized() {
            return Err(Error::State("queries need a standardized store"));
        }
        let rows = CompactRows::from_store(store);
        let n = store.n();
        let gram_bytes = rows.depth() * n * n * 8;
        let route = match route {
            ProductRoute::Auto => {
                let (group, gram) = route_costs(n, rows.depth(), rows.mean_width(), &workload);
                if gram < group && gram_bytes <= DEFAULT_GRAM_LIMIT_BYTES {
                    ProductRoute::Gram
                } else {
                    ProductRoute::GroupFirst
                }
            }
            r => r,
        };
        let gram = (route == ProductRoute::Gram).then(|| {
            (0..rows.depth())
                .into_par_iter()
                .map(|t| {
                    let w = rows.widths[t];
                    let mut k = vec![0.0; n * n];
                    kernel.mul_transposed(&rows.data[t], &rows.data[t], n, n, w, &mut k);
                    k
                })
                .collect()
        });
        log::debug!("product route {route}, mean active width {:.1}", rows.mean_width());
        Ok(Self {
            store,
            rows,
            route,
            gram,
            kernel,
        })
    }

    pub fn route(&self) -> ProductRoute {
        self.route
    }

    pub fn store(&self) -> &RowSketchStore {
        self.store
    }

    pub fn depth(&self) -> usize {
        self.rows.depth()
    }

    fn check(&self, t: &CartesianTransform, cb: Option<&Codebook>) -> Result<()> {
        if t.n() != self.rows.n {
            return Err(Error::Dimension(format!(
                "transform over {} indices for a store with {} rows",
                t.n(),
                self.rows.n
            )));
        }
        if let Some(cb) = cb {
            if cb.n() < self.rows.n {
                return Err(Error::Dimension(format!(
                    "codebook covers {} indices, store has {} rows",
                    cb.n(),
                    self.rows.n
                )));
            }
        }
        Ok(())
    }

    pub fn prepare<'t>(&self, t: &'t CartesianTransform) -> Result<Repetition<'t>> {
        self.check(t, None)?;
        let n = self.rows.n;
        let pi = t.pi();
        let parts = match &self.gram {
            None => {
                let (left, right) = (0..self.depth())
                    .map(|r| {
                        let w = self.rows.widths[r];
                        let mut left = vec![0.0; pi * w];
                        let mut right = vec![0.0; pi * w];
                        for i in 0..n {
                            let x = self.rows.row(r, i);
                            axpy(&mut left[t.p1(i) * w..(t.p1(i) + 1) * w], t.s1(i), x);
                            axpy(&mut right[t.p2(i) * w..(t.p2(i) + 1) * w], t.s2(i), x);
                        }
                        (left, right)
                    })
                    .unzip();
                Parts::Groups { left, right }
            }
            Some(gram) => {
                let (q1, q2) = gram
                    .iter()
                    .map(|k| {
                        let mut q1 = vec![0.0; n * pi];
                        let mut q2 = vec![0.0; n * pi];
                        for j in 0..n {
                            let krow = &k[j * n..(j + 1) * n];
                            let o1 = &mut q1[j * pi..(j + 1) * pi];
                            for (i, &v) in krow.iter().enumerate() {
                                o1[t.p1(i)] += t.s1(i) * v;
                            }
                            let o2 = &mut q2[j * pi..(j + 1) * pi];
                            for (i, &v) in krow.iter().enumerate() {
                                o2[t.p2(i)] += t.s2(i) * v;
                            }
                        }
                        (q1, q2)
                    })
                    .unzip();
                Parts::Gram { q1, q2 }
            }
        };
        Ok(Repetition { transform: t, parts })
    }

    /// Row-`t` values of `L[l]` and `R[l]`, laid out `[t][h * pi + g]`.
    fn bit_rows(&self, rep: &Repetition<'_>, cb: &Codebook, l: usize, left_out: &mut [f64], right_out: &mut [f64]) {
        let t = rep.transform;
        let n = self.rows.n;
        let pi = t.pi();
        let cells = pi * pi;
        left_out.fill(0.0);
        right_out.fill(0.0);
        match &rep.parts {
            Parts::Groups { left, right } => {
                let mut lm = Vec::new();
                let mut rm = Vec::new();
                for r in 0..self.depth() {
                    let w = self.rows.widths[r];
                    lm.clear();
                    lm.resize(pi * w, 0.0);
                    rm.clear();
                    rm.resize(pi * w, 0.0);
                    for i in (0..n).filter(|&i| cb.bit(l, i)) {
                        let x = self.rows.row(r, i);
                        axpy(&mut lm[t.p1(i) * w..(t.p1(i) + 1) * w], t.s1(i), x);
                        axpy(&mut rm[t.p2(i) * w..(t.p2(i) + 1) * w], t.s2(i), x);
                    }
                    let lo = &mut left_out[r * cells..(r + 1) * cells];
                    self.kernel.mul_transposed(&lm, &right[r], pi, pi, w, lo);
                    let ro = &mut right_out[r * cells..(r + 1) * cells];
                    self.kernel.mul_transposed(&left[r], &rm, pi, pi, w, ro);
                }
            }
            Parts::Gram { q1, q2 } => {
                for r in 0..self.depth() {
                    let lo = &mut left_out[r * cells..(r + 1) * cells];
                    let ro = &mut right_out[r * cells..(r + 1) * cells];
                    for i in (0..n).filter(|&i| cb.bit(l, i)) {
                        let h = t.p1(i);
                        axpy(&mut lo[h * pi..(h + 1) * pi], t.s1(i), &q2[r][i * pi..(i + 1) * pi]);
                        let g = t.p2(i);
                        let s = t.s2(i);
                        for (h, &v) in q1[r][i * pi..(i + 1) * pi].iter().enumerate() {
                            ro[h * pi + g] += s * v;
                        }
                    }
                }
            }
        }
    }

    /// Per-sketch-row values of `L[l]` and `R[l]` before the median.
    pub fn row_values(
        &self,
        rep: &Repetition<'_>,
        cb: &Codebook,
        l: usize,
    ) -> Result<(Vec<BucketMatrix>, Vec<BucketMatrix>)> {
        self.check(rep.transform, Some(cb))?;
        crate::error::check_index("code bit", l, cb.codeword_len())?;
        let cells = rep.transform.pi() * rep.transform.pi();
        let mut lo = vec![0.0; self.depth() * cells];
        let mut ro = vec![0.0; self.depth() * cells];
        self.bit_rows(rep, cb, l, &mut lo, &mut ro);
        let split = |v: Vec<f64>| {
            v.chunks(cells)
                .map(|c| BucketMatrix::from_values(rep.transform.pi(), c.to_vec()).expect("square chunk"))
                .collect()
        };
        Ok((split(lo), split(ro)))
    }

    pub fn masked_buckets(&self, rep: &Repetition<'_>, cb: &Codebook) -> Result<MaskedBucketSet> {
        self.check(rep.transform, Some(cb))?;
        Ok(collect_bits(rep.transform.pi(), self.depth(), cb.codeword_len(), |l, lo, ro| {
            self.bit_rows(rep, cb, l, lo, ro)
        }))
    }

    /// Masked buckets of the difference of two stores' correlation
    /// estimates, taken per sketch row before the median.
    pub fn masked_buckets_diff(
        &self,
        rep: &Repetition<'_>,
        other: &Approximator<'_>,
        other_rep: &Repetition<'_>,
        cb: &Codebook,
    ) -> Result<MaskedBucketSet> {
        self.check(rep.transform, Some(cb))?;
        other.check(other_rep.transform, Some(cb))?;
        if rep.transform != other_rep.transform || self.depth() != other.depth() {
            return Err(Error::Compatibility("difference needs a shared Cartesian transform".into()));
        }
        let cells = rep.transform.pi() * rep.transform.pi();
        Ok(collect_bits(rep.transform.pi(), self.depth(), cb.codeword_len(), |l, lo, ro| {
            let mut lb = vec![0.0; lo.len()];
            let mut rb = vec![0.0; ro.len()];
            self.bit_rows(rep, cb, l, lo, ro);
            other.bit_rows(other_rep, cb, l, &mut lb, &mut rb);
            debug_assert_eq!(lb.len() % cells, 0);
            lo.iter_mut().zip(&lb).for_each(|(a, b)| *a -= b);
            ro.iter_mut().zip(&rb).for_each(|(a, b)| *a -= b);
        }))
    }
}

fn collect_bits<F>(pi: usize, depth: usize, code_len: usize, fill: F) -> MaskedBucketSet
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    let cells = pi * pi;
    let (left, right) = (0..code_len)
        .into_par_iter()
        .map(|l| {
            let mut lo = vec![0.0; depth * cells];
            let mut ro = vec![0.0; depth * cells];
            fill(l, &mut lo, &mut ro);
            (median_rows(pi, depth, &lo), median_rows(pi, depth, &ro))
        })
        .unzip();
    MaskedBucketSet { left, right }
}

fn median_rows(pi: usize, depth: usize, rows: &[f64]) -> BucketMatrix {
    let cells = pi * pi;
    if depth == 1 {
        return BucketMatrix::from_values(pi, rows.to_vec()).expect("square");
    }
    let mut buf = vec![0.0; depth];
    let values = (0..cells)
        .map(|c| {
            for (t, b) in buf.iter_mut().enumerate() {
                *b = rows[t * cells + c];
            }
            median_in_place(&mut buf)
        })
        .collect();
    BucketMatrix::from_values(pi, values).expect("square")
}

#[inline]
fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, &v) in dst.iter_mut().zip(x) {
        *d += a * v;
    }
}

/// One-shot masked bucket computation with an automatically chosen route.
pub fn approximate(store: &RowSketchStore, t: &CartesianTransform, cb: &Codebook) -> Result<MaskedBucketSet> {
    let workload = Workload {
        pi: t.pi(),
        gamma: 1,
        code_len: cb.codeword_len(),
    };
    let a = Approximator::new(store, ProductRoute::Auto, workload)?;
    let rep = a.prepare(t)?;
    a.masked_buckets(&rep, cb)
}
