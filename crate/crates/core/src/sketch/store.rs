use crate::error::{check_index, Error, Result};
use crate::stream::{DenseMatrix, StreamUpdate};

use super::{dot, median_in_place, AmsSketch, SketchTransform};

/// How the sketch of the all-ones vector is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnesBuild {
    /// Built in full when the store is created.
    #[default]
    Eager,
    /// One basis vector folded in per update; [`RowSketchStore::finalize_ones`]
    /// completes it.
    Amortized,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StoreOptions {
    pub ones: OnesBuild,
    /// Track `sum alpha^2` per row so standardisation can use the exact norm.
    /// Only meaningful when every entry is written once (permutation streams).
    pub exact_rescaling: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StandardizeSummary {
    pub degenerate_rows: Vec<usize>,
}

/// Per-row sketches `r_i = S(y_i)`, row totals and `S(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSketchStore {
    transform: SketchTransform,
    rows: Vec<AmsSketch>,
    totals: Vec<f64>,
    ones: AmsSketch,
    ones_built: usize,
    standardized: bool,
    degenerate: Vec<bool>,
    square_sums: Option<Vec<f64>>,
}

impl RowSketchStore {
    pub fn new(transform: SketchTransform, n: usize) -> Result<Self> {
        Self::with_options(transform, n, StoreOptions::default())
    }

    pub fn with_options(transform: SketchTransform, n: usize, options: StoreOptions) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("store needs at least one row".into()));
        }
        let rows = vec![AmsSketch::for_transform(&transform); n];
        let mut store = Self {
            ones: AmsSketch::for_transform(&transform),
            rows,
            totals: vec![0.0; n],
            ones_built: 0,
            standardized: false,
            degenerate: vec![false; n],
            square_sums: options.exact_rescaling.then(|| vec![0.0; n]),
            transform,
        };
        if options.ones == OnesBuild::Eager {
            store.finalize_ones();
        }
        Ok(store)
    }

    /// Reassembles a store from raw parts (snapshot loading).
    pub(crate) fn from_parts(
        transform: SketchTransform,
        rows: Vec<AmsSketch>,
        totals: Vec<f64>,
        ones: AmsSketch,
        ones_built: usize,
        standardized: bool,
    ) -> Self {
        let degenerate = if standardized {
            rows.iter().map(AmsSketch::is_zero).collect()
        } else {
            vec![false; rows.len()]
        };
        Self {
            transform,
            rows,
            totals,
            ones,
            ones_built,
            standardized,
            degenerate,
            square_sums: None,
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.transform.p()
    }

    pub fn transform(&self) -> &SketchTransform {
        &self.transform
    }

    pub fn row(&self, i: usize) -> &AmsSketch {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[AmsSketch] {
        &self.rows
    }

    pub fn total(&self, i: usize) -> f64 {
        self.totals[i]
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    pub fn ones_sketch(&self) -> &AmsSketch {
        &self.ones
    }

    pub fn ones_built(&self) -> usize {
        self.ones_built
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    /// Bytes held by the row sketches, totals and `S(e)`.
    pub fn sketch_bytes(&self) -> usize {
        8 * ((self.n() + 1) * self.transform.cells() + self.n())
    }

    /// Applies `r_i += alpha S(e_j)` and `t_i += alpha`.
    pub fn update(&mut self, u: &StreamUpdate) -> Result<()> {
        if self.standardized {
            return Err(Error::State("update after standardization"));
        }
        check_index("row", u.i, self.n())?;
        check_index("column", u.j, self.p())?;
        self.rows[u.i].add_basis(&self.transform, u.j, u.alpha);
        self.totals[u.i] += u.alpha;
        if let Some(sq) = self.square_sums.as_mut() {
            sq[u.i] += u.alpha * u.alpha;
        }
        if self.ones_built < self.p() {
            let j = self.ones_built;
            self.ones.add_basis(&self.transform, j, 1.0);
            self.ones_built += 1;
        }
        Ok(())
    }

    pub fn ingest<I>(&mut self, updates: I) -> Result<()>
    where
        I: IntoIterator<Item = StreamUpdate>,
    {
        for u in updates {
            self.update(&u)?;
        }
        Ok(())
    }

    /// Feeds a dense matrix as a row-wise permutation stream.
    pub fn ingest_matrix(&mut self, m: &DenseMatrix) -> Result<()> {
        if m.rows() != self.n() || m.cols() != self.p() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for a store of {} rows over p = {}",
                m.rows(),
                m.cols(),
                self.n(),
                self.p()
            )));
        }
        for i in 0..m.rows() {
            for (j, &alpha) in m.row(i).iter().enumerate() {
                self.update(&StreamUpdate::new(alpha, i, j))?;
            }
        }
        Ok(())
    }

    /// Folds the remaining basis vectors into `S(e)`. Idempotent.
    pub fn finalize_ones(&mut self) {
        for j in self.ones_built..self.p() {
            self.ones.add_basis(&self.transform, j, 1.0);
        }
        self.ones_built = self.p();
    }

    /// Centres every row sketch with `t_i / p` and rescales it to unit
    /// estimated norm. Rows whose squared norm estimate is at most
    /// `1e-12 * p` are zeroed and flagged degenerate.
    pub fn standardize(&mut self) -> Result<StandardizeSummary> {
        if self.standardized {
            return Err(Error::State("store is already standardized"));
        }
        if self.ones_built != self.p() {
            return Err(Error::State("sketch of the ones vector is incomplete"));
        }
        let p = self.p() as f64;
        let threshold = 1e-12 * p;
        let mut degenerate_rows = Vec::new();
        for i in 0..self.n() {
            let mean = self.totals[i] / p;
            let row = &mut self.rows[i];
            row.add_scaled(&self.ones, -mean)?;
            let norm_sq = match &self.square_sums {
                Some(sq) => sq[i] - p * mean * mean,
                None => {
                    let mut prods: Vec<f64> = (0..row.depth()).map(|t| dot(row.row(t), row.row(t))).collect();
                    median_in_place(&mut prods)
                }
            };
            if !(norm_sq > threshold) {
                row.values_mut().iter_mut().for_each(|v| *v = 0.0);
                self.degenerate[i] = true;
                degenerate_rows.push(i);
            } else {
                row.scale(norm_sq.sqrt().recip());
            }
        }
        self.standardized = true;
        Ok(StandardizeSummary { degenerate_rows })
    }

    /// Standardises a copy, leaving `self` untouched.
    pub fn standardized_copy(&self) -> Result<(Self, StandardizeSummary)> {
        let mut copy = self.clone();
        let summary = copy.standardize()?;
        Ok((copy, summary))
    }

    /// `r_i ⊙ r_j`; after standardisation this estimates the correlation.
    pub fn estimate(&self, i: usize, j: usize) -> Result<f64> {
        check_index("row", i, self.n())?;
        check_index("row", j, self.n())?;
        self.rows[i].inner_product(&self.rows[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::sketch_vector;

    fn transform() -> SketchTransform {
        SketchTransform::new(8, 16, 3, 77).unwrap()
    }

    #[test]
    fn single_update_touches_d_cells() {
        let mut s = RowSketchStore::new(transform(), 2).unwrap();
        s.update(&StreamUpdate::new(1.0, 0, 0)).unwrap();
        let nz: Vec<f64> = s.row(0).values().iter().copied().filter(|&v| v != 0.0).collect();
        assert_eq!(nz.len(), 3);
        assert!(nz.iter().all(|v| v.abs() == 1.0));
        assert_eq!(s.total(0), 1.0);
    }

    #[test]
    fn opposite_updates_cancel() {
        let mut s = RowSketchStore::new(SketchTransform::new(8, 16, 3, 1).unwrap(), 1).unwrap();
        s.update(&StreamUpdate::new(2.0, 0, 5)).unwrap();
        s.update(&StreamUpdate::new(-2.0, 0, 5)).unwrap();
        assert!(s.row(0).is_zero());
    }

    #[test]
    fn update_after_standardize_is_state_error() {
        let mut s = RowSketchStore::new(transform(), 2).unwrap();
        s.update(&StreamUpdate::new(1.0, 0, 1)).unwrap();
        s.standardize().unwrap();
        assert!(matches!(s.update(&StreamUpdate::new(1.0, 0, 1)), Err(Error::State(_))));
        assert!(matches!(s.standardize(), Err(Error::State(_))));
    }

    #[test]
    fn finalize_ones_eager_and_idempotent() {
        let t = transform();
        let opts = StoreOptions {
            ones: OnesBuild::Amortized,
            ..Default::default()
        };
        let mut s = RowSketchStore::with_options(t.clone(), 2, opts).unwrap();
        assert_eq!(s.ones_built(), 0);
        s.finalize_ones();
        let eager = sketch_vector(&t, &[1.0; 8]).unwrap();
        assert_eq!(s.ones_sketch(), &eager);
        s.finalize_ones();
        assert_eq!(s.ones_sketch(), &eager);
        assert_eq!(s.ones_built(), 8);
    }

    #[test]
    fn interleaved_ones_fold_matches_eager_build() {
        let t = transform();
        let opts = StoreOptions {
            ones: OnesBuild::Amortized,
            ..Default::default()
        };
        let mut s = RowSketchStore::with_options(t.clone(), 2, opts).unwrap();
        for j in 0..5 {
            s.update(&StreamUpdate::new(0.5, 1, j)).unwrap();
        }
        assert_eq!(s.ones_built(), 5);
        assert!(s.standardize().is_err());
        s.finalize_ones();
        let eager = RowSketchStore::new(t, 2).unwrap();
        assert_eq!(s.ones_sketch(), eager.ones_sketch());
    }

    #[test]
    fn constant_row_is_degenerate() {
        let mut s = RowSketchStore::new(transform(), 2).unwrap();
        for j in 0..8 {
            s.update(&StreamUpdate::new(3.0, 0, j)).unwrap();
            s.update(&StreamUpdate::new(j as f64, 1, j)).unwrap();
        }
        let summary = s.standardize().unwrap();
        assert_eq!(summary.degenerate_rows, vec![0]);
        assert!(s.row(0).is_zero());
        assert!(!s.is_degenerate(1));
    }

    #[test]
    fn identical_rows_estimate_one() {
        let t = SketchTransform::new(64, 200, 7, 3).unwrap();
        let mut s = RowSketchStore::new(t, 2).unwrap();
        for j in 0..64 {
            let v = ((j * 37) % 11) as f64 - 4.0;
            s.update(&StreamUpdate::new(v, 0, j)).unwrap();
            s.update(&StreamUpdate::new(v, 1, j)).unwrap();
        }
        let (std, _) = s.standardized_copy().unwrap();
        assert!(!s.is_standardized());
        let est = std.estimate(0, 1).unwrap();
        assert!((est - 1.0).abs() < 1e-12, "{est}");
    }

    #[test]
    fn exact_rescaling_gives_unit_norm_under_identity() {
        let t = SketchTransform::identity(6).unwrap();
        let opts = StoreOptions {
            exact_rescaling: true,
            ..Default::default()
        };
        let mut s = RowSketchStore::with_options(t, 1, opts).unwrap();
        for (j, v) in [1.0, 4.0, -2.0, 0.5, 3.0, 7.0].iter().enumerate() {
            s.update(&StreamUpdate::new(*v, 0, j)).unwrap();
        }
        s.standardize().unwrap();
        let norm = s.estimate(0, 0).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
