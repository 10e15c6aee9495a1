//! Row-stochastic matrices stored row-compressed.
//!
//! Rows are conditional distributions `P(y | x)`. Only nonzero entries are
//! stored, which keeps the wide tensor cuts of trace diagrams manageable.

use std::fmt;

use crate::error::{Error, Result};

/// Rows must sum to one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// A probability vector: a stochastic matrix with one row.
pub type FinState = StochasticMatrix;

/// Merges `(index, value)` pairs: sorts by index and sums duplicates.
pub(crate) fn merge_entries(entries: &mut Vec<(usize, f64)>) {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for &(i, v) in entries.iter() {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    *entries = out;
}

impl StochasticMatrix {
    /// Builds a matrix from dense rows, validating stochasticity.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut sparse = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    op: "from_rows",
                    left: cols,
                    right: row.len(),
                });
            }
            let mut entries = Vec::new();
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidEntry { row: r, col: c, value: v });
                }
                if v != 0.0 {
                    entries.push((c, v));
                }
            }
            sparse.push(entries);
        }
        Self::from_sparse_rows(cols, sparse)
    }

    /// Builds a matrix from sparse rows of `(column, value)` pairs.
    pub fn from_sparse_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidKernel(
                "stochastic matrices need at least one row and one column".into(),
            ));
        }
        let m = Self::from_sparse_unchecked(cols, rows);
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_sparse_unchecked(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let n = rows.len();
        for mut row in rows {
            merge_entries(&mut row);
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        StochasticMatrix {
            rows: n,
            cols,
            indptr,
            indices,
            values,
        }
    }

    /// A probability vector.
    pub fn state(probs: Vec<f64>) -> Result<FinState> {
        Self::from_rows(vec![probs])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_sparse_unchecked(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn dirac(card: usize, index: usize) -> Result<FinState> {
        if index >= card {
            return Err(Error::InvalidArgument(format!(
                "index {index} out of range for cardinality {card}"
            )));
        }
        Ok(Self::from_sparse_unchecked(card, vec![vec![(index, 1.0)]]))
    }

    pub fn uniform(card: usize) -> FinState {
        let w = 1.0 / card as f64;
        Self::from_sparse_unchecked(card, vec![(0..card).map(|i| (i, w)).collect()])
    }

    /// Every row equal to the same distribution.
    pub fn constant(dom: usize, dist: &FinState) -> Self {
        let row: Vec<(usize, f64)> = dist.row(0).collect();
        Self::from_sparse_unchecked(dist.cols, vec![row; dom])
    }

    pub fn validate(&self) -> Result<()> {
        for r in 0..self.rows {
            let mut sum = 0.0;
            for (c, v) in self.row(r) {
                if !v.is_finite() || v < 0.0 || c >= self.cols {
                    return Err(Error::InvalidEntry { row: r, col: c, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSumViolation {
                    row: r,
                    sum,
                    tol: ROW_SUM_TOL,
                });
            }
        }
        Ok(())
    }

    pub fn dom_card(&self) -> usize {
        self.rows
    }

    pub fn cod_card(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| {
                let mut out = vec![0.0; self.cols];
                for (c, v) in self.row(r) {
                    out[c] = v;
                }
                out
            })
            .collect()
    }

    /// The entries of a one-row matrix.
    pub fn probs(&self) -> Vec<f64> {
        self.to_dense().swap_remove(0)
    }

    pub fn row_sum_residual(&self) -> f64 {
        (0..self.rows)
            .map(|r| (self.row(r).map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Chapman-Kolmogorov: `(f ; g)(x, z) = Σ_y f(x, y) g(y, z)`.
    pub fn compose(&self, g: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.cols != g.rows {
            return Err(Error::DimensionMismatch {
                op: "compose",
                left: self.cols,
                right: g.rows,
            });
        }
        let mut acc = vec![0.0; g.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            for (y, fy) in self.row(r) {
                for (z, gz) in g.row(y) {
                    if acc[z] == 0.0 {
                        touched.push(z);
                    }
                    acc[z] += fy * gz;
                }
            }
            touched.sort_unstable();
            touched.dedup();
            let row: Vec<(usize, f64)> = touched
                .iter()
                .map(|&z| (z, std::mem::take(&mut acc[z])))
                .filter(|e| e.1 != 0.0)
                .collect();
            touched.clear();
            rows.push(row);
        }
        Ok(Self::from_sparse_unchecked(g.cols, rows))
    }

    /// `(f ⊗ g)((x, x'), (y, y')) = f(x, y) g(x', y')`, row-major pairing.
    pub fn tensor(&self, g: &StochasticMatrix) -> Result<StochasticMatrix> {
        let rows_n = self.rows.checked_mul(g.rows).ok_or(Error::ObjectTooLarge)?;
        let cols = self.cols.checked_mul(g.cols).ok_or(Error::ObjectTooLarge)?;
        let mut rows = Vec::with_capacity(rows_n);
        for x in 0..self.rows {
            for x2 in 0..g.rows {
                let mut row = Vec::new();
                for (y, a) in self.row(x) {
                    for (y2, b) in g.row(x2) {
                        row.push((y * g.cols + y2, a * b));
                    }
                }
                rows.push(row);
            }
        }
        Ok(Self::from_sparse_unchecked(cols, rows))
    }

    /// `Δ(x) = (x, x)`.
    pub fn copy(card: usize) -> Result<Self> {
        let cols = card.checked_mul(card).ok_or(Error::ObjectTooLarge)?;
        Ok(Self::from_sparse_unchecked(
            cols,
            (0..card).map(|x| vec![(x * card + x, 1.0)]).collect(),
        ))
    }

    /// The all-ones column: the unique kernel to the one-point set.
    pub fn delete(card: usize) -> Self {
        Self::from_sparse_unchecked(1, vec![vec![(0, 1.0)]; card])
    }

    /// `(x, y) ↦ (y, x)` on `A ⊗ B`.
    pub fn swap(a: usize, b: usize) -> Result<Self> {
        let n = a.checked_mul(b).ok_or(Error::ObjectTooLarge)?;
        let mut rows = Vec::with_capacity(n);
        for x in 0..a {
            for y in 0..b {
                rows.push(vec![(y * a + x, 1.0)]);
            }
        }
        Ok(Self::from_sparse_unchecked(n, rows))
    }

    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op: "compare",
                left: self.rows * self.cols,
                right: other.rows * other.cols,
            });
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            let mut entries: Vec<(usize, f64)> = self.row(r).collect();
            entries.extend(other.row(r).map(|(c, v)| (c, -v)));
            entries.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < entries.len() {
                let mut d = entries[i].1;
                if i + 1 < entries.len() && entries[i + 1].0 == entries[i].0 {
                    d += entries[i + 1].1;
                    i += 1;
                }
                worst = worst.max(d.abs());
                i += 1;
            }
        }
        Ok(worst)
    }
}

impl fmt::Debug for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rows * self.cols <= 256 {
            f.debug_struct("StochasticMatrix")
                .field("rows", &self.to_dense())
                .finish()
        } else {
            f.debug_struct("StochasticMatrix")
                .field("dom", &self.rows)
                .field("cod", &self.cols)
                .field("nnz", &self.nnz())
                .finish()
        }
    }
}
