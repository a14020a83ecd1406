//! Compressed sparse row matrices and the products the diffusion series needs.
//!
//! Column indices inside each row are kept strictly ascending. Every product
//! accumulates a row in that fixed order, so results are bit-identical no
//! matter how many worker threads rayon uses.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per rayon task for row-parallel kernels. Fixed so that chunking never
/// depends on the thread count.
pub(crate) const ROW_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from raw parts, checking the layout invariants.
    pub fn from_parts(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != n_rows + 1 || indptr[0] != 0 {
            return Err(Error::Shape(format!(
                "indptr has length {} for {n_rows} rows",
                indptr.len()
            )));
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != indices.len() {
            return Err(Error::Shape("indices/values/indptr disagree on nnz".into()));
        }
        for r in 0..n_rows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::Shape(format!("indptr decreases at row {r}")));
            }
            let row = &indices[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Shape(format!("row {r} columns not strictly ascending")));
            }
            if row.last().is_some_and(|&c| c >= n_cols) {
                return Err(Error::Shape(format!("row {r} has a column >= {n_cols}")));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from unordered triplets; duplicate coordinates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at `(i, j)`, or `None` when the position is outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// Like [`get`](Self::get) but returns 0 off-pattern.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// Same pattern, values mapped elementwise.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.values[k] = f(r, self.indices[k], self.values[k]);
            }
        }
        out
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    /// True when every stored position of `self` is also stored in `other`.
    pub fn pattern_subset_of(&self, other: &CsrMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.iter().all(|(r, c, _)| other.get(r, c).is_some())
    }

    /// `self + alpha * other` over the union of both patterns.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::Shape(format!(
                "cannot add {}x{} and {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut indptr = Vec::with_capacity(self.n_rows + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(indices.capacity());
        for r in 0..self.n_rows {
            let (ac, av) = self.row(r);
            let (bc, bv) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ac.len() || j < bc.len() {
                let take_a = j >= bc.len() || (i < ac.len() && ac[i] < bc[j]);
                let take_b = i >= ac.len() || (j < bc.len() && bc[j] < ac[i]);
                if take_a {
                    indices.push(ac[i]);
                    values.push(av[i]);
                    i += 1;
                } else if take_b {
                    indices.push(bc[j]);
                    values.push(alpha * bv[j]);
                    j += 1;
                } else {
                    indices.push(ac[i]);
                    values.push(av[i] + alpha * bv[j]);
                    i += 1;
                    j += 1;
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] += v;
        }
        out
    }

    /// Largest `|a_ij - a_ji|` over the stored entries (off-pattern counts as 0).
    pub fn max_asymmetry(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(r, c, v)| (v - self.value(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Sparse-times-dense product `self · x`, parallel over output rows.
    pub fn mul_dense(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.n_cols {
            return Err(Error::Shape(format!(
                "sparse {}x{} times dense {}x{}",
                self.n_rows,
                self.n_cols,
                x.nrows(),
                x.ncols()
            )));
        }
        let d = x.ncols();
        let xs = x.as_standard_layout();
        let xs = xs.as_slice().expect("standard layout");
        let mut out = vec![0.0f64; self.n_rows * d];
        if d == 0 {
            return Ok(Array2::zeros((self.n_rows, 0)));
        }
        out.par_chunks_mut(ROW_CHUNK * d)
            .enumerate()
            .for_each(|(chunk, block)| {
                let first = chunk * ROW_CHUNK;
                for (local, orow) in block.chunks_mut(d).enumerate() {
                    let (cols, vals) = self.row(first + local);
                    for (&c, &v) in cols.iter().zip(vals) {
                        let xrow = &xs[c * d..(c + 1) * d];
                        for (o, &xv) in orow.iter_mut().zip(xrow) {
                            *o += v * xv;
                        }
                    }
                }
            });
        Ok(Array2::from_shape_vec((self.n_rows, d), out).expect("shape"))
    }

    /// Writes `row,col,value` lines for every stored entry.
    pub fn write_triplets_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,value")?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r},{c},{v:e}")?;
        }
        Ok(())
    }
}

/// Dense product with a fixed row chunking, parallel across chunks.
pub(crate) fn dense_mul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "dense product shape mismatch");
    let (n, m) = (a.nrows(), b.ncols());
    if n <= ROW_CHUNK {
        return a.dot(&b);
    }
    let chunks: Vec<Array2<f64>> = (0..n.div_ceil(ROW_CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * ROW_CHUNK;
            let hi = (lo + ROW_CHUNK).min(n);
            a.slice(ndarray::s![lo..hi, ..]).dot(&b)
        })
        .collect();
    let mut out = Array2::zeros((n, m));
    for (c, block) in chunks.into_iter().enumerate() {
        let lo = c * ROW_CHUNK;
        out.slice_mut(ndarray::s![lo..lo + block.nrows(), ..]).assign(&block);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_merge_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (0, 0, 1.0)]);
        assert_eq!(m.indices(), &[0, 1, 2]);
        assert_eq!(m.values(), &[1.0, 2.0, 1.5]);
        assert_eq!(m.indptr(), &[0, 2, 3]);
    }

    #[test]
    fn from_parts_rejects_unsorted_row() {
        let err = CsrMatrix::from_parts(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn add_scaled_unions_patterns() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 1, 2.0)]);
        let c = a.add_scaled(-0.5, &b).unwrap();
        assert_eq!(c.to_dense(), array![[1.0, -0.5], [0.0, 0.0]]);
        assert_eq!(c.nnz(), 3);
    }

    #[test]
    fn add_scaled_with_zero_alpha_is_exact() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 0.1), (0, 1, 0.7), (1, 1, 1.0 / 3.0)]);
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 0.3)]);
        let c = a.add_scaled(0.0, &b).unwrap();
        assert_eq!(c, a);
    }

    #[test]
    fn mul_dense_matches_dense_product() {
        let trip: Vec<_> = (0..150)
            .flat_map(|i| [(i, i, 2.0), (i, (i * 7 + 3) % 150, 0.25)])
            .collect();
        let m = CsrMatrix::from_triplets(150, 150, trip);
        let x = Array2::from_shape_fn((150, 3), |(i, j)| (i as f64) * 0.01 - j as f64);
        let got = m.mul_dense(x.view()).unwrap();
        let want = m.to_dense().dot(&x);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_mul_matches_ndarray_dot() {
        let a = Array2::from_shape_fn((200, 30), |(i, j)| ((i * 31 + j * 7) % 13) as f64 - 6.0);
        let b = Array2::from_shape_fn((30, 5), |(i, j)| ((i + 2 * j) % 5) as f64 * 0.5);
        assert_eq!(dense_mul(a.view(), b.view()), a.dot(&b));
    }

    #[test]
    fn triplet_csv_has_header_and_rows() {
        let m = CsrMatrix::identity(2);
        let mut buf = Vec::new();
        m.write_triplets_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("row,col,value\n0,0,1e0"));
    }
}
