//! Minimal dense and sparse-binary matrix types used by the pipeline.
//!
//! The dense type is a flat row-major buffer with exactly the operations the
//! training and clustering code needs; the sparse type stores sorted column
//! indices per row, which fits binary adjacency/attribute data where rows are
//! short relative to the full dimension.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix over a [`Scalar`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "buffer of {} entries cannot be a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    ncols
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(DenseMatrix {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: S) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// `self * other`, naive row-major product with the k-loop hoisted so the
    /// inner loop streams both operands.
    pub fn matmul(&self, other: &DenseMatrix<S>) -> DenseMatrix<S> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == S::zero() {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b_kj) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a_ik * b_kj;
                }
            }
        }
        out
    }

    /// `selfᵀ * other`; `self` is b×m, `other` is b×n, result m×n.
    pub fn transpose_matmul(&self, other: &DenseMatrix<S>) -> DenseMatrix<S> {
        assert_eq!(self.rows, other.rows, "transpose_matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for b in 0..self.rows {
            let a_row = self.row(b);
            let b_row = other.row(b);
            for (m, &a_bm) in a_row.iter().enumerate() {
                if a_bm == S::zero() {
                    continue;
                }
                let out_row = out.row_mut(m);
                for (o, &b_bn) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a_bm * b_bn;
                }
            }
        }
        out
    }

    /// `self * otherᵀ`; `self` is m×k, `other` is n×k, result m×n.
    pub fn matmul_transpose(&self, other: &DenseMatrix<S>) -> DenseMatrix<S> {
        assert_eq!(self.cols, other.cols, "matmul_transpose shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                let b_row = other.row(j);
                let mut acc = S::zero();
                for (&a, &b) in a_row.iter().zip(b_row.iter()) {
                    acc += a * b;
                }
                *o = acc;
            }
        }
        out
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &DenseMatrix<S>, factor: S) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += factor * b;
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> DenseMatrix<S> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn frobenius_sq(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &x| acc + x * x)
    }

    pub fn column_sums(&self) -> Vec<S> {
        let mut sums = vec![S::zero(); self.cols];
        for i in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(i).iter()) {
                *s += v;
            }
        }
        sums
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Widen to f64, used by exports and f64-based reductions.
    pub fn to_f64(&self) -> DenseMatrix<f64> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x.into_f64()).collect(),
        }
    }
}

/// Sparse binary matrix: per-row sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: Vec<Vec<u32>>,
    cols: usize,
}

impl SparseBinaryMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseBinaryMatrix {
            rows: vec![Vec::new(); rows],
            cols,
        }
    }

    pub fn from_pairs(rows: usize, cols: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut m = SparseBinaryMatrix::new(rows, cols);
        for &(i, j) in pairs {
            if i >= rows || j >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i},{j}) outside {rows}x{cols} matrix"
                )));
            }
            m.insert(i, j);
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Sets entry (i, j) to 1. Returns true when the entry was previously 0.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        let j = j as u32;
        match self.rows[i].binary_search(&j) {
            Ok(_) => false,
            Err(pos) => {
                self.rows[i].insert(pos, j);
                true
            }
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&(j as u32)).is_ok()
    }

    /// Sorted column indices of the 1-entries in row i.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cols];
        for row in &self.rows {
            for &j in row {
                counts[j as usize] += 1;
            }
        }
        counts
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j as usize)))
    }

    /// Materializes the given rows as a dense b×cols matrix of 0/1 scalars.
    pub fn dense_rows<S: Scalar>(&self, indices: &[usize]) -> DenseMatrix<S> {
        let mut out = DenseMatrix::zeros(indices.len(), self.cols);
        for (b, &i) in indices.iter().enumerate() {
            let row = out.row_mut(b);
            for &j in &self.rows[i] {
                row[j as usize] = S::one();
            }
        }
        out
    }
}

/// Number of common elements between two sorted index slices.
pub fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let mut count = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
