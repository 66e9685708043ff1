//! Pairwise distance matrices and the exponential similarity transform used
//! by the embedding loss.

use crate::error::{Error, Result};
use crate::matrix::{sorted_intersection_len, DenseMatrix};
use crate::scalar::Scalar;

/// What a [`DistanceMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// Jaccard distances of binary rows, entries in [0,1], zero diagonal.
    Jaccard,
    /// Euclidean distances of real rows, entries ≥ 0, zero diagonal.
    Euclidean,
    /// exp(−λ·euclidean), entries in (0,1], unit diagonal.
    Transformed,
}

/// Symmetric pairwise matrix tagged with the metric that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<S> {
    pub values: DenseMatrix<S>,
    pub kind: DistanceKind,
}

impl<S: Scalar> DistanceMatrix<S> {
    pub fn size(&self) -> usize {
        self.values.rows()
    }
}

/// Jaccard distance between two sorted binary-support rows.
/// Two empty supports are identical (distance 0); empty vs. non-empty is 1.
pub fn jaccard_row_distance(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = sorted_intersection_len(a, b);
    let union = a.len() + b.len() - inter;
    1.0 - inter as f64 / union as f64
}

/// Pairwise Jaccard distances of binary rows given as sorted support lists.
pub fn pairwise_jaccard<S: Scalar>(rows: &[&[u32]]) -> DistanceMatrix<S> {
    let n = rows.len();
    let mut values = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = S::from_f64_lossy(jaccard_row_distance(rows[i], rows[j]));
            values.set(i, j, d);
            values.set(j, i, d);
        }
    }
    DistanceMatrix {
        values,
        kind: DistanceKind::Jaccard,
    }
}

/// Pairwise Euclidean distances between the rows of a real matrix.
pub fn pairwise_euclidean<S: Scalar>(points: &DenseMatrix<S>) -> Result<DistanceMatrix<S>> {
    if !points.is_finite() {
        return Err(Error::NonFinite("pairwise_euclidean input".into()));
    }
    let n = points.rows();
    let mut values = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let ri = points.row(i);
        for j in (i + 1)..n {
            let rj = points.row(j);
            let mut acc = S::zero();
            for (&a, &b) in ri.iter().zip(rj.iter()) {
                let diff = a - b;
                acc += diff * diff;
            }
            let d = acc.sqrt();
            values.set(i, j, d);
            values.set(j, i, d);
        }
    }
    Ok(DistanceMatrix {
        values,
        kind: DistanceKind::Euclidean,
    })
}

/// Entrywise exp(−λ·distance) over a Euclidean distance matrix; output lies
/// in (0,1] with a unit diagonal.
pub fn similarity_transform<S: Scalar>(
    dist: &DistanceMatrix<S>,
    lambda: f64,
) -> Result<DistanceMatrix<S>> {
    if dist.kind != DistanceKind::Euclidean {
        return Err(Error::InvalidParameter(
            "similarity_transform expects a euclidean distance matrix".into(),
        ));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter("lambda must be >= 0".into()));
    }
    let lam = S::from_f64_lossy(lambda);
    Ok(DistanceMatrix {
        values: dist.values.map(|d| (-lam * d).exp()),
        kind: DistanceKind::Transformed,
    })
}
