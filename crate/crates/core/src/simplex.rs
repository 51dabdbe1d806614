//! Simplex code for angle-based classification.
//!
//! Class `j` (1-based) is represented by the vertex `W_j` of a centered
//! regular simplex in R^(k-1). A decision vector `f` scores class `j` by the
//! inner product `<W_j, f>`, and the predicted class is the one with the
//! smallest angle, i.e. the largest inner product.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{invalid, Error, Result};

/// Scores must sum to zero within this tolerance to be reconstructed.
pub const RECONSTRUCT_TOLERANCE: f64 = 1e-8;

/// The k vertices `W_1..W_k` of the symmetric simplex in R^(k-1).
///
/// Row `j - 1` of [`SimplexCode::vertices`] holds `W_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCode {
    k: usize,
    vertices: Array2<f64>,
}

impl SimplexCode {
    /// Builds the simplex for `k >= 2` classes.
    ///
    /// `W_1 = (k-1)^(-1/2) 1` and, for `2 <= j <= k`,
    /// `W_j = -(1 + sqrt(k)) / (k-1)^(3/2) 1 + sqrt(k/(k-1)) e_(j-1)`.
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("simplex needs k >= 2 classes, got {k}")));
        }
        let km1 = (k - 1) as f64;
        let kf = k as f64;
        let first = km1.powf(-0.5);
        let offset = -(1.0 + kf.sqrt()) / km1.powf(1.5);
        let spike = (kf / km1).sqrt();

        let mut vertices = Array2::<f64>::zeros((k, k - 1));
        vertices.row_mut(0).fill(first);
        for j in 1..k {
            let mut row = vertices.row_mut(j);
            row.fill(offset);
            row[j - 1] += spike;
        }
        Ok(SimplexCode { k, vertices })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension of the decision space, `k - 1`.
    pub fn dim(&self) -> usize {
        self.k - 1
    }

    /// All vertices as a `k x (k-1)` matrix.
    pub fn vertices(&self) -> ArrayView2<'_, f64> {
        self.vertices.view()
    }

    /// Vertex of a 1-based class label.
    pub fn vertex(&self, label: usize) -> ArrayView1<'_, f64> {
        assert!(
            (1..=self.k).contains(&label),
            "label {label} outside 1..={}",
            self.k
        );
        self.vertices.row(label - 1)
    }

    /// Per-class scores `u_j = <W_j, f>`; they always sum to zero.
    pub fn scores(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.len(),
            });
        }
        Ok(self.vertices.dot(&f))
    }

    /// Row-wise scores for an `n x (k-1)` matrix of decision values.
    pub fn scores_batch(&self, f: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if f.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.ncols(),
            });
        }
        Ok(f.dot(&self.vertices.t()))
    }

    /// Inverse of [`SimplexCode::scores`]: `f = ((k-1)/k) sum_j u_j W_j`.
    ///
    /// Follows from `sum_j W_j W_j^T = k/(k-1) I`. The scores must sum to
    /// zero, otherwise they are not the image of any `f`.
    pub fn reconstruct(&self, scores: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if scores.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: scores.len(),
            });
        }
        let total: f64 = scores.sum();
        let scale = scores.iter().fold(1.0_f64, |m, s| m.max(s.abs()));
        if total.abs() > RECONSTRUCT_TOLERANCE * scale {
            return Err(invalid(format!(
                "scores must sum to zero to be reconstructed (sum = {total:e})"
            )));
        }
        let km1 = (self.k - 1) as f64;
        Ok(self.vertices.t().dot(&scores) * (km1 / self.k as f64))
    }

    /// Predicted 1-based label for a decision vector.
    pub fn predict(&self, f: ArrayView1<'_, f64>) -> Result<usize> {
        let scores = self.scores(f)?;
        predict_label(scores.as_slice().expect("contiguous scores"))
    }

    /// Predicted labels for an `n x k` score matrix.
    pub fn predict_scores_batch(scores: ArrayView2<'_, f64>) -> Vec<usize> {
        scores
            .axis_iter(Axis(0))
            .map(|row| argmax_first(row.iter().copied()))
            .collect()
    }
}

/// Index (1-based) of the largest score; ties go to the smallest index.
pub fn predict_label(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(invalid("cannot predict from an empty score vector"));
    }
    Ok(argmax_first(scores.iter().copied()))
}

fn argmax_first(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (i, s) in scores.enumerate() {
        // strict comparison keeps the earliest maximum
        if s > best || i == 0 {
            best = s;
            best_idx = i;
        }
    }
    best_idx + 1
}
