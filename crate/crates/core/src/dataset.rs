//! Labeled feature matrices.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Row-stochastic tolerance for attached true-probability matrices.
pub const TRUE_PROB_TOLERANCE: f64 = 1e-10;

/// Features `x` (n x p), labels in `1..=k`, and optionally the true class
/// probabilities (n x k) for synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: Array2<f64>,
    y: Vec<usize>,
    k: usize,
    true_probs: Option<Array2<f64>>,
    label_names: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::DataValidation(format!("need at least 2 classes, got {k}")));
        }
        if x.nrows() != y.len() {
            return Err(Error::DataValidation(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if let Some((i, &bad)) = y.iter().enumerate().find(|(_, &l)| l == 0 || l > k) {
            return Err(Error::DataValidation(format!(
                "label {bad} at row {i} outside 1..={k}"
            )));
        }
        Ok(LabeledDataset {
            x,
            y,
            k,
            true_probs: None,
            label_names: None,
        })
    }

    /// Attaches the true class-probability matrix.
    pub fn with_true_probs(mut self, probs: Array2<f64>) -> Result<Self> {
        if probs.dim() != (self.n(), self.k) {
            return Err(Error::DataValidation(format!(
                "true probabilities have shape {:?}, expected ({}, {})",
                probs.dim(),
                self.n(),
                self.k
            )));
        }
        for (i, row) in probs.axis_iter(Axis(0)).enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > TRUE_PROB_TOLERANCE || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::DataValidation(format!(
                    "true probability row {i} is not a distribution (sum {s})"
                )));
            }
        }
        self.true_probs = Some(probs);
        Ok(self)
    }

    /// Attaches the original label strings; entry `j - 1` names class `j`.
    pub fn with_label_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.k {
            return Err(Error::DataValidation(format!(
                "{} label names for {} classes",
                names.len(),
                self.k
            )));
        }
        self.label_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn true_probs(&self) -> Option<ArrayView2<'_, f64>> {
        self.true_probs.as_ref().map(|p| p.view())
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    /// Name of class `label`, falling back to its number.
    pub fn label_name(&self, label: usize) -> String {
        match &self.label_names {
            Some(names) => names[label - 1].clone(),
            None => label.to_string(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.y {
            counts[l - 1] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order; keeps k, names and true probabilities.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select(Axis(0), indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            k: self.k,
            true_probs: self.true_probs.as_ref().map(|p| p.select(Axis(0), indices)),
            label_names: self.label_names.clone(),
        }
    }

    /// Same labels with a replacement feature matrix (used for stage-two data).
    pub fn with_features(&self, x: Array2<f64>) -> Result<LabeledDataset> {
        if x.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.nrows(),
            });
        }
        Ok(LabeledDataset {
            x,
            y: self.y.clone(),
            k: self.k,
            true_probs: self.true_probs.clone(),
            label_names: self.label_names.clone(),
        })
    }

    /// Fails on NaN or infinite features.
    pub fn check_finite(&self) -> Result<()> {
        for ((i, j), v) in self.x.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::DataValidation(format!(
                    "non-finite feature {v} at row {i}, column {j}"
                )));
            }
        }
        Ok(())
    }
}
