//! Evaluation metrics for labels and probability estimates.

use ndarray::{ArrayView2, Axis};

use crate::error::{Error, Result};

/// Probabilities are floored here before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Row sums of probability inputs to [`mad`] must be within this of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Fraction of disagreeing labels.
pub fn error_rate(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let wrong = predictions.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

fn check_stochastic(name: &str, probs: ArrayView2<'_, f64>) -> Result<()> {
    for (i, row) in probs.axis_iter(Axis(0)).enumerate() {
        let s = row.sum();
        if !((s - 1.0).abs() <= ROW_SUM_TOLERANCE) {
            return Err(Error::DataValidation(format!("{name} row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Mean absolute difference `(1/n) sum_i sum_j |P_j(x_i) - P_hat_j(x_i)|`.
///
/// The inner sum runs over classes without dividing by k, so the value lies
/// in `[0, 2]`.
pub fn mad(true_probs: ArrayView2<'_, f64>, est_probs: ArrayView2<'_, f64>) -> Result<f64> {
    if true_probs.dim() != est_probs.dim() {
        return Err(Error::DataValidation(format!(
            "probability matrices have shapes {:?} and {:?}",
            true_probs.dim(),
            est_probs.dim()
        )));
    }
    if true_probs.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    check_stochastic("true probability", true_probs)?;
    check_stochastic("estimated probability", est_probs)?;
    let total: f64 = (&true_probs - &est_probs).iter().map(|d| d.abs()).sum();
    Ok(total / true_probs.nrows() as f64)
}

fn true_class_probs<'a>(
    est_probs: ArrayView2<'a, f64>,
    truth: &'a [usize],
) -> Result<impl Iterator<Item = f64> + 'a> {
    if est_probs.nrows() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: est_probs.nrows(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = truth.iter().find(|&&l| l == 0 || l > est_probs.ncols()) {
        return Err(Error::DataValidation(format!(
            "label {bad} outside 1..={}",
            est_probs.ncols()
        )));
    }
    Ok(truth
        .iter()
        .enumerate()
        .map(move |(i, &l)| est_probs[[i, l - 1]].max(PROB_FLOOR)))
}

/// Cross entropy error `-(1/n) sum_i p_hat_{y_i} log p_hat_{y_i}`.
///
/// This is the `-p log p` form evaluated at the estimated probability of
/// the observed class; it never exceeds `1/e`.
pub fn cre(est_probs: ArrayView2<'_, f64>, truth: &[usize]) -> Result<f64> {
    let n = truth.len() as f64;
    Ok(-true_class_probs(est_probs, truth)?.map(|p| p * p.ln()).sum::<f64>() / n)
}

/// Negative log-likelihood `-(1/n) sum_i log p_hat_{y_i}`.
pub fn nll(est_probs: ArrayView2<'_, f64>, truth: &[usize]) -> Result<f64> {
    let n = truth.len() as f64;
    Ok(-true_class_probs(est_probs, truth)?.map(f64::ln).sum::<f64>() / n)
}
