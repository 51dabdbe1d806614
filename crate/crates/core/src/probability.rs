//! Class probabilities from angle-based scores.
//!
//! For scores `u_j = <W_j, f>` the estimate is
//! `P_j = l'(u_j)^-1 / sum_i l'(u_i)^-1`. Each term is negative, so we
//! normalize the positive weights `w_j = -1 / l'(u_j)` instead, working
//! with `ln w_j` to keep large margins finite.

use std::ops::Index;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::loss::MarginLoss;

/// Scores are clamped to this magnitude before weighting.
pub const SCORE_CLAMP: f64 = 1e8;

/// A probability distribution over the k classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Array1<f64>);

impl ProbabilityVector {
    /// Wraps values that already form a distribution.
    pub(crate) fn from_normalized(values: Array1<f64>) -> Self {
        ProbabilityVector(values)
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("contiguous")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }
}

impl Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// Largest double below 1.
const PROB_CEILING: f64 = 1.0 - f64::EPSILON / 2.0;

fn normalize_into<L: MarginLoss + ?Sized>(
    scores: ArrayView1<'_, f64>,
    loss: &L,
    out: &mut [f64],
) -> Result<()> {
    let mut max = f64::NEG_INFINITY;
    for (o, &u) in out.iter_mut().zip(scores.iter()) {
        if !u.is_finite() {
            return Err(Error::DegenerateDerivative(format!("non-finite score {u}")));
        }
        let lw = loss.log_weight(u.clamp(-SCORE_CLAMP, SCORE_CLAMP));
        if !lw.is_finite() {
            return Err(Error::DegenerateDerivative(format!(
                "{} derivative vanishes or diverges at score {u}",
                loss.name()
            )));
        }
        *o = lw;
        max = max.max(lw);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    // keep every entry strictly inside (0, 1) once the ratios leave double range
    for o in out.iter_mut() {
        *o = (*o / total).clamp(f64::MIN_POSITIVE, PROB_CEILING);
    }
    Ok(())
}

/// Probability vector for one score vector `(u_1, ..., u_k)`.
pub fn class_probabilities<L: MarginLoss + ?Sized>(
    scores: ArrayView1<'_, f64>,
    loss: &L,
) -> Result<ProbabilityVector> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    let mut out = vec![0.0; scores.len()];
    normalize_into(scores, loss, &mut out)?;
    Ok(ProbabilityVector(Array1::from(out)))
}

/// Row-wise probabilities for an `n x k` score matrix.
pub fn class_probabilities_batch<L: MarginLoss + ?Sized>(
    scores: ArrayView2<'_, f64>,
    loss: &L,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(scores.raw_dim());
    for (row, mut dst) in scores.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        normalize_into(row, loss, dst.as_slice_mut().expect("row-major output"))?;
    }
    Ok(out)
}

/// Binary estimate of `P(+1 | x)` from a scalar decision value:
/// `l'(-f) / (l'(-f) + l'(f))`.
pub fn binary_probability<L: MarginLoss + ?Sized>(f: f64, loss: &L) -> Result<f64> {
    if !f.is_finite() {
        return Err(Error::DegenerateDerivative(format!("non-finite decision value {f}")));
    }
    let minus = loss.derivative(-f);
    let plus = loss.derivative(f);
    let denom = minus + plus;
    if !(minus < 0.0 && plus <= 0.0 && denom < 0.0) {
        return Err(Error::DegenerateDerivative(format!(
            "{} derivative not negative at +/-{f}",
            loss.name()
        )));
    }
    Ok((minus / denom).clamp(f64::MIN_POSITIVE, PROB_CEILING))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{Logistic, Loss, SoftLum};
    use ndarray::array;

    fn sigmoid(f: f64) -> f64 {
        1.0 / (1.0 + (-f).exp())
    }

    #[test]
    fn zero_scores_give_uniform() {
        for loss in Loss::ALL {
            for k in 2..8 {
                let p = class_probabilities(Array1::zeros(k).view(), &loss).unwrap();
                assert!(p.values().iter().all(|&v| (v - 1.0 / k as f64).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn logistic_binary_is_sigmoid() {
        let p = class_probabilities(array![1.0, -1.0].view(), &Logistic).unwrap();
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((p[0] - sigmoid(1.0)).abs() < 1e-15);
    }

    #[test]
    fn soft_lum_three_class_by_hand() {
        // weights (1+1)^2, 1, 1
        let p = class_probabilities(array![1.0, -0.5, -0.5].view(), &SoftLum).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((p[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn binary_probability_cases() {
        for loss in Loss::ALL {
            assert_eq!(binary_probability(0.0, &loss).unwrap(), 0.5);
            assert!(binary_probability(f64::NAN, &loss).is_err());
        }
        for f in [-30.0, -3.0, -0.2, 0.7, 5.0, 40.0] {
            assert!((binary_probability(f, &Logistic).unwrap() - sigmoid(f)).abs() < 1e-12);
        }
    }

    #[test]
    fn large_scores_stay_finite() {
        let p = class_probabilities(array![900.0, -450.0, -450.0].view(), &Logistic).unwrap();
        assert!(p.values().iter().all(|v| v.is_finite()));
        assert!((p.values().sum() - 1.0).abs() < 1e-12);
        let p = class_probabilities(array![1e300, -1e300].view(), &SoftLum).unwrap();
        assert!(p.values().iter().all(|v| v.is_finite()));
        let p = class_probabilities(array![80.0, -40.0, -40.0].view(), &Logistic).unwrap();
        assert!(p.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn non_finite_scores_are_degenerate() {
        assert!(matches!(
            class_probabilities(array![f64::NAN, 0.0].view(), &Logistic),
            Err(Error::DegenerateDerivative(_))
        ));
    }

    struct Flat;
    impl MarginLoss for Flat {
        fn value(&self, _u: f64) -> f64 {
            0.0
        }
        fn derivative(&self, _u: f64) -> f64 {
            0.0
        }
        fn curvature_bound(&self) -> f64 {
            0.0
        }
        fn name(&self) -> &'static str {
            "flat"
        }
    }

    #[test]
    fn vanishing_derivative_is_rejected() {
        assert!(matches!(
            class_probabilities(array![0.0, 0.0].view(), &Flat),
            Err(Error::DegenerateDerivative(_))
        ));
        assert!(binary_probability(0.3, &Flat).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let scores = array![[0.3, -0.1, -0.2], [2.0, -1.0, -1.0], [0.0, 0.0, 0.0]];
        for loss in Loss::ALL {
            let batch = class_probabilities_batch(scores.view(), &loss).unwrap();
            for (i, row) in scores.axis_iter(Axis(0)).enumerate() {
                let single = class_probabilities(row, &loss).unwrap();
                assert_eq!(batch.row(i), single.values());
            }
        }
    }

    #[test]
    fn shrinkage_toward_uniform_is_lipschitz() {
        // brute-force the largest |P_j - 1/k| / max|u| over a small ball
        use rand::Rng;
        let mut rng = crate::rng::seeded(3);
        let k = 3;
        let mut lipschitz: f64 = 0.0;
        for _ in 0..20_000 {
            let u: Array1<f64> = Array1::from_shape_fn(k, |_| rng.random_range(-0.1..0.1));
            let p = class_probabilities(u.view(), &Logistic).unwrap();
            let m = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let dev = p.values().iter().fold(0.0_f64, |a, v| a.max((v - 1.0 / k as f64).abs()));
            lipschitz = lipschitz.max(dev / m);
        }
        // margin for points the scan missed
        let bound = lipschitz * 1.05;
        for _ in 0..5_000 {
            let scale: f64 = rng.random_range(1e-6..0.1);
            let u: Array1<f64> = Array1::from_shape_fn(k, |_| rng.random_range(-scale..scale));
            let p = class_probabilities(u.view(), &Logistic).unwrap();
            let m = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            for v in p.values() {
                assert!((v - 1.0 / 3.0).abs() <= bound * m + 1e-15);
            }
        }
    }
}
