//! Gaussian-mixture benchmarks with known class probabilities.
//!
//! Each class draws its signal coordinates from an isotropic normal around
//! a class mean; the remaining noise coordinates are i.i.d. normal and
//! identical in distribution across classes, so they cancel in the true
//! conditional probabilities. Class priors are equal.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::probability::ProbabilityVector;
use crate::rng;

/// Example 1 signal standard deviation. The stated "variance sigma = 2" is
/// read as sd = 2, the reading whose Bayes error matches the reported 5.51%.
pub const EX1_SIGNAL_SD: f64 = 2.0;

/// Default split sizes for Example 2 (train, tune, test).
pub const EX2_DEFAULT_SIZES: (usize, usize, usize) = (300, 300, 10_000);

/// Split sizes for Example 1 (train, tune, test).
pub const EX1_DEFAULT_SIZES: (usize, usize, usize) = (300, 300, 29_400);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleId {
    Ex1,
    Ex2,
}

impl ExampleId {
    pub fn spec(self) -> ExampleSpec {
        match self {
            ExampleId::Ex1 => ExampleSpec::example1(),
            ExampleId::Ex2 => ExampleSpec::example2(),
        }
    }

    pub fn default_sizes(self) -> (usize, usize, usize) {
        match self {
            ExampleId::Ex1 => EX1_DEFAULT_SIZES,
            ExampleId::Ex2 => EX2_DEFAULT_SIZES,
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleId::Ex1 => "ex1",
            ExampleId::Ex2 => "ex2",
        })
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ex1" | "1" => Ok(ExampleId::Ex1),
            "ex2" | "2" => Ok(ExampleId::Ex2),
            other => Err(invalid(format!("unknown example '{other}' (expected ex1 or ex2)"))),
        }
    }
}

/// Generative parameters of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSpec {
    pub id: Option<ExampleId>,
    /// `k x signal_dim`; row `j - 1` is the mean of class `j`.
    pub class_means: Array2<f64>,
    pub signal_sd: f64,
    pub noise_dim: usize,
    pub noise_sd: f64,
}

impl ExampleSpec {
    pub fn new(class_means: Array2<f64>, signal_sd: f64, noise_dim: usize, noise_sd: f64) -> Result<Self> {
        if class_means.nrows() < 2 || class_means.ncols() == 0 {
            return Err(invalid("need at least two classes and one signal dimension"));
        }
        if class_means.iter().any(|m| !m.is_finite()) {
            return Err(invalid("class means must be finite"));
        }
        if !(signal_sd > 0.0 && signal_sd.is_finite()) || !(noise_sd > 0.0 && noise_sd.is_finite()) {
            return Err(invalid("standard deviations must be positive"));
        }
        Ok(ExampleSpec {
            id: None,
            class_means,
            signal_sd,
            noise_dim,
            noise_sd,
        })
    }

    /// Three classes, ten signal predictors with shifted blocks of 3s,
    /// 1490 noise predictors with variance 0.02.
    pub fn example1() -> Self {
        Self::example1_with_sd(EX1_SIGNAL_SD)
    }

    /// Example 1 with an explicit signal standard deviation.
    pub fn example1_with_sd(signal_sd: f64) -> Self {
        let mut means = Array2::zeros((3, 10));
        means.slice_mut(ndarray::s![0, 0..4]).fill(3.0);
        means.slice_mut(ndarray::s![1, 3..7]).fill(3.0);
        means.slice_mut(ndarray::s![2, 6..10]).fill(3.0);
        let mut spec = Self::new(means, signal_sd, 1490, 0.02f64.sqrt()).expect("valid example 1");
        spec.id = Some(ExampleId::Ex1);
        spec
    }

    /// Ten classes with means equally spaced on the circle of radius 3,
    /// identity covariance, 498 noise predictors with variance 0.01.
    pub fn example2() -> Self {
        let k = 10;
        let means = Array2::from_shape_fn((k, 2), |(j, d)| {
            let angle = 2.0 * PI * j as f64 / k as f64;
            3.0 * if d == 0 { angle.cos() } else { angle.sin() }
        });
        let mut spec = Self::new(means, 1.0, 498, 0.01f64.sqrt()).expect("valid example 2");
        spec.id = Some(ExampleId::Ex2);
        spec
    }

    pub fn k(&self) -> usize {
        self.class_means.nrows()
    }

    pub fn signal_dim(&self) -> usize {
        self.class_means.ncols()
    }

    pub fn p(&self) -> usize {
        self.signal_dim() + self.noise_dim
    }

    /// Samples `n` labeled rows with their true class probabilities attached.
    pub fn generate(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        let mut rng = rng::seeded(seed);
        let k = self.k();
        let mut x = Array2::zeros((n, self.p()));
        let mut y = Vec::with_capacity(n);
        for mut row in x.axis_iter_mut(Axis(0)) {
            let label = rng.random_range(1..=k);
            y.push(label);
            for (d, v) in row.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = if d < self.signal_dim() {
                    self.class_means[[label - 1, d]] + self.signal_sd * z
                } else {
                    self.noise_sd * z
                };
            }
        }
        let mut probs = Array2::zeros((n, k));
        for (i, mut dst) in probs.axis_iter_mut(Axis(0)).enumerate() {
            dst.assign(&self.signal_probabilities(x.row(i)));
        }
        LabeledDataset::new(x, y, k)?.with_true_probs(probs)
    }

    /// `P(Y = j | x)` for a full feature vector.
    pub fn true_probabilities(&self, x: ArrayView1<'_, f64>) -> Result<ProbabilityVector> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x.len(),
            });
        }
        Ok(ProbabilityVector::from_normalized(self.signal_probabilities(x)))
    }

    /// Posterior from the signal coordinates, via log-sum-exp.
    fn signal_probabilities(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let signal = x.slice(ndarray::s![..self.signal_dim()]);
        let denom = 2.0 * self.signal_sd * self.signal_sd;
        let log_dens: Array1<f64> = self
            .class_means
            .axis_iter(Axis(0))
            .map(|mu| -(&signal - &mu).mapv(|d| d * d).sum() / denom)
            .collect();
        let max = log_dens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = log_dens.mapv(|l| (l - max).exp());
        let total = w.sum();
        w / total
    }

    /// Monte-Carlo error of the Bayes rule `argmax_j P_j(x)`.
    ///
    /// Each draw contributes the rule's conditional error `1 - P_pred(x)`
    /// rather than a 0/1 indicator; the expectation is the same and the
    /// variance far smaller. Only signal coordinates are sampled since the
    /// noise coordinates do not enter the posterior.
    pub fn bayes_error(&self, n_mc: usize, seed: u64) -> Result<BayesEstimate> {
        if n_mc == 0 {
            return Err(invalid("need at least one Monte-Carlo draw"));
        }
        let mut rng = rng::seeded(seed);
        let k = self.k();
        let mut point = Array1::zeros(self.p());
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n_mc {
            let label = rng.random_range(1..=k);
            for d in 0..self.signal_dim() {
                let z: f64 = StandardNormal.sample(&mut rng);
                point[d] = self.class_means[[label - 1, d]] + self.signal_sd * z;
            }
            let probs = self.signal_probabilities(point.view());
            let predicted = crate::simplex::predict_label(probs.as_slice().expect("contiguous"))?;
            let miss = 1.0 - probs[predicted - 1];
            sum += miss;
            sum_sq += miss * miss;
        }
        let n = n_mc as f64;
        let error = sum / n;
        let var = if n_mc > 1 {
            ((sum_sq - n * error * error) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Ok(BayesEstimate {
            error,
            std_error: (var / n).sqrt(),
            n_mc,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesEstimate {
    pub error: f64,
    pub std_error: f64,
    pub n_mc: usize,
}

pub fn gen_example1(n: usize, seed: u64) -> Result<LabeledDataset> {
    ExampleSpec::example1().generate(n, seed)
}

pub fn gen_example2(n: usize, seed: u64) -> Result<LabeledDataset> {
    ExampleSpec::example2().generate(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Direct density ratio, no log-space tricks.
    fn oracle_probs(spec: &ExampleSpec, x: ArrayView1<f64>) -> Vec<f64> {
        let sd = spec.signal_sd;
        let dens: Vec<f64> = spec
            .class_means
            .axis_iter(Axis(0))
            .map(|mu| {
                let mut d = 1.0;
                for (a, m) in x.iter().zip(mu.iter()) {
                    d *= (-(a - m) * (a - m) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt());
                }
                d
            })
            .collect();
        let total: f64 = dens.iter().sum();
        dens.iter().map(|d| d / total).collect()
    }

    #[test]
    fn example_shapes() {
        let d = gen_example1(50, 1).unwrap();
        assert_eq!((d.n(), d.p(), d.k()), (50, 1500, 3));
        let d = gen_example2(40, 1).unwrap();
        assert_eq!((d.n(), d.p(), d.k()), (40, 500, 10));
        assert!(gen_example1(0, 1).is_err());
        assert_eq!(ExampleId::Ex1.default_sizes(), (300, 300, 29_400));
        assert_eq!(ExampleId::Ex2.default_sizes(), (300, 300, 10_000));
    }

    #[test]
    fn example2_means_on_circle() {
        let s = ExampleSpec::example2();
        assert!((s.class_means[[0, 0]] - 3.0).abs() < 1e-15);
        assert!(s.class_means[[0, 1]].abs() < 1e-15);
        let chord = (&s.class_means.row(1) - &s.class_means.row(0)).mapv(|v| v * v).sum().sqrt();
        assert!((chord - 6.0 * (PI / 10.0).sin()).abs() < 1e-12);
        assert!((chord - 1.854).abs() < 1e-3);
    }

    #[test]
    fn generation_is_reproducible() {
        assert_eq!(gen_example2(30, 5).unwrap(), gen_example2(30, 5).unwrap());
        assert_ne!(gen_example2(30, 5).unwrap(), gen_example2(30, 6).unwrap());
    }

    #[test]
    fn class_proportions_are_uniform() {
        let spec = ExampleSpec::new(array![[0.0], [1.0], [2.0]], 1.0, 2, 0.1).unwrap();
        let d = spec.generate(30_000, 3).unwrap();
        let counts = d.class_counts();
        let expected = 10_000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with 2 degrees of freedom
        assert!(chi2 < 13.82, "chi2 = {chi2}");
    }

    #[test]
    fn signal_mean_matches_spec() {
        let d = gen_example1(3000, 9).unwrap();
        let rows: Vec<usize> = (0..d.n()).filter(|&i| d.labels()[i] == 1).collect();
        let m = rows.iter().map(|&i| d.x()[[i, 0]]).sum::<f64>() / rows.len() as f64;
        assert!((m - 3.0).abs() < 3.0 * EX1_SIGNAL_SD / (rows.len() as f64).sqrt(), "{m}");
        let noise: Vec<f64> = (0..d.n()).map(|i| d.x()[[i, 100]]).collect();
        let var = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
        assert!((var - 0.02).abs() < 0.003, "{var}");
    }

    #[test]
    fn true_probabilities_match_density_oracle() {
        let mut r = rng::seeded(17);
        for spec in [ExampleSpec::example1(), ExampleSpec::example2()] {
            for _ in 0..100 {
                let x: Array1<f64> = Array1::from_shape_fn(spec.p(), |d| {
                    if d < spec.signal_dim() {
                        r.random_range(-2.0..5.0)
                    } else {
                        r.random_range(-0.5..0.5)
                    }
                });
                let got = spec.true_probabilities(x.view()).unwrap();
                let want = oracle_probs(&spec, x.slice(ndarray::s![..spec.signal_dim()]));
                for (g, w) in got.values().iter().zip(&want) {
                    assert!((g - w).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn true_probabilities_edge_cases() {
        let spec = ExampleSpec::new(array![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]], 1.0, 1, 0.1).unwrap();
        let p = spec.true_probabilities(array![0.0, 0.0, 0.3].view()).unwrap();
        assert!(p[0] > 1.0 - 1e-12);
        let spec = ExampleSpec::example2();
        let mut origin = Array1::zeros(spec.p());
        let p = spec.true_probabilities(origin.view()).unwrap();
        assert!(p.values().iter().all(|v| (v - 0.1).abs() < 1e-12));
        origin[7] = 3.0;
        assert_eq!(spec.true_probabilities(origin.view()).unwrap(), p);
        assert!(spec.true_probabilities(array![0.0].view()).is_err());
    }

    #[test]
    fn generated_rows_carry_their_posteriors() {
        let spec = ExampleSpec::example2();
        let d = spec.generate(200, 4).unwrap();
        let probs = d.true_probs().unwrap();
        for i in 0..d.n() {
            let p = spec.true_probabilities(d.row(i)).unwrap();
            for j in 0..spec.k() {
                assert!((p[j] - probs[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_columns_are_exchangeable() {
        let spec = ExampleSpec::example1();
        let d = spec.generate(5, 2).unwrap();
        let mut x = d.row(0).to_owned();
        let base = spec.true_probabilities(x.view()).unwrap();
        x.slice_mut(ndarray::s![10..]).invert_axis(Axis(0));
        assert_eq!(spec.true_probabilities(x.view()).unwrap(), base);
    }

    #[test]
    fn identical_means_give_chance_error() {
        let spec = ExampleSpec::new(Array2::zeros((4, 2)), 1.0, 0, 1.0).unwrap();
        let est = spec.bayes_error(2_000, 1).unwrap();
        assert!((est.error - 0.75).abs() < 1e-12, "{est:?}");
    }

    #[test]
    fn bayes_error_agrees_with_counting_misclassifications() {
        // plain 0/1 Monte-Carlo on generated rows as the oracle
        let spec = ExampleSpec::example2();
        let n = 40_000;
        let d = spec.generate(n, 9).unwrap();
        let probs = d.true_probs().unwrap();
        let wrong = (0..n)
            .filter(|&i| {
                let row = probs.row(i);
                let best = (0..spec.k()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
                best + 1 != d.labels()[i]
            })
            .count();
        let counted = wrong as f64 / n as f64;
        let counted_se = (counted * (1.0 - counted) / n as f64).sqrt();
        let est = spec.bayes_error(40_000, 10).unwrap();
        assert!(est.std_error < counted_se);
        let tol = 4.0 * (counted_se.powi(2) + est.std_error.powi(2)).sqrt();
        assert!((est.error - counted).abs() < tol, "{est:?} vs {counted}");
    }
}
