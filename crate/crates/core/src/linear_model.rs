//! Penalized linear angle-based classifier.
//!
//! The decision function is `f(x) = B^T x + b0` with `B` of shape
//! `p x (k-1)`, fitted by minimizing
//!
//! ```text
//! (1/n) sum_i l(<W_{y_i}, f(x_i)>) + lambda * J(B)
//! ```
//!
//! where `J` is the L1 norm, the squared L2 norm, or zero. Intercepts are
//! never penalized.

mod solver;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};

use crate::dataset::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::loss::{Loss, MarginLoss};
use crate::probability::{self, ProbabilityVector};
use crate::rng;
use crate::simplex::SimplexCode;

pub use solver::FitDiagnostics;

/// Coefficient penalty `J(B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Penalty {
    None,
    /// `sum_j ||beta_j||_1`, handled by soft-thresholding.
    L1,
    /// `sum_j ||beta_j||_2^2`, folded into the smooth part.
    L2,
}

impl Penalty {
    pub fn id(self) -> &'static str {
        match self {
            Penalty::None => "none",
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
        }
    }

    /// `J(B)`.
    pub fn value(self, coef: ArrayView2<'_, f64>) -> f64 {
        match self {
            Penalty::None => 0.0,
            Penalty::L1 => coef.iter().map(|v| v.abs()).sum(),
            Penalty::L2 => coef.iter().map(|v| v * v).sum(),
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Penalty::None),
            "l1" | "lasso" => Ok(Penalty::L1),
            "l2" | "ridge" => Ok(Penalty::L2),
            other => Err(invalid(format!("unknown penalty '{other}' (expected none, l1 or l2)"))),
        }
    }
}

/// Solver and problem settings for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub loss: Loss,
    pub penalty: Penalty,
    pub lambda: f64,
    pub max_iterations: usize,
    /// Stop once the relative objective change drops below this.
    pub tolerance: f64,
    /// Backtracking step multiplier, in (0, 1).
    pub line_search_shrink: f64,
    /// z-score features with training statistics before fitting.
    pub standardize: bool,
    /// Start from small random coefficients instead of zero.
    pub random_init: bool,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(loss: Loss, penalty: Penalty, lambda: f64) -> Self {
        FitConfig {
            loss,
            penalty,
            lambda,
            max_iterations: 2000,
            tolerance: 1e-6,
            line_search_shrink: 0.5,
            standardize: true,
            random_init: false,
            seed: 0,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        FitConfig {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid("tolerance must be >= 0"));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(invalid("line_search_shrink must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Penalty weight actually applied (`penalty = none` ignores lambda).
    fn effective_lambda(&self) -> f64 {
        match self.penalty {
            Penalty::None => 0.0,
            _ => self.lambda,
        }
    }
}

/// Coefficients `B` (p x (k-1)) and intercepts `b0` (k-1).
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub coef: Array2<f64>,
    pub intercept: Array1<f64>,
}

impl Params {
    pub fn zeros(p: usize, dim: usize) -> Self {
        Params {
            coef: Array2::zeros((p, dim)),
            intercept: Array1::zeros(dim),
        }
    }

    pub fn p(&self) -> usize {
        self.coef.nrows()
    }

    pub fn dim(&self) -> usize {
        self.intercept.len()
    }

    fn is_finite(&self) -> bool {
        self.coef.iter().chain(self.intercept.iter()).all(|v| v.is_finite())
    }
}

const CONSTANT_COLUMN_RTOL: f64 = 1e-12;

/// Per-feature affine map `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    pub fn identity(p: usize) -> Self {
        Standardizer {
            mean: Array1::zeros(p),
            scale: Array1::ones(p),
        }
    }

    /// z-score statistics of the columns of `x`. Constant columns keep
    /// scale 1 so they map to zero; a spread at rounding level relative to
    /// the mean counts as constant.
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let mut scale = Array1::zeros(x.ncols());
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let var = col.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let constant = sd <= CONSTANT_COLUMN_RTOL * mean[j].abs();
            scale[j] = if sd > 0.0 && sd.is_finite() && !constant { sd } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub fn from_parts(mean: Array1<f64>, scale: Array1<f64>) -> Result<Self> {
        if mean.len() != scale.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: scale.len(),
            });
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("standardization must have finite means and positive scales"));
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn scale(&self) -> ArrayView1<'_, f64> {
        self.scale.view()
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}

/// The smooth problem restricted to one design matrix.
pub(crate) struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    /// Row i holds the vertex of observation i's class.
    targets: Array2<f64>,
    loss: Loss,
    penalty: Penalty,
    lambda: f64,
}

impl<'a> Problem<'a> {
    fn new(
        x: ArrayView2<'a, f64>,
        labels: &[usize],
        code: &SimplexCode,
        config: &FitConfig,
    ) -> Self {
        let targets = code.vertices().select(Axis(0), &labels.iter().map(|l| l - 1).collect::<Vec<_>>());
        Problem {
            x,
            targets,
            loss: config.loss,
            penalty: config.penalty,
            lambda: config.effective_lambda(),
        }
    }

    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    /// Decision values `X B + 1 b0^T`.
    fn forward(&self, params: &Params) -> Array2<f64> {
        self.x.dot(&params.coef) + &params.intercept
    }

    fn margins(&self, fwd: &Array2<f64>) -> Array1<f64> {
        (fwd * &self.targets).sum_axis(Axis(1))
    }

    fn ridge_term(&self, params: &Params) -> f64 {
        match self.penalty {
            Penalty::L2 => self.lambda * Penalty::L2.value(params.coef.view()),
            _ => 0.0,
        }
    }

    /// Loss term plus, for L2, the ridge term.
    fn smooth_value(&self, params: &Params, fwd: &Array2<f64>) -> f64 {
        let risk = self.margins(fwd).iter().map(|&u| self.loss.value(u)).sum::<f64>() / self.n();
        risk + self.ridge_term(params)
    }

    /// L1 term, or zero.
    fn nonsmooth_value(&self, params: &Params) -> f64 {
        match self.penalty {
            Penalty::L1 => self.lambda * Penalty::L1.value(params.coef.view()),
            _ => 0.0,
        }
    }

    /// Gradient of [`Problem::smooth_value`].
    fn smooth_gradient(&self, params: &Params, fwd: &Array2<f64>) -> Params {
        let n = self.n();
        let weights = self.margins(fwd).mapv(|u| self.loss.derivative(u) / n);
        let g_f = &self.targets * &weights.insert_axis(Axis(1));
        let mut coef = self.x.t().dot(&g_f);
        if self.penalty == Penalty::L2 {
            coef.scaled_add(2.0 * self.lambda, &params.coef);
        }
        Params {
            coef,
            intercept: g_f.sum_axis(Axis(0)),
        }
    }

    /// Proximal map of the non-smooth term at step size `step`.
    fn prox(&self, params: &mut Params, step: f64) {
        if self.penalty == Penalty::L1 && self.lambda > 0.0 {
            let t = self.lambda * step;
            params.coef.mapv_inplace(|v| soft_threshold(v, t));
        }
    }

    /// Upper estimate of the Lipschitz constant of the smooth gradient.
    fn lipschitz_estimate(&self) -> f64 {
        let spectral = augmented_gram_norm(self.x);
        let ridge = if self.penalty == Penalty::L2 { 2.0 * self.lambda } else { 0.0 };
        self.loss.curvature_bound() * spectral + ridge
    }
}

pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest eigenvalue of `[X 1]^T [X 1] / n` by power iteration, padded by 10%.
fn augmented_gram_norm(x: ArrayView2<'_, f64>) -> f64 {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let mut v = Array1::<f64>::from_elem(p + 1, 1.0 / ((p + 1) as f64).sqrt());
    let mut eig = 1.0;
    for _ in 0..50 {
        let xv = x.dot(&v.slice(ndarray::s![..p])) + v[p];
        let mut w = Array1::<f64>::zeros(p + 1);
        w.slice_mut(ndarray::s![..p]).assign(&(x.t().dot(&xv) / n));
        w[p] = xv.sum() / n;
        let norm = w.dot(&w).sqrt();
        if !(norm > 0.0) {
            break;
        }
        let prev = eig;
        eig = norm;
        v = w / norm;
        if (eig - prev).abs() <= 1e-6 * eig {
            break;
        }
    }
    eig * 1.1
}

fn check_problem(params: &Params, data: &LabeledDataset, code: &SimplexCode) -> Result<()> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    if data.k() != code.k() {
        return Err(Error::DataValidation(format!(
            "dataset has {} classes but the simplex code has {}",
            data.k(),
            code.k()
        )));
    }
    if params.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: params.p(),
        });
    }
    if params.dim() != code.dim() || params.coef.ncols() != code.dim() {
        return Err(Error::DimensionMismatch {
            expected: code.dim(),
            got: params.dim(),
        });
    }
    Ok(())
}

/// Penalized empirical risk of `params` on `data`, features used as given.
pub fn objective(
    params: &Params,
    data: &LabeledDataset,
    config: &FitConfig,
    code: &SimplexCode,
) -> Result<f64> {
    check_problem(params, data, code)?;
    let problem = Problem::new(data.x(), data.labels(), code, config);
    let fwd = problem.forward(params);
    Ok(problem.smooth_value(params, &fwd) + problem.nonsmooth_value(params))
}

/// Gradient of the smooth part of [`objective`] (the L1 term is excluded).
pub fn smooth_gradient(
    params: &Params,
    data: &LabeledDataset,
    config: &FitConfig,
    code: &SimplexCode,
) -> Result<Params> {
    check_problem(params, data, code)?;
    let problem = Problem::new(data.x(), data.labels(), code, config);
    let fwd = problem.forward(params);
    Ok(problem.smooth_gradient(params, &fwd))
}

/// Fits a penalized linear angle-based classifier.
pub fn fit(data: &LabeledDataset, config: &FitConfig, code: &SimplexCode) -> Result<LinearAngleModel> {
    config.validate()?;
    if data.k() != code.k() {
        return Err(Error::DataValidation(format!(
            "dataset has {} classes but the simplex code has {}",
            data.k(),
            code.k()
        )));
    }
    if data.n() < data.k() {
        return Err(Error::InsufficientData(format!(
            "{} observations for {} classes",
            data.n(),
            data.k()
        )));
    }
    data.check_finite()?;

    let standardizer = if config.standardize {
        Standardizer::fit(data.x())
    } else {
        Standardizer::identity(data.p())
    };
    let design = if config.standardize {
        standardizer.apply(data.x())
    } else {
        data.x().to_owned()
    };

    let mut init = Params::zeros(data.p(), code.dim());
    if config.random_init {
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let mut rng = rng::seeded(config.seed);
        init.coef.mapv_inplace(|_| normal.sample(&mut rng));
    }

    let problem = Problem::new(design.view(), data.labels(), code, config);
    let (params, diagnostics) = solver::accelerated_proximal_gradient(&problem, init, config);
    if !params.is_finite() {
        return Err(Error::DataValidation("solver produced non-finite coefficients".into()));
    }

    Ok(LinearAngleModel {
        code: code.clone(),
        loss: config.loss,
        penalty: config.penalty,
        lambda: config.lambda,
        standardizer,
        params,
        label_names: data.label_names().map(|n| n.to_vec()),
        diagnostics,
    })
}

/// A fitted (or assembled) linear angle-based classifier.
///
/// Coefficients live in the standardized feature space; the stored
/// [`Standardizer`] is applied before every evaluation.
#[derive(Debug, Clone)]
pub struct LinearAngleModel {
    code: SimplexCode,
    loss: Loss,
    penalty: Penalty,
    lambda: f64,
    standardizer: Standardizer,
    params: Params,
    label_names: Option<Vec<String>>,
    diagnostics: FitDiagnostics,
}

impl PartialEq for LinearAngleModel {
    // diagnostics describe how the model was obtained, not the model
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
            && self.loss == other.loss
            && self.penalty == other.penalty
            && self.lambda.to_bits() == other.lambda.to_bits()
            && self.standardizer == other.standardizer
            && self.params == other.params
            && self.label_names == other.label_names
    }
}

impl LinearAngleModel {
    /// Assembles a model from explicit parts, validating shapes and values.
    pub fn from_parts(
        k: usize,
        loss: Loss,
        penalty: Penalty,
        lambda: f64,
        standardizer: Standardizer,
        params: Params,
    ) -> Result<Self> {
        let code = SimplexCode::new(k)?;
        if params.dim() != code.dim() || params.coef.ncols() != code.dim() {
            return Err(Error::DimensionMismatch {
                expected: code.dim(),
                got: params.dim(),
            });
        }
        if standardizer.p() != params.p() {
            return Err(Error::DimensionMismatch {
                expected: params.p(),
                got: standardizer.p(),
            });
        }
        if !params.is_finite() {
            return Err(Error::DataValidation("model coefficients must be finite".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(LinearAngleModel {
            code,
            loss,
            penalty,
            lambda,
            standardizer,
            params,
            label_names: None,
            diagnostics: FitDiagnostics::default(),
        })
    }

    /// The same decision function expressed on raw features: the stored
    /// standardization is folded into the coefficients and intercepts.
    pub fn to_raw_features(&self) -> LinearAngleModel {
        let mean = self.standardizer.mean();
        let scale = self.standardizer.scale();
        let mut coef = self.params.coef.clone();
        for (mut row, &s) in coef.rows_mut().into_iter().zip(scale.iter()) {
            row.mapv_inplace(|b| b / s);
        }
        let intercept = &self.params.intercept - &coef.t().dot(&mean);
        LinearAngleModel {
            standardizer: Standardizer::identity(self.p()),
            params: Params { coef, intercept },
            ..self.clone()
        }
    }

    pub fn with_label_names(mut self, names: Option<Vec<String>>) -> Result<Self> {
        if let Some(n) = &names {
            if n.len() != self.k() {
                return Err(Error::DataValidation(format!(
                    "{} label names for {} classes",
                    n.len(),
                    self.k()
                )));
            }
        }
        self.label_names = names;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.code.k()
    }

    pub fn p(&self) -> usize {
        self.params.p()
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn code(&self) -> &SimplexCode {
        &self.code
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn coef(&self) -> ArrayView2<'_, f64> {
        self.params.coef.view()
    }

    pub fn intercept(&self) -> ArrayView1<'_, f64> {
        self.params.intercept.view()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    /// `J(B)` of the fitted coefficients, with the model's own penalty
    /// (`L1` when the model is unpenalized).
    pub fn penalty_value(&self) -> f64 {
        match self.penalty {
            Penalty::None => Penalty::L1.value(self.coef()),
            p => p.value(self.coef()),
        }
    }

    /// `f(x)` for one observation.
    pub fn decision_values(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x.len(),
            });
        }
        // through the batch path so single and batch results agree bit for bit
        let f = self.decision_values_batch(x.insert_axis(Axis(0)))?;
        Ok(f.row(0).to_owned())
    }

    /// `f(x_i)` for every row, as an `n x (k-1)` matrix.
    pub fn decision_values_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x.ncols(),
            });
        }
        let z = self.standardizer.apply(x);
        Ok(z.dot(&self.params.coef) + &self.params.intercept)
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let f = self.decision_values(x)?;
        self.code.predict(f.view())
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let f = self.decision_values_batch(x)?;
        let scores = self.code.scores_batch(f.view())?;
        Ok(SimplexCode::predict_scores_batch(scores.view()))
    }

    pub fn probabilities(&self, x: ArrayView1<'_, f64>) -> Result<ProbabilityVector> {
        let f = self.decision_values(x)?;
        let scores = self.code.scores(f.view())?;
        probability::class_probabilities(scores.view(), &self.loss)
    }

    /// `n x k` probability matrix.
    pub fn probabilities_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let f = self.decision_values_batch(x)?;
        let scores = self.code.scores_batch(f.view())?;
        probability::class_probabilities_batch(scores.view(), &self.loss)
    }

    /// Training-style objective of this model on `data` (raw features).
    pub fn objective_on(&self, data: &LabeledDataset) -> Result<f64> {
        let z = self.standardizer.apply(data.x());
        let d = data.with_features(z)?;
        let config = FitConfig::new(self.loss, self.penalty, self.lambda);
        objective(&self.params, &d, &config, &self.code)
    }
}
