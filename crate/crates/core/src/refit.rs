//! Two-stage refit for angle-based classifiers.
//!
//! Stage one is the penalized fit on the raw features. Its `k - 1`
//! decision values `f_hat(x_i)` become the predictors of stage two, an
//! unpenalized fit of the same loss on `{(f_hat(x_i), y_i)}`. Probabilities
//! are read off the composed function `f_tilde(f_hat(x))`, which undoes the
//! shrinkage of `f_hat` toward zero without changing how the classes are
//! separated.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linear_model::{self, FitConfig, LinearAngleModel, Penalty};
use crate::probability::{self, ProbabilityVector};
use crate::simplex::SimplexCode;

/// Iteration cap for the unpenalized stage-two fit.
pub const STAGE2_MAX_ITERATIONS: usize = 5000;

/// Stage-two coefficient norm above which the refit data is flagged as
/// (numerically) separable.
pub const SEPARABLE_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct RefitDiagnostics {
    pub stage2_converged: bool,
    pub stage2_iterations: usize,
    /// Frobenius norm of the stage-two coefficient matrix.
    pub stage2_coef_norm: f64,
    /// Stage two hit the iteration cap with a diverging coefficient norm.
    pub separable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefitModel {
    stage1: LinearAngleModel,
    stage2: LinearAngleModel,
    diagnostics: RefitDiagnostics,
}

/// Stage-two settings derived from the stage-one config.
pub fn stage2_config(stage1: &FitConfig) -> FitConfig {
    FitConfig {
        loss: stage1.loss,
        penalty: Penalty::None,
        lambda: 0.0,
        max_iterations: STAGE2_MAX_ITERATIONS,
        tolerance: stage1.tolerance,
        line_search_shrink: stage1.line_search_shrink,
        standardize: false,
        random_init: false,
        seed: stage1.seed,
    }
}

/// Runs both stages on `data`.
pub fn refit_fit(data: &LabeledDataset, stage1_config: &FitConfig, code: &SimplexCode) -> Result<RefitModel> {
    let stage1 = linear_model::fit(data, stage1_config, code)?;
    refit_from_stage1(stage1, data, stage1_config)
}

/// Runs stage two on top of an already fitted stage-one model.
pub fn refit_from_stage1(
    stage1: LinearAngleModel,
    data: &LabeledDataset,
    stage1_config: &FitConfig,
) -> Result<RefitModel> {
    let projected = stage1.decision_values_batch(data.x())?;
    let stage2_data = data.with_features(projected)?;
    // Unpenalized, so z-scoring the predictors leaves the minimizer
    // unchanged; it only preconditions the solver, since heavily shrunk
    // decision values sit orders of magnitude below the intercept scale.
    let config = FitConfig {
        standardize: true,
        ..stage2_config(stage1_config)
    };
    let stage2 = linear_model::fit(&stage2_data, &config, stage1.code())?.to_raw_features();

    let diag = stage2.diagnostics();
    let norm = stage2.coef().iter().map(|v| v * v).sum::<f64>().sqrt();
    let diagnostics = RefitDiagnostics {
        stage2_converged: diag.converged,
        stage2_iterations: diag.iterations,
        stage2_coef_norm: norm,
        separable: !diag.converged && norm > SEPARABLE_NORM,
    };
    RefitModel::new(stage1, stage2, diagnostics)
}

impl RefitModel {
    /// Assembles a refit model, checking that the stages compose.
    pub fn new(stage1: LinearAngleModel, stage2: LinearAngleModel, diagnostics: RefitDiagnostics) -> Result<Self> {
        if stage2.k() != stage1.k() || stage2.p() != stage1.k() - 1 {
            return Err(Error::DataValidation(format!(
                "stage two must map R^{} to R^{} (got p = {}, k = {})",
                stage1.k() - 1,
                stage1.k() - 1,
                stage2.p(),
                stage2.k()
            )));
        }
        if stage2.lambda() != 0.0 || stage2.penalty() != Penalty::None {
            return Err(Error::DataValidation("stage two must be unpenalized".into()));
        }
        if stage2.loss() != stage1.loss() {
            return Err(Error::DataValidation("both stages must share the loss".into()));
        }
        Ok(RefitModel {
            stage1,
            stage2,
            diagnostics,
        })
    }

    pub fn stage1(&self) -> &LinearAngleModel {
        &self.stage1
    }

    pub fn stage2(&self) -> &LinearAngleModel {
        &self.stage2
    }

    pub fn diagnostics(&self) -> &RefitDiagnostics {
        &self.diagnostics
    }

    pub fn k(&self) -> usize {
        self.stage1.k()
    }

    pub fn p(&self) -> usize {
        self.stage1.p()
    }

    /// `f_tilde(f_hat(x))`.
    pub fn decision_values(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let inner = self.stage1.decision_values(x)?;
        self.stage2.decision_values(inner.view())
    }

    pub fn decision_values_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let inner = self.stage1.decision_values_batch(x)?;
        self.stage2.decision_values_batch(inner.view())
    }

    pub fn probabilities(&self, x: ArrayView1<'_, f64>) -> Result<ProbabilityVector> {
        let f = self.decision_values(x)?;
        let scores = self.stage2.code().scores(f.view())?;
        probability::class_probabilities(scores.view(), &self.stage2.loss())
    }

    pub fn probabilities_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.stage2.probabilities_batch(self.stage1.decision_values_batch(x)?.view())
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let f = self.decision_values(x)?;
        self.stage2.code().predict(f.view())
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        self.stage2.predict_batch(self.stage1.decision_values_batch(x)?.view())
    }
}
