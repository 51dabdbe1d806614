//! Replicated experiments: tune, fit, refit and evaluate.
//!
//! Each replicate produces one row per method ("Soft", "Refit Soft",
//! "Logi", "Refit Logi"); the report appends mean and standard-error rows
//! per method. A replicate that fails is recorded and skipped.

use std::fmt;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::datagen::ExampleId;
use crate::dataset::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::linear_model::{self, FitConfig, Penalty};
use crate::loss::Loss;
use crate::metrics;
use crate::refit;
use crate::rng::derive_seed;
use crate::simplex::SimplexCode;
use crate::tuning::{self, SIX_WAY};

pub const REPORT_COLUMNS: [&str; 11] = [
    "method",
    "replicate",
    "lambda_selected",
    "error",
    "error_pct",
    "mad",
    "mad_x100",
    "cre",
    "cre_x100",
    "nll",
    "stage2_converged",
];

#[derive(Debug, Clone)]
pub enum BenchSource {
    /// Fresh train/tune/test draws per replicate; hold-out tuning.
    Simulated {
        example: ExampleId,
        train: usize,
        tune: usize,
        test: usize,
    },
    /// Six-way split per replicate; cross-validated tuning on the training part.
    Real { data: LabeledDataset, folds: usize },
}

impl fmt::Display for BenchSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchSource::Simulated {
                example,
                train,
                tune,
                test,
            } => write!(f, "{example} train={train} tune={tune} test={test}"),
            BenchSource::Real { data, folds } => {
                write!(f, "real n={} p={} k={} folds={folds}", data.n(), data.p(), data.k())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub source: BenchSource,
    pub losses: Vec<Loss>,
    pub penalty: Penalty,
    pub replicates: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub standardize: bool,
}

impl BenchConfig {
    pub fn new(source: BenchSource) -> Self {
        BenchConfig {
            source,
            losses: Loss::ALL.to_vec(),
            penalty: Penalty::L2,
            replicates: 10,
            seed: 1,
            grid: tuning::lambda_grid(),
            jobs: 0,
            max_iterations: 2000,
            tolerance: 1e-6,
            standardize: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicate count must be positive"));
        }
        if self.losses.is_empty() {
            return Err(invalid("no losses selected"));
        }
        if self.penalty == Penalty::None {
            return Err(invalid("bench needs a penalty (l1 or l2)"));
        }
        if let BenchSource::Real { folds, .. } = &self.source {
            if *folds < 2 {
                return Err(invalid("cross-validation needs at least 2 folds"));
            }
        }
        Ok(())
    }

    fn fit_config(&self, loss: Loss) -> FitConfig {
        FitConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            standardize: self.standardize,
            ..FitConfig::new(loss, self.penalty, 1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub replicate: usize,
    pub lambda_selected: f64,
    pub error: f64,
    pub mad: Option<f64>,
    pub cre: f64,
    pub nll: f64,
    pub stage2_converged: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSummary {
    pub replicates: usize,
    pub error: f64,
    pub mad: Option<f64>,
    pub cre: f64,
    pub nll: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<ReportRow>,
    /// (replicate, message) for replicates that failed.
    pub failures: Vec<(usize, String)>,
    pub replicates: usize,
    methods: Vec<String>,
}

pub fn method_names(loss: Loss) -> [String; 2] {
    let label = loss.method_label();
    [label.to_string(), format!("Refit {label}")]
}

struct Split {
    train: LabeledDataset,
    test: LabeledDataset,
    tune: Option<LabeledDataset>,
}

fn replicate_split(cfg: &BenchConfig, r: usize) -> Result<Split> {
    match &cfg.source {
        BenchSource::Simulated {
            example,
            train,
            tune,
            test,
        } => {
            let spec = example.spec();
            let s = derive_seed(cfg.seed, r as u64);
            Ok(Split {
                train: spec.generate(*train, derive_seed(s, 0))?,
                tune: Some(spec.generate(*tune, derive_seed(s, 1))?),
                test: spec.generate(*test, derive_seed(s, 2))?,
            })
        }
        BenchSource::Real { data, .. } => {
            // each split seed serves six replicates, one per test part
            let split_seed = derive_seed(cfg.seed, (r / SIX_WAY) as u64);
            let (train, test) = tuning::split_six(data, r % SIX_WAY + 1, split_seed)?;
            Ok(Split { train, test, tune: None })
        }
    }
}

fn evaluate(
    method: String,
    replicate: usize,
    lambda: f64,
    probs: &Array2<f64>,
    predictions: &[usize],
    test: &LabeledDataset,
    stage2_converged: Option<bool>,
) -> Result<ReportRow> {
    let mad = test
        .true_probs()
        .map(|t| metrics::mad(t, probs.view()))
        .transpose()?;
    Ok(ReportRow {
        method,
        replicate,
        lambda_selected: lambda,
        error: metrics::error_rate(predictions, test.labels())?,
        mad,
        cre: metrics::cre(probs.view(), test.labels())?,
        nll: metrics::nll(probs.view(), test.labels())?,
        stage2_converged,
    })
}

fn run_replicate(cfg: &BenchConfig, r: usize) -> Result<Vec<ReportRow>> {
    let split = replicate_split(cfg, r)?;
    let code = SimplexCode::new(split.train.k())?;
    let mut rows = Vec::with_capacity(2 * cfg.losses.len());
    for &loss in &cfg.losses {
        let base = cfg.fit_config(loss);
        let tuned = match (&split.tune, &cfg.source) {
            (Some(tune), _) => tuning::select_holdout_on_grid(&split.train, tune, &base, &code, &cfg.grid)?,
            (None, BenchSource::Real { folds, .. }) => tuning::cv_select_on_grid(
                &split.train,
                *folds,
                &base,
                &code,
                derive_seed(cfg.seed ^ 0xcf, r as u64),
                &cfg.grid,
            )?,
            (None, BenchSource::Simulated { .. }) => unreachable!("simulated splits carry a tuning set"),
        };
        let lambda = tuned.selected_lambda;
        let config = base.with_lambda(lambda);
        let stage1 = linear_model::fit(&split.train, &config, &code)?;
        let [plain, refit_name] = method_names(loss);

        let probs = stage1.probabilities_batch(split.test.x())?;
        let pred = stage1.predict_batch(split.test.x())?;
        rows.push(evaluate(plain, r, lambda, &probs, &pred, &split.test, None)?);

        let refit = refit::refit_from_stage1(stage1, &split.train, &config)?;
        let probs = refit.probabilities_batch(split.test.x())?;
        let pred = refit.predict_batch(split.test.x())?;
        let converged = Some(refit.diagnostics().stage2_converged);
        rows.push(evaluate(refit_name, r, lambda, &probs, &pred, &split.test, converged)?);
    }
    Ok(rows)
}

/// Runs every replicate and assembles the report in replicate order.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let work = || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| (r, run_replicate(cfg, r)))
            .collect::<Vec<_>>()
    };
    let results = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    };

    assemble(cfg, results)
}

fn assemble(cfg: &BenchConfig, results: Vec<(usize, Result<Vec<ReportRow>>)>) -> Result<BenchReport> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(mut rs) => rows.append(&mut rs),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if rows.is_empty() {
        let detail = failures.first().map(|(_, m)| m.as_str()).unwrap_or("no rows");
        return Err(Error::DataValidation(format!("every replicate failed: {detail}")));
    }
    let methods = cfg.losses.iter().flat_map(|&l| method_names(l)).collect();
    Ok(BenchReport {
        rows,
        failures,
        replicates: cfg.replicates,
        methods,
    })
}

fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, Some((var / m).sqrt()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl BenchReport {
    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Mean metrics over the successful replicates of `method`.
    pub fn summary(&self, method: &str) -> Option<MethodSummary> {
        let rows: Vec<&ReportRow> = self.rows_for(method).collect();
        if rows.is_empty() {
            return None;
        }
        let mean = |f: &dyn Fn(&ReportRow) -> f64| mean_se(&rows.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
        let mad = rows
            .iter()
            .map(|r| r.mad)
            .collect::<Option<Vec<f64>>>()
            .map(|v| mean_se(&v).0);
        Some(MethodSummary {
            replicates: rows.len(),
            error: mean(&|r| r.error),
            mad,
            cre: mean(&|r| r.cre),
            nll: mean(&|r| r.nll),
        })
    }

    /// Writes the report CSV: per-replicate rows, then `mean` and `se` rows
    /// per method.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.replicate.to_string(),
                r.lambda_selected.to_string(),
                r.error.to_string(),
                (100.0 * r.error).to_string(),
                opt(r.mad),
                opt(r.mad.map(|v| 100.0 * v)),
                r.cre.to_string(),
                (100.0 * r.cre).to_string(),
                r.nll.to_string(),
                r.stage2_converged.map_or_else(|| "NA".to_string(), |b| b.to_string()),
            ])?;
        }
        for method in &self.methods {
            let rows: Vec<&ReportRow> = self.rows_for(method).collect();
            if rows.is_empty() {
                continue;
            }
            let stat = |f: &dyn Fn(&ReportRow) -> f64| mean_se(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let error = stat(&|r| r.error);
            let cre = stat(&|r| r.cre);
            let nll = stat(&|r| r.nll);
            let mad = rows
                .iter()
                .map(|r| r.mad)
                .collect::<Option<Vec<f64>>>()
                .map(|v| mean_se(&v));
            let converged = rows.iter().filter_map(|r| r.stage2_converged).filter(|&c| c).count();
            let has_stage2 = rows.iter().any(|r| r.stage2_converged.is_some());
            let conv_share = has_stage2.then(|| converged as f64 / rows.len() as f64);

            w.write_record([
                method.clone(),
                "mean".into(),
                "NA".into(),
                error.0.to_string(),
                (100.0 * error.0).to_string(),
                opt(mad.map(|m| m.0)),
                opt(mad.map(|m| 100.0 * m.0)),
                cre.0.to_string(),
                (100.0 * cre.0).to_string(),
                nll.0.to_string(),
                opt(conv_share),
            ])?;
            w.write_record([
                method.clone(),
                "se".into(),
                "NA".into(),
                opt(error.1),
                opt(error.1.map(|v| 100.0 * v)),
                opt(mad.and_then(|m| m.1)),
                opt(mad.and_then(|m| m.1).map(|v| 100.0 * v)),
                opt(cre.1),
                opt(cre.1.map(|v| 100.0 * v)),
                opt(nll.1),
                "NA".into(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Key-value run metadata, kept apart from the report so the report
    /// itself depends only on the inputs.
    pub fn write_metadata<W: Write>(&self, cfg: &BenchConfig, mut out: W) -> Result<()> {
        writeln!(out, "version={}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "source={}", cfg.source)?;
        writeln!(
            out,
            "losses={}",
            cfg.losses.iter().map(|l| l.id()).collect::<Vec<_>>().join(",")
        )?;
        writeln!(out, "penalty={}", cfg.penalty)?;
        writeln!(out, "replicates={}", self.replicates)?;
        writeln!(out, "seed={}", cfg.seed)?;
        writeln!(out, "grid_size={}", cfg.grid.len())?;
        writeln!(out, "standardize={}", cfg.standardize)?;
        if let BenchSource::Simulated { example, .. } = &cfg.source {
            let spec = example.spec();
            writeln!(out, "signal_sd={}", spec.signal_sd)?;
            writeln!(out, "noise_sd={}", spec.noise_sd)?;
        }
        writeln!(out, "failed_replicates={}", self.failures.len())?;
        for (r, msg) in &self.failures {
            writeln!(out, "failure.{r}={msg}")?;
        }
        Ok(())
    }
}
