use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use anglerefit::bench::{run_bench, BenchConfig, BenchSource};
use anglerefit::datagen::ExampleId;
use anglerefit::dataio::{self, AnyModel, LabelColumn};
use anglerefit::linear_model::{self, FitConfig, Penalty};
use anglerefit::loss::Loss;
use anglerefit::refit;
use anglerefit::tuning::{self, TuningResult};
use anglerefit::{LabeledDataset, Result, SimplexCode};

#[derive(Parser)]
#[command(name = "anglerefit", version, about = "Angle-based multicategory classification with probability refit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/tune/test files for a synthetic example.
    Simulate(SimulateArgs),
    /// Run the replicated tune/fit/refit/evaluate experiment.
    Bench(BenchArgs),
    /// Fit a penalized linear classifier and write the model.
    Fit(FitArgs),
    /// Fit stage one and the unpenalized stage-two refit.
    Refit(FitArgs),
    /// Write predicted labels for a data file.
    Predict(ApplyArgs),
    /// Write class probabilities for a data file.
    Prob(ApplyArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Label column: a 0-based index, a header name, or "last".
    #[arg(long, default_value = "last")]
    label_col: LabelColumn,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    example: ExampleId,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    tune: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Synthetic example to simulate each replicate.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    example: Option<ExampleId>,
    /// Real dataset, evaluated with six-way splits and cross-validated tuning.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 4)]
    folds: usize,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    tune: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    /// Comma-separated losses, run in the given order.
    #[arg(long, value_delimiter = ',', default_value = "soft,logistic")]
    losses: Vec<Loss>,
    #[arg(long, default_value = "l2")]
    penalty: Penalty,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Fit on z-scored features instead of the raw ones.
    #[arg(long)]
    standardize: bool,
    /// Report path; metadata goes to <out>.meta. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "logistic")]
    loss: Loss,
    #[arg(long, default_value = "l1")]
    penalty: Penalty,
    #[arg(long, conflicts_with = "tune_grid", required_unless_present = "tune_grid")]
    lambda: Option<f64>,
    /// Select lambda over 2^-10..2^10.
    #[arg(long)]
    tune_grid: bool,
    /// Hold-out file for --tune-grid; cross-validation is used without it.
    #[arg(long, requires = "tune_grid")]
    tune_data: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    folds: usize,
    /// Where to write the tuning trace.
    #[arg(long, requires = "tune_grid")]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Every column is a feature.
    #[arg(long, conflicts_with = "label_col")]
    no_labels: bool,
    /// Output path; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sizes(example: ExampleId, train: Option<usize>, tune: Option<usize>, test: Option<usize>) -> (usize, usize, usize) {
    let (a, b, c) = example.default_sizes();
    (train.unwrap_or(a), tune.unwrap_or(b), test.unwrap_or(c))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = args.example.spec();
    let (train, tune, test) = sizes(args.example, args.train, args.tune, args.test);
    std::fs::create_dir_all(&args.out_dir)?;
    let ex = args.example.to_string();
    for (i, (part, n)) in [("train", train), ("tune", tune), ("test", test)].into_iter().enumerate() {
        let data = spec.generate(n, anglerefit::rng::derive_seed(args.seed, i as u64))?;
        dataio::save_csv(&data, args.out_dir.join(format!("{ex}_{part}.csv")))?;
        dataio::save_true_probs(&data, args.out_dir.join(format!("{ex}_{part}_probs.csv")))?;
    }
    let mut meta = BufWriter::new(File::create(args.out_dir.join(format!("{ex}_meta.txt")))?);
    writeln!(meta, "version={}", env!("CARGO_PKG_VERSION"))?;
    writeln!(meta, "example={ex}")?;
    writeln!(meta, "seed={}", args.seed)?;
    writeln!(meta, "sizes={train},{tune},{test}")?;
    writeln!(meta, "k={} p={} signal_dim={}", spec.k(), spec.p(), spec.signal_dim())?;
    writeln!(meta, "signal_sd={}", spec.signal_sd)?;
    writeln!(meta, "noise_sd={}", spec.noise_sd)?;
    meta.flush()?;
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let source = match (args.example, &args.data) {
        (Some(example), _) => {
            let (train, tune, test) = sizes(example, args.train, args.tune, args.test);
            BenchSource::Simulated {
                example,
                train,
                tune,
                test,
            }
        }
        (None, Some(path)) => BenchSource::Real {
            data: dataio::load_csv(path, &args.input.label_col, !args.input.no_header)?,
            folds: args.folds,
        },
        (None, None) => unreachable!("clap requires --example or --data"),
    };
    let cfg = BenchConfig {
        losses: args.losses,
        penalty: args.penalty,
        replicates: args.replicates,
        seed: args.seed,
        jobs: args.jobs,
        standardize: args.standardize,
        ..BenchConfig::new(source)
    };
    let report = run_bench(&cfg)?;
    for (r, msg) in &report.failures {
        eprintln!("replicate {r} failed: {msg}");
    }
    let mut out = output(args.out.as_deref())?;
    report.write_csv(&mut out)?;
    out.flush()?;
    match &args.out {
        Some(path) => {
            let mut meta_path = path.clone().into_os_string();
            meta_path.push(".meta");
            let mut meta = BufWriter::new(File::create(meta_path)?);
            report.write_metadata(&cfg, &mut meta)?;
            meta.flush()?;
        }
        None => report.write_metadata(&cfg, io::stderr().lock())?,
    }
    Ok(())
}

fn fit_config(args: &FitArgs, data: &LabeledDataset, code: &SimplexCode) -> Result<FitConfig> {
    let mut base = FitConfig::new(args.loss, args.penalty, args.lambda.unwrap_or(1.0));
    base.seed = args.seed;
    if let Some(m) = args.max_iter {
        base.max_iterations = m;
    }
    if !args.tune_grid {
        return Ok(base);
    }
    let tuned: TuningResult = match &args.tune_data {
        Some(path) => {
            let names = data.label_names().unwrap_or_default();
            let tune = dataio::load_csv_with_labels(path, &args.input.label_col, !args.input.no_header, names)?;
            let tune = LabeledDataset::new(tune.x().to_owned(), tune.labels().to_vec(), data.k())?;
            tuning::select_holdout(data, &tune, &base, code)?
        }
        None => tuning::cv_select(data, args.folds, &base, code, args.seed)?,
    };
    if let Some(path) = &args.trace {
        let mut w = BufWriter::new(File::create(path)?);
        tuned.write_csv(&mut w)?;
        w.flush()?;
    }
    eprintln!("selected lambda {} by {}", tuned.selected_lambda, tuned.selected_by);
    Ok(base.with_lambda(tuned.selected_lambda))
}

fn fit(args: FitArgs, with_refit: bool) -> Result<()> {
    let data = dataio::load_csv(&args.data, &args.input.label_col, !args.input.no_header)?;
    let code = SimplexCode::new(data.k())?;
    let config = fit_config(&args, &data, &code)?;
    if with_refit {
        let model = refit::refit_fit(&data, &config, &code)?;
        if model.diagnostics().separable {
            eprintln!("warning: stage-two data look separable; coefficients hit the iteration cap");
        }
        dataio::save_refit_model(&model, &args.out)
    } else {
        let model = linear_model::fit(&data, &config, &code)?;
        if !model.diagnostics().converged {
            eprintln!("warning: solver stopped after {} iterations", model.diagnostics().iterations);
        }
        dataio::save_model(&model, &args.out)
    }
}

fn apply_inputs(args: &ApplyArgs) -> Result<(AnyModel, ndarray::Array2<f64>)> {
    let model = dataio::load_any_model(&args.model)?;
    let label_col = (!args.no_labels).then_some(&args.input.label_col);
    let x = dataio::load_features(&args.data, label_col, !args.input.no_header)?;
    Ok((model, x))
}

fn label_names(model: &AnyModel) -> Vec<String> {
    model
        .label_names()
        .map(|n| n.to_vec())
        .unwrap_or_else(|| (1..=model.k()).map(|j| j.to_string()).collect())
}

fn predict(args: ApplyArgs) -> Result<()> {
    let (model, x) = apply_inputs(&args)?;
    let labels = model.predict_batch(x.view())?;
    let names = label_names(&model);
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "label")?;
    for l in labels {
        writeln!(out, "{}", names[l - 1])?;
    }
    out.flush()?;
    Ok(())
}

fn prob(args: ApplyArgs) -> Result<()> {
    let (model, x) = apply_inputs(&args)?;
    let probs = model.probabilities_batch(x.view())?;
    let out = output(args.out.as_deref())?;
    dataio::write_probs(probs.view(), &label_names(&model), out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Fit(a) => fit(a, false),
        Command::Refit(a) => fit(a, true),
        Command::Predict(a) => predict(a),
        Command::Prob(a) => prob(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(anglerefit::Error::InvalidArgument(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
