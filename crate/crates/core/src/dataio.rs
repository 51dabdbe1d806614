//! CSV datasets and model documents.
//!
//! Datasets are comma-separated, UTF-8, with an optional header row. Labels
//! are arbitrary strings mapped to `1..=k` in order of first appearance;
//! the mapping travels with the dataset and with fitted models.
//!
//! Models are stored as line-oriented text documents. Floats are written
//! with 17 significant digits, which reproduces every `f64` bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linear_model::{LinearAngleModel, Params, Standardizer};
use crate::refit::{RefitDiagnostics, RefitModel};

pub const LINEAR_MODEL_HEADER: &str = "anglerefit-linear-model";
pub const REFIT_MODEL_HEADER: &str = "anglerefit-refit-model";
pub const FORMAT_VERSION: u32 = 1;

/// Which column of a CSV file holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("last") {
            Ok(LabelColumn::Last)
        } else if let Ok(i) = s.parse::<usize>() {
            Ok(LabelColumn::Index(i))
        } else if s.is_empty() {
            Err(Error::InvalidArgument("empty label column".into()))
        } else {
            Ok(LabelColumn::Name(s.to_string()))
        }
    }
}

struct RawTable {
    header: Option<Vec<String>>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table<R: Read>(reader: R, has_header: bool) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = if has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(RawTable { header, rows })
}

fn resolve_column(table: &RawTable, column: &LabelColumn) -> Result<usize> {
    let width = table
        .header
        .as_ref()
        .map(|h| h.len())
        .or_else(|| table.rows.first().map(|(_, r)| r.len()))
        .ok_or(Error::EmptyDataset)?;
    let idx = match column {
        LabelColumn::Index(i) => *i,
        LabelColumn::Last => width.saturating_sub(1),
        LabelColumn::Name(name) => {
            let header = table.header.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("label column '{name}' given by name but the file has no header"))
            })?;
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidArgument(format!("no column named '{name}'")))?
        }
    };
    if idx >= width {
        return Err(Error::InvalidArgument(format!(
            "label column {idx} out of range for {width} columns"
        )));
    }
    Ok(idx)
}

fn parse_cell(cell: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("column {}: '{cell}' is not a number", column + 1),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("column {}: non-finite value '{cell}'", column + 1),
        });
    }
    Ok(v)
}

fn build_dataset(table: RawTable, label_idx: usize, known: Option<&[String]>) -> Result<LabeledDataset> {
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = table.rows[0].1.len();
    let p = width - 1;
    let mut names: Vec<String> = known.map(|k| k.to_vec()).unwrap_or_default();
    let mut x = Array2::zeros((table.rows.len(), p));
    let mut y = Vec::with_capacity(table.rows.len());
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        let label = &cells[label_idx];
        if label.is_empty() {
            return Err(Error::Parse {
                line: *line,
                msg: "missing label".into(),
            });
        }
        let class = match names.iter().position(|n| n == label) {
            Some(j) => j + 1,
            None if known.is_none() => {
                names.push(label.clone());
                names.len()
            }
            None => {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("label '{label}' not among the known classes"),
                })
            }
        };
        y.push(class);
        let mut col = 0;
        for (j, cell) in cells.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            x[[i, col]] = parse_cell(cell, *line, j)?;
            col += 1;
        }
    }
    if names.len() < 2 {
        return Err(Error::DataValidation(format!(
            "need at least two classes, found {}",
            names.len()
        )));
    }
    let k = names.len();
    LabeledDataset::new(x, y, k)?.with_label_names(names)
}

/// Reads a labeled dataset from any reader.
pub fn read_csv<R: Read>(reader: R, label_column: &LabelColumn, has_header: bool) -> Result<LabeledDataset> {
    let table = read_table(reader, has_header)?;
    let idx = resolve_column(&table, label_column)?;
    build_dataset(table, idx, None)
}

/// Loads a labeled dataset; labels map to `1..=k` by first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn, has_header: bool) -> Result<LabeledDataset> {
    read_csv(File::open(path)?, label_column, has_header)
}

/// Loads a labeled dataset using an existing label mapping (e.g. a model's),
/// so class numbers agree with the training data.
pub fn load_csv_with_labels(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
    has_header: bool,
    known: &[String],
) -> Result<LabeledDataset> {
    let table = read_table(File::open(path)?, has_header)?;
    let idx = resolve_column(&table, label_column)?;
    build_dataset(table, idx, Some(known))
}

/// Loads only the feature columns, dropping `label_column` if given.
pub fn load_features(
    path: impl AsRef<Path>,
    label_column: Option<&LabelColumn>,
    has_header: bool,
) -> Result<Array2<f64>> {
    let table = read_table(File::open(path)?, has_header)?;
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let skip = label_column.map(|c| resolve_column(&table, c)).transpose()?;
    let width = table.rows[0].1.len();
    let p = width - usize::from(skip.is_some());
    let mut x = Array2::zeros((table.rows.len(), p));
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        let mut col = 0;
        for (j, cell) in cells.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            x[[i, col]] = parse_cell(cell, *line, j)?;
            col += 1;
        }
    }
    Ok(x)
}

/// Writes `x1..xp,y` with labels spelled by their original names.
pub fn write_csv<W: Write>(data: &LabeledDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(data.label_name(data.labels()[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(data, BufWriter::new(File::create(path)?))
}

/// Writes an `n x k` probability matrix with header `p_<label>`.
pub fn write_probs<W: Write>(probs: ArrayView2<'_, f64>, names: &[String], out: W) -> Result<()> {
    if names.len() != probs.ncols() {
        return Err(Error::DimensionMismatch {
            expected: probs.ncols(),
            got: names.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(names.iter().map(|n| format!("p_{n}")))?;
    for row in probs.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_probs(probs: ArrayView2<'_, f64>, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    write_probs(probs, names, BufWriter::new(File::create(path)?))
}

fn dataset_names(data: &LabeledDataset) -> Vec<String> {
    (1..=data.k()).map(|j| data.label_name(j)).collect()
}

/// Writes the dataset's true probabilities as a sidecar CSV.
pub fn save_true_probs(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let probs = data
        .true_probs()
        .ok_or_else(|| Error::DataValidation("dataset has no true probabilities".into()))?;
    save_probs(probs, &dataset_names(data), path)
}

/// Attaches a true-probability sidecar, matching its `p_<label>` columns
/// to the dataset's label mapping.
pub fn load_true_probs(data: LabeledDataset, path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let table = read_table(File::open(path)?, true)?;
    let header = table.header.clone().unwrap_or_default();
    let names = dataset_names(&data);
    let mut order = Vec::with_capacity(names.len());
    for name in &names {
        let col = header
            .iter()
            .position(|h| h.strip_prefix("p_") == Some(name.as_str()))
            .ok_or_else(|| Error::DataValidation(format!("sidecar has no column p_{name}")))?;
        order.push(col);
    }
    if table.rows.len() != data.n() {
        return Err(Error::DataValidation(format!(
            "sidecar has {} rows, dataset has {}",
            table.rows.len(),
            data.n()
        )));
    }
    let mut probs = Array2::zeros((data.n(), names.len()));
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        for (j, &col) in order.iter().enumerate() {
            probs[[i, j]] = parse_cell(&cells[col], *line, col)?;
        }
    }
    data.with_true_probs(probs)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(" ")
}

/// Serializes a linear model as a versioned text document.
pub fn write_model<W: Write>(model: &LinearAngleModel, mut out: W) -> Result<()> {
    writeln!(out, "{LINEAR_MODEL_HEADER} {FORMAT_VERSION}")?;
    writeln!(out, "k {}", model.k())?;
    writeln!(out, "p {}", model.p())?;
    writeln!(out, "loss {}", model.loss())?;
    writeln!(out, "penalty {}", model.penalty())?;
    writeln!(out, "lambda {}", fmt_f64(model.lambda()))?;
    if let Some(names) = model.label_names() {
        if names.iter().any(|n| n.contains(['\t', '\n', '\r'])) {
            return Err(Error::DataValidation("label names may not contain tabs or newlines".into()));
        }
        writeln!(out, "labels\t{}", names.join("\t"))?;
    }
    writeln!(out, "mean {}", join(model.standardizer().mean().iter().copied()))?;
    writeln!(out, "scale {}", join(model.standardizer().scale().iter().copied()))?;
    writeln!(out, "intercept {}", join(model.intercept().iter().copied()))?;
    writeln!(out, "coef")?;
    for row in model.coef().rows() {
        writeln!(out, "{}", join(row.iter().copied()))?;
    }
    writeln!(out, "end")?;
    Ok(())
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    line: u64,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(Error::Malformed(format!("unexpected end of document at line {}", self.line))),
            }
        }
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let l = self.next_line()?;
        let (k, rest) = l.split_once([' ', '\t']).unwrap_or((l.as_str(), ""));
        if k != key {
            return Err(Error::Malformed(format!("line {}: expected '{key}', found '{k}'", self.line)));
        }
        Ok(rest.to_string())
    }

    fn malformed(&self, msg: impl std::fmt::Display) -> Error {
        Error::Malformed(format!("line {}: {msg}", self.line))
    }
}

fn parse_floats(line: u64, text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Malformed(format!("line {line}: bad number '{t}' in {what}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Malformed(format!(
            "line {line}: {what} has {} values, expected {expected}",
            values.len()
        )));
    }
    Ok(values)
}

impl<R: BufRead> Lines<R> {
    fn floats(&mut self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let text = self.field(key)?;
        parse_floats(self.line, &text, expected, key)
    }

    fn boolean(&mut self, key: &str) -> Result<bool> {
        let text = self.field(key)?;
        text.trim().parse().map_err(|_| self.malformed(format!("bad boolean '{text}'")))
    }
}

fn check_header<R: BufRead>(lines: &mut Lines<R>, tag: &str) -> Result<()> {
    let l = lines.next_line()?;
    let mut parts = l.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(lines.malformed(format!("expected '{tag}' header")));
    }
    let version = parts.next().unwrap_or("");
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::Version(format!("{tag} {version} (supported: {FORMAT_VERSION})")));
    }
    Ok(())
}

fn read_linear<R: BufRead>(lines: &mut Lines<R>) -> Result<LinearAngleModel> {
    check_header(lines, LINEAR_MODEL_HEADER)?;
    let k: usize = lines.field("k")?.trim().parse().map_err(|_| lines.malformed("bad k"))?;
    let p: usize = lines.field("p")?.trim().parse().map_err(|_| lines.malformed("bad p"))?;
    if k < 2 {
        return Err(lines.malformed(format!("k must be at least 2, got {k}")));
    }
    let loss = lines.field("loss")?.parse().map_err(|e| lines.malformed(e))?;
    let penalty = lines.field("penalty")?.parse().map_err(|e| lines.malformed(e))?;
    let lambda = lines.floats("lambda", 1)?[0];

    let mut next = lines.next_line()?;
    let mut names = None;
    if let Some(rest) = next.strip_prefix("labels\t") {
        let list: Vec<String> = rest.split('\t').map(str::to_string).collect();
        if list.len() != k {
            return Err(lines.malformed(format!("{} labels for k = {k}", list.len())));
        }
        names = Some(list);
        next = lines.next_line()?;
    }
    let mean_text = next
        .strip_prefix("mean")
        .ok_or_else(|| lines.malformed("expected 'mean'"))?
        .to_string();
    let mean = parse_floats(lines.line, &mean_text, p, "mean")?;
    let scale = lines.floats("scale", p)?;
    let intercept = lines.floats("intercept", k - 1)?;
    lines.field("coef")?;
    let mut coef = Array2::zeros((p, k - 1));
    for r in 0..p {
        let text = lines.next_line()?;
        let row = parse_floats(lines.line, &text, k - 1, "coefficient row")?;
        coef.row_mut(r).assign(&Array1::from(row));
    }
    if lines.next_line()?.trim() != "end" {
        return Err(lines.malformed("expected 'end'"));
    }

    let standardizer = Standardizer::from_parts(Array1::from(mean), Array1::from(scale))
        .map_err(|e| lines.malformed(e))?;
    let params = Params {
        coef,
        intercept: Array1::from(intercept),
    };
    LinearAngleModel::from_parts(k, loss, penalty, lambda, standardizer, params)?.with_label_names(names)
}

/// Parses a document produced by [`write_model`].
pub fn read_model<R: Read>(input: R) -> Result<LinearAngleModel> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        line: 0,
    };
    read_linear(&mut lines)
}

pub fn save_model(model: &LinearAngleModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LinearAngleModel> {
    read_model(File::open(path)?)
}

/// Header tag and diagnostics followed by the two stage documents.
pub fn write_refit_model<W: Write>(model: &RefitModel, mut out: W) -> Result<()> {
    let d = model.diagnostics();
    writeln!(out, "{REFIT_MODEL_HEADER} {FORMAT_VERSION}")?;
    writeln!(out, "stage2_converged {}", d.stage2_converged)?;
    writeln!(out, "stage2_iterations {}", d.stage2_iterations)?;
    writeln!(out, "stage2_coef_norm {}", fmt_f64(d.stage2_coef_norm))?;
    writeln!(out, "separable {}", d.separable)?;
    write_model(model.stage1(), &mut out)?;
    write_model(model.stage2(), &mut out)?;
    Ok(())
}

pub fn read_refit_model<R: Read>(input: R) -> Result<RefitModel> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        line: 0,
    };
    check_header(&mut lines, REFIT_MODEL_HEADER)?;
    let converged = lines.boolean("stage2_converged")?;
    let iterations = lines
        .field("stage2_iterations")?
        .trim()
        .parse()
        .map_err(|_| lines.malformed("bad iteration count"))?;
    let norm = lines.floats("stage2_coef_norm", 1)?[0];
    let separable = lines.boolean("separable")?;
    let stage1 = read_linear(&mut lines)?;
    let stage2 = read_linear(&mut lines)?;
    RefitModel::new(
        stage1,
        stage2,
        RefitDiagnostics {
            stage2_converged: converged,
            stage2_iterations: iterations,
            stage2_coef_norm: norm,
            separable,
        },
    )
}

pub fn save_refit_model(model: &RefitModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_refit_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_refit_model(path: impl AsRef<Path>) -> Result<RefitModel> {
    read_refit_model(File::open(path)?)
}

/// Either kind of model document.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Linear(LinearAngleModel),
    Refit(RefitModel),
}

impl AnyModel {
    pub fn k(&self) -> usize {
        match self {
            AnyModel::Linear(m) => m.k(),
            AnyModel::Refit(m) => m.k(),
        }
    }

    pub fn label_names(&self) -> Option<&[String]> {
        match self {
            AnyModel::Linear(m) => m.label_names(),
            AnyModel::Refit(m) => m.stage1().label_names(),
        }
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        match self {
            AnyModel::Linear(m) => m.predict_batch(x),
            AnyModel::Refit(m) => m.predict_batch(x),
        }
    }

    pub fn probabilities_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            AnyModel::Linear(m) => m.probabilities_batch(x),
            AnyModel::Refit(m) => m.probabilities_batch(x),
        }
    }
}

/// Loads a model document of either kind, dispatching on its header.
pub fn load_any_model(path: impl AsRef<Path>) -> Result<AnyModel> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with(REFIT_MODEL_HEADER) {
        Ok(AnyModel::Refit(read_refit_model(text.as_bytes())?))
    } else {
        Ok(AnyModel::Linear(read_model(text.as_bytes())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_model::{fit, FitConfig, Penalty};
    use crate::loss::Loss;
    use crate::refit::refit_fit;
    use crate::simplex::SimplexCode;
    use ndarray::array;
    use proptest::prelude::*;

    fn small_model() -> LinearAngleModel {
        let data = read_csv(
            "a,b,cls\n1.0,2.0,red\n-1.5,0.5,blue\n0.3,-2.0,green\n2.0,2.5,red\n-1.0,1.0,blue\n0.1,-1.7,green\n"
                .as_bytes(),
            &LabelColumn::Name("cls".into()),
            true,
        )
        .unwrap();
        let code = SimplexCode::new(3).unwrap();
        fit(&data, &FitConfig::new(Loss::SoftLum, Penalty::L2, 0.1), &code).unwrap()
    }

    #[test]
    fn labels_follow_first_appearance() {
        let d = read_csv("x,y\n0.5,b\n1.5,a\n2.5,b\n".as_bytes(), &LabelColumn::Last, true).unwrap();
        assert_eq!(d.labels(), &[1, 2, 1]);
        assert_eq!(d.label_names().unwrap(), &["b".to_string(), "a".to_string()]);
        let d = read_csv("3,1.0,2.0\n1,0.0,1.0\n".as_bytes(), &LabelColumn::Index(0), false).unwrap();
        assert_eq!(d.p(), 2);
        assert_eq!(d.x()[[1, 1]], 1.0);
        assert_eq!(d.label_name(1), "3");
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let err = read_csv("x,y\n1.0,a\noops,b\n".as_bytes(), &LabelColumn::Last, true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_csv("x,y\n1.0,a\n2.0,\n".as_bytes(), &LabelColumn::Last, true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            read_csv("x,y\n".as_bytes(), &LabelColumn::Last, true),
            Err(Error::EmptyDataset)
        ));
        assert!(read_csv("x,y\n1,a\n2\n".as_bytes(), &LabelColumn::Last, true).is_err());
        assert!(load_csv("/nonexistent/file.csv", &LabelColumn::Last, true).is_err());
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = crate::datagen::ExampleSpec::example2().generate(40, 3).unwrap();
        let path = dir.path().join("d.csv");
        let probs = dir.path().join("p.csv");
        save_csv(&d, &path).unwrap();
        save_true_probs(&d, &probs).unwrap();
        let back = load_true_probs(load_csv(&path, &LabelColumn::Last, true).unwrap(), &probs).unwrap();
        assert_eq!(back.x(), d.x());
        // class numbering may differ; names and probabilities follow the labels
        for i in 0..d.n() {
            assert_eq!(back.label_name(back.labels()[i]), d.label_name(d.labels()[i]));
            let bp = back.true_probs().unwrap();
            let dp = d.true_probs().unwrap();
            for j in 1..=d.k() {
                let name = d.label_name(j);
                let bj = (1..=back.k()).find(|&c| back.label_name(c) == name).unwrap();
                assert_eq!(bp[[i, bj - 1]], dp[[i, j - 1]]);
            }
        }
        // a second save/load cycle is a fixed point
        save_csv(&back, &path).unwrap();
        assert_eq!(load_csv(&path, &LabelColumn::Last, true).unwrap().labels(), back.labels());
    }

    #[test]
    fn known_labels_keep_training_numbering() {
        let known = vec!["b".to_string(), "a".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "x,y\n1.0,a\n2.0,b\n").unwrap();
        let d = load_csv_with_labels(&path, &LabelColumn::Last, true, &known).unwrap();
        assert_eq!(d.labels(), &[2, 1]);
        std::fs::write(&path, "x,y\n1.0,c\n").unwrap();
        assert!(load_csv_with_labels(&path, &LabelColumn::Last, true, &known).is_err());
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let model = small_model();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.coef().iter().zip(model.coef().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.label_names().unwrap(), model.label_names().unwrap());
    }

    #[test]
    fn wrong_k_or_version_is_rejected() {
        let model = small_model();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let wrong_k = text.replacen("k 3", "k 4", 1);
        assert!(matches!(read_model(wrong_k.as_bytes()), Err(Error::Malformed(_))));
        let wrong_version = text.replacen("anglerefit-linear-model 1", "anglerefit-linear-model 9", 1);
        assert!(matches!(read_model(wrong_version.as_bytes()), Err(Error::Version(_))));
        let truncated: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(read_model(truncated.as_bytes()).is_err());
    }

    #[test]
    fn refit_round_trip() {
        let data = read_csv(
            "1,0.1,0.2\n2,1.1,0.9\n3,-1.0,0.4\n1,0.3,0.1\n2,1.4,1.2\n3,-0.8,0.2\n1,-0.2,0.3\n2,0.9,1.3\n3,-1.2,0.1\n"
                .as_bytes(),
            &LabelColumn::Index(0),
            false,
        )
        .unwrap();
        let code = SimplexCode::new(3).unwrap();
        let model = refit_fit(&data, &FitConfig::new(Loss::Logistic, Penalty::L1, 0.05), &code).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refit.txt");
        save_refit_model(&model, &path).unwrap();
        let back = load_refit_model(&path).unwrap();
        assert_eq!(back, model);
        assert!(matches!(load_any_model(&path).unwrap(), AnyModel::Refit(_)));
        save_model(model.stage1(), &path).unwrap();
        assert!(matches!(load_any_model(&path).unwrap(), AnyModel::Linear(_)));
    }

    #[test]
    fn features_without_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "a,b,y\n1,2,x\n3,4,z\n").unwrap();
        let x = load_features(&path, Some(&LabelColumn::Last), true).unwrap();
        assert_eq!(x, array![[1.0, 2.0], [3.0, 4.0]]);
        std::fs::write(&path, "1,2\n3,4\n").unwrap();
        assert_eq!(load_features(&path, None, false).unwrap().dim(), (2, 2));
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt_f64(v);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
