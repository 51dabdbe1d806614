//! Penalty selection over the lambda grid.
//!
//! Fold and split membership is keyed on a hash of each row's content and
//! the seed, so reordering the rows of a dataset does not change which
//! observations land together, and training subsets are always presented
//! to the solver in the same canonical order.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::linear_model::{self, FitConfig};
use crate::metrics;
use crate::rng;
use crate::simplex::SimplexCode;

/// Number of parts in the real-data split.
pub const SIX_WAY: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectedBy {
    Holdout,
    Cv,
}

impl fmt::Display for SelectedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectedBy::Holdout => "holdout",
            SelectedBy::Cv => "cv",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub grid: Vec<f64>,
    /// Tune-set (or mean fold) misclassification rate per grid value.
    pub errors: Vec<f64>,
    pub selected_lambda: f64,
    pub selected_by: SelectedBy,
}

impl TuningResult {
    fn from_errors(grid: Vec<f64>, errors: Vec<f64>, selected_by: SelectedBy) -> Self {
        let idx = argmin_prefer_last(&errors);
        TuningResult {
            selected_lambda: grid[idx],
            grid,
            errors,
            selected_by,
        }
    }

    pub fn selected_index(&self) -> usize {
        self.grid
            .iter()
            .position(|&l| l == self.selected_lambda)
            .expect("selected lambda is a grid member")
    }

    /// CSV trace `lambda,error` followed by a `#` summary line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lambda,error")?;
        for (l, e) in self.grid.iter().zip(&self.errors) {
            writeln!(out, "{l:e},{e}")?;
        }
        writeln!(
            out,
            "# selected_lambda={:e},selected_by={},min_error={}",
            self.selected_lambda,
            self.selected_by,
            self.errors[self.selected_index()]
        )?;
        Ok(())
    }
}

/// `{2^-10, 2^-9, ..., 2^10}`, ascending.
pub fn lambda_grid() -> Vec<f64> {
    (-10..=10).map(|e| 2f64.powi(e)).collect()
}

/// Index of the smallest error; among ties, the last (largest lambda on an
/// ascending grid).
pub fn argmin_prefer_last(errors: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate() {
        if e <= errors[best] {
            best = i;
        }
    }
    best
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("lambda grid is empty"));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(invalid("lambda grid values must be finite and >= 0"));
    }
    Ok(())
}

/// Hold-out selection on [`lambda_grid`].
pub fn select_holdout(
    train: &LabeledDataset,
    tune: &LabeledDataset,
    base: &FitConfig,
    code: &SimplexCode,
) -> Result<TuningResult> {
    select_holdout_on_grid(train, tune, base, code, &lambda_grid())
}

/// Fits one model per grid value on `train` and picks the lambda with the
/// lowest misclassification rate on `tune`.
pub fn select_holdout_on_grid(
    train: &LabeledDataset,
    tune: &LabeledDataset,
    base: &FitConfig,
    code: &SimplexCode,
    grid: &[f64],
) -> Result<TuningResult> {
    check_grid(grid)?;
    if train.n() == 0 || tune.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    if train.p() != tune.p() || train.k() != tune.k() {
        return Err(Error::DataValidation(format!(
            "train is {}x{} with {} classes, tune is {}x{} with {} classes",
            train.n(),
            train.p(),
            train.k(),
            tune.n(),
            tune.p(),
            tune.k()
        )));
    }
    let errors = grid
        .par_iter()
        .map(|&lambda| {
            let model = linear_model::fit(train, &base.with_lambda(lambda), code)?;
            metrics::error_rate(&model.predict_batch(tune.x())?, tune.labels())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TuningResult::from_errors(grid.to_vec(), errors, SelectedBy::Holdout))
}

/// Stratified assignment of rows to `parts` groups (0-based part index per
/// row). Within each class rows are ordered by their content key and dealt
/// round-robin, continuing the rotation across classes so group sizes
/// differ by at most one.
pub fn stratified_assignment(data: &LabeledDataset, parts: usize, seed: u64) -> Vec<usize> {
    let keys = row_keys(data, seed);
    let mut assignment = vec![0; data.n()];
    let mut dealt = 0;
    for class in 1..=data.k() {
        let mut rows: Vec<usize> = (0..data.n()).filter(|&i| data.labels()[i] == class).collect();
        rows.sort_by_key(|&i| keys[i]);
        for i in rows {
            assignment[i] = dealt % parts;
            dealt += 1;
        }
    }
    assignment
}

fn row_keys(data: &LabeledDataset, seed: u64) -> Vec<u64> {
    (0..data.n())
        .map(|i| rng::row_key(seed, data.labels()[i], data.row(i).iter().copied()))
        .collect()
}

/// Rows of `data` for which `keep` holds, in canonical key order.
fn canonical_subset(data: &LabeledDataset, keys: &[u64], keep: impl Fn(usize) -> bool) -> LabeledDataset {
    let mut rows: Vec<usize> = (0..data.n()).filter(|&i| keep(i)).collect();
    rows.sort_by_key(|&i| (keys[i], data.labels()[i]));
    data.subset(&rows)
}

/// Stratified k-fold cross-validation on [`lambda_grid`].
pub fn cv_select(
    data: &LabeledDataset,
    folds: usize,
    base: &FitConfig,
    code: &SimplexCode,
    seed: u64,
) -> Result<TuningResult> {
    cv_select_on_grid(data, folds, base, code, seed, &lambda_grid())
}

pub fn cv_select_on_grid(
    data: &LabeledDataset,
    folds: usize,
    base: &FitConfig,
    code: &SimplexCode,
    seed: u64,
    grid: &[f64],
) -> Result<TuningResult> {
    check_grid(grid)?;
    if folds < 2 {
        return Err(invalid(format!("need at least 2 folds, got {folds}")));
    }
    if data.n() < folds {
        return Err(Error::InsufficientData(format!(
            "{} observations for {folds} folds",
            data.n()
        )));
    }
    let assignment = stratified_assignment(data, folds, seed);
    let keys = row_keys(data, seed);
    let splits: Vec<(LabeledDataset, LabeledDataset)> = (0..folds)
        .map(|f| {
            (
                canonical_subset(data, &keys, |i| assignment[i] != f),
                canonical_subset(data, &keys, |i| assignment[i] == f),
            )
        })
        .collect();
    if let Some((train, _)) = splits.iter().find(|(train, _)| train.n() < data.k()) {
        return Err(Error::InsufficientData(format!(
            "a training fold has {} observations for {} classes",
            train.n(),
            data.k()
        )));
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let fold_errors = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, test) = &splits[f];
            let model = linear_model::fit(train, &base.with_lambda(grid[g]), code)?;
            metrics::error_rate(&model.predict_batch(test.x())?, test.labels())
        })
        .collect::<Result<Vec<f64>>>()?;

    let errors = fold_errors
        .chunks(folds)
        .map(|c| c.iter().sum::<f64>() / folds as f64)
        .collect();
    Ok(TuningResult::from_errors(grid.to_vec(), errors, SelectedBy::Cv))
}

/// Stratified split into six near-equal parts; part `test_part` (1..=6)
/// is the test set and the other five form the training set. Both sets are
/// returned in canonical row order.
pub fn split_six(data: &LabeledDataset, test_part: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(1..=SIX_WAY).contains(&test_part) {
        return Err(invalid(format!("test part must be in 1..=6, got {test_part}")));
    }
    if data.n() < SIX_WAY {
        return Err(Error::InsufficientData(format!(
            "{} observations cannot be split six ways",
            data.n()
        )));
    }
    let assignment = stratified_assignment(data, SIX_WAY, seed);
    let keys = row_keys(data, seed);
    let part = test_part - 1;
    Ok((
        canonical_subset(data, &keys, |i| assignment[i] != part),
        canonical_subset(data, &keys, |i| assignment[i] == part),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_model::Penalty;
    use crate::loss::Loss;
    use ndarray::Array2;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn toy(seed: u64, n: usize, k: usize) -> LabeledDataset {
        let mut r = rng::seeded(seed);
        let y: Vec<usize> = (0..n).map(|i| i % k + 1).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            let signal = if j == 0 { y[i] as f64 } else { 0.0 };
            signal + r.random_range(-1.0..1.0)
        });
        LabeledDataset::new(x, y, k).unwrap()
    }

    #[test]
    fn grid_is_powers_of_two() {
        let g = lambda_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0009765625);
        assert_eq!(g[20], 1024.0);
        assert!(g.windows(2).all(|w| w[1] == 2.0 * w[0]));
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        assert_eq!(argmin_prefer_last(&[0.2; 21]), 20);
        let convex: Vec<f64> = (0..21).map(|i| ((i as f64) - 7.0).powi(2)).collect();
        assert_eq!(argmin_prefer_last(&convex), 7);
        assert_eq!(argmin_prefer_last(&[0.3, 0.1, 0.1, 0.2]), 2);
        let r = TuningResult::from_errors(lambda_grid(), vec![0.5; 21], SelectedBy::Holdout);
        assert_eq!(r.selected_lambda, 1024.0);
    }

    #[test]
    fn trace_csv_lists_every_lambda() {
        let r = TuningResult::from_errors(vec![0.5, 1.0, 2.0], vec![0.3, 0.1, 0.2], SelectedBy::Cv);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lambda,error");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("# selected_lambda=1e0,selected_by=cv"));
    }

    #[test]
    fn holdout_selects_a_grid_member() {
        let train = toy(1, 60, 3);
        let tune = toy(2, 60, 3);
        let code = SimplexCode::new(3).unwrap();
        let base = FitConfig::new(Loss::Logistic, Penalty::L1, 1.0);
        let grid = [0.01, 0.1, 1.0, 10.0];
        let r = select_holdout_on_grid(&train, &tune, &base, &code, &grid).unwrap();
        assert_eq!(r.errors.len(), 4);
        assert!(grid.contains(&r.selected_lambda));
        let best = r.errors.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(r.errors[r.selected_index()], best);

        let other = toy(3, 30, 4);
        assert!(select_holdout_on_grid(&train, &other, &base, &code, &grid).is_err());
    }

    #[test]
    fn cv_is_deterministic_and_order_free() {
        let data = toy(4, 48, 3);
        let code = SimplexCode::new(3).unwrap();
        let base = FitConfig::new(Loss::SoftLum, Penalty::L2, 1.0);
        let grid = [0.01, 0.3, 5.0];
        let a = cv_select_on_grid(&data, 4, &base, &code, 11, &grid).unwrap();
        let b = cv_select_on_grid(&data, 4, &base, &code, 11, &grid).unwrap();
        assert_eq!(a, b);

        let mut order: Vec<usize> = (0..data.n()).collect();
        order.shuffle(&mut rng::seeded(99));
        let shuffled = data.subset(&order);
        let c = cv_select_on_grid(&shuffled, 4, &base, &code, 11, &grid).unwrap();
        assert_eq!(a.errors, c.errors);
        assert_eq!(a.selected_lambda, c.selected_lambda);
    }

    #[test]
    fn leave_one_out_runs() {
        let data = toy(5, 9, 3);
        let code = SimplexCode::new(3).unwrap();
        let base = FitConfig::new(Loss::Logistic, Penalty::L1, 1.0);
        let grid = [0.1, 1.0];
        let r = cv_select_on_grid(&data, data.n(), &base, &code, 1, &grid).unwrap();
        assert!(grid.contains(&r.selected_lambda));
        assert!(cv_select_on_grid(&data, 10, &base, &code, 1, &grid).is_err());
        assert!(cv_select_on_grid(&data, 1, &base, &code, 1, &grid).is_err());
    }

    #[test]
    fn stratified_parts_are_balanced() {
        let data = toy(6, 600, 3);
        let a = stratified_assignment(&data, 6, 3);
        let mut sizes = [0usize; 6];
        let mut per_class = [[0usize; 3]; 6];
        for (i, &part) in a.iter().enumerate() {
            sizes[part] += 1;
            per_class[part][data.labels()[i] - 1] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 100), "{sizes:?}");
        for pc in per_class {
            assert!(pc.iter().all(|&c| (33..=34).contains(&c)));
        }
    }

    #[test]
    fn six_way_split_is_a_partition() {
        let data = toy(7, 100, 3);
        let mut seen = vec![0usize; data.n()];
        let mut total_test = 0;
        for part in 1..=6 {
            let (train, test) = split_six(&data, part, 21).unwrap();
            assert_eq!(train.n() + test.n(), data.n());
            assert!((16..=17).contains(&test.n()));
            total_test += test.n();
            for i in 0..test.n() {
                let idx = (0..data.n()).find(|&j| data.row(j) == test.row(i)).unwrap();
                seen[idx] += 1;
            }
        }
        assert_eq!(total_test, data.n());
        assert!(seen.iter().all(|&s| s == 1));

        let (a, b) = split_six(&data, 2, 21).unwrap();
        let (c, d) = split_six(&data, 2, 21).unwrap();
        assert_eq!(a, c);
        assert_eq!(b, d);
        assert!(split_six(&data, 0, 1).is_err());
        assert!(split_six(&data, 7, 1).is_err());
        assert!(split_six(&toy(8, 5, 2), 1, 1).is_err());
    }
}
