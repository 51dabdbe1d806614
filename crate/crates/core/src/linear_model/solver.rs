//! Accelerated proximal gradient (FISTA) with backtracking and
//! objective-based momentum restart.

use ndarray::Array2;

use super::{FitConfig, Params, Problem};

/// How a fit ended.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Final penalized objective on the (standardized) training design.
    pub objective: f64,
    /// Objective after every accepted iterate; non-increasing.
    pub trace: Vec<f64>,
    pub restarts: usize,
    pub final_step: f64,
}

struct Iterate {
    params: Params,
    fwd: Array2<f64>,
    smooth: f64,
}

impl Iterate {
    fn total(&self, problem: &Problem<'_>) -> f64 {
        self.smooth + problem.nonsmooth_value(&self.params)
    }
}

fn axpy_params(x: &Params, y: &Params, beta: f64) -> Params {
    // x + beta (x - y)
    Params {
        coef: &x.coef + &((&x.coef - &y.coef) * beta),
        intercept: &x.intercept + &((&x.intercept - &y.intercept) * beta),
    }
}

fn inner(a: &Params, b: &Params) -> f64 {
    (&a.coef * &b.coef).sum() + a.intercept.dot(&b.intercept)
}

fn sq_dist(a: &Params, b: &Params) -> f64 {
    let dc = &a.coef - &b.coef;
    let di = &a.intercept - &b.intercept;
    (&dc * &dc).sum() + di.dot(&di)
}

pub(crate) fn accelerated_proximal_gradient(
    problem: &Problem<'_>,
    init: Params,
    config: &FitConfig,
) -> (Params, FitDiagnostics) {
    let mut step = 1.0 / problem.lipschitz_estimate().max(1e-12);

    let fwd = problem.forward(&init);
    let smooth = problem.smooth_value(&init, &fwd);
    let mut current = Iterate {
        params: init,
        fwd,
        smooth,
    };
    let mut current_total = current.total(problem);

    // extrapolation point
    let mut y_params = current.params.clone();
    let mut y_fwd = current.fwd.clone();
    let mut y_smooth = current.smooth;
    let mut theta = 1.0_f64;

    let mut diag = FitDiagnostics::default();

    for iter in 1..=config.max_iterations {
        diag.iterations = iter;
        let grad = problem.smooth_gradient(&y_params, &y_fwd);

        // backtracking on the quadratic upper model around y
        let candidate = loop {
            let mut params = Params {
                coef: &y_params.coef - &(&grad.coef * step),
                intercept: &y_params.intercept - &(&grad.intercept * step),
            };
            problem.prox(&mut params, step);
            let fwd = problem.forward(&params);
            let smooth = problem.smooth_value(&params, &fwd);
            let diff = Params {
                coef: &params.coef - &y_params.coef,
                intercept: &params.intercept - &y_params.intercept,
            };
            let model = y_smooth + inner(&grad, &diff) + sq_dist(&params, &y_params) / (2.0 * step);
            if smooth <= model + 1e-12 * model.abs().max(1.0) || step < 1e-20 {
                break Iterate { params, fwd, smooth };
            }
            step *= config.line_search_shrink;
        };
        let candidate_total = candidate.total(problem);

        if !(candidate_total <= current_total) {
            if theta == 1.0 {
                // a plain proximal step from the current point failed to descend:
                // we are at the floating-point floor
                diag.converged = true;
                break;
            }
            diag.restarts += 1;
            theta = 1.0;
            y_params = current.params.clone();
            y_fwd = current.fwd.clone();
            y_smooth = current.smooth;
            continue;
        }

        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        theta = theta_next;

        y_params = axpy_params(&candidate.params, &current.params, beta);
        y_fwd = &candidate.fwd + &((&candidate.fwd - &current.fwd) * beta);
        y_smooth = problem.smooth_value(&y_params, &y_fwd);

        let change = (current_total - candidate_total) / current_total.abs().max(1e-300);
        current = candidate;
        current_total = candidate_total;
        diag.trace.push(current_total);

        if change < config.tolerance {
            diag.converged = true;
            break;
        }
    }

    diag.objective = current_total;
    diag.final_step = step;
    (current.params, diag)
}
