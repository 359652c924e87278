//! Damped Gauss-Newton with Marquardt scaling and box bounds.

use nalgebra::{DMatrix, DVector};

use crate::linalg::lstsq;

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e16;
/// Stationarity test: `‖Jᵀr‖ < GRAD_TOL · ‖J‖ ‖r‖`.
pub(crate) const GRAD_TOL: f64 = 1e-10;
/// A residual this far below the data norm is an exact fit.
const EXACT_TOL: f64 = 1e-13;
/// Minimum to working precision: a full Gauss-Newton step over the free
/// parameters predicts less than this relative decrease of `‖r‖²`. The
/// gradient test alone cannot be met with nonzero residuals, since cost
/// comparisons resolve gradients only down to about `√ε · ‖J‖ ‖r‖`.
const PRED_TOL: f64 = 1e-12;

pub(crate) struct Problem<'a> {
    pub residuals: &'a dyn Fn(&[f64]) -> DVector<f64>,
    pub jacobian: &'a dyn Fn(&[f64]) -> DMatrix<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Norm of the (weighted) data, for the exact-fit test.
    pub data_norm: f64,
}

pub(crate) struct Outcome {
    pub params: Vec<f64>,
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Residual norm after each accepted step, starting from the initial point.
    pub history: Vec<f64>,
    pub note: Option<String>,
}

/// Clamps into the box and snaps values within rounding of a bound onto it,
/// so the bound is recognised as active.
fn clamp(p: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, l), h) in p.iter_mut().zip(lo).zip(hi) {
        *x = x.clamp(*l, *h);
        for b in [*l, *h] {
            if b.is_finite() && (*x - b).abs() <= 1e-14 * b.abs().max(1.0) {
                *x = b;
            }
        }
    }
}

/// Gradient with components that push into an active bound removed.
fn projected_gradient(g: &DVector<f64>, p: &[f64], lo: &[f64], hi: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        g.len(),
        g.iter().enumerate().map(|(i, &gi)| {
            if (p[i] <= lo[i] && gi > 0.0) || (p[i] >= hi[i] && gi < 0.0) {
                0.0
            } else {
                gi
            }
        }),
    )
}

/// `‖r‖² − ‖r + J_F δ‖²` for the Gauss-Newton step `δ` on the free columns `F`.
fn predicted_decrease(r: &DVector<f64>, j: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    let free: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0).collect();
    if free.is_empty() {
        return 0.0;
    }
    let jf = j.select_columns(&free);
    match lstsq(&jf, &(-r)) {
        Ok(d) => r.norm_squared() - (r + jf * d).norm_squared(),
        Err(_) => f64::INFINITY,
    }
}

fn stationary(problem: &Problem, p: &[f64], r: &DVector<f64>, j: &DMatrix<f64>) -> bool {
    let rn = r.norm();
    if rn <= EXACT_TOL * (1.0 + problem.data_norm) {
        return true;
    }
    let g = projected_gradient(&(j.transpose() * r), p, &problem.lower, &problem.upper);
    g.norm() < GRAD_TOL * j.norm() * rn || predicted_decrease(r, j, &g) <= PRED_TOL * rn * rn
}

pub(crate) fn gauss_newton(problem: &Problem, start: &[f64], max_iterations: usize) -> Outcome {
    let mut p = start.to_vec();
    clamp(&mut p, &problem.lower, &problem.upper);
    let mut r = (problem.residuals)(&p);
    let mut j = (problem.jacobian)(&p);
    let mut history = vec![r.norm()];
    let mut lambda = LAMBDA_START;
    let mut iterations = 0;
    let mut note = None;
    let n = p.len();

    loop {
        if stationary(problem, &p, &r, &j) {
            break;
        }
        if iterations >= max_iterations {
            note = Some(format!("stopped after {max_iterations} iterations"));
            break;
        }
        iterations += 1;
        // parameters held at a bound by the gradient stay fixed for this step,
        // so the free ones get their own Gauss-Newton step rather than a
        // clipped coupled one
        let g = projected_gradient(&(j.transpose() * &r), &p, &problem.lower, &problem.upper);
        let full = j.transpose() * &r;
        let held: Vec<bool> = (0..n).map(|c| g[c] == 0.0 && full[c] != 0.0).collect();
        let col_norms: Vec<f64> = (0..n).map(|c| j.column(c).norm()).collect();
        let floor = 1e-12 * col_norms.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let m = j.nrows();
            let mut a = DMatrix::zeros(m + n, n);
            a.rows_mut(0, m).copy_from(&j);
            for c in (0..n).filter(|&c| held[c]) {
                a.column_mut(c).fill(0.0);
            }
            for c in 0..n {
                a[(m + c, c)] = lambda.sqrt() * col_norms[c].max(floor);
            }
            let mut b = DVector::zeros(m + n);
            b.rows_mut(0, m).copy_from(&(-&r));
            let Ok(step) = lstsq(&a, &b) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            clamp(&mut trial, &problem.lower, &problem.upper);
            let rt = (problem.residuals)(&trial);
            if rt.iter().all(|v| v.is_finite()) && rt.norm() < r.norm() {
                let moved = trial.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let size = p.iter().map(|x| x.abs()).fold(0.0, f64::max);
                p = trial;
                r = rt;
                j = (problem.jacobian)(&p);
                history.push(r.norm());
                lambda = (lambda / 10.0).max(LAMBDA_MIN);
                accepted = moved > 1e-15 * size.max(1e-300);
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent is possible from here: the point is a minimum to
            // working precision, or the problem is degenerate
            break;
        }
    }

    let converged = stationary(problem, &p, &r, &j);
    if !converged && note.is_none() {
        note = Some("no further descent possible before the stationarity test was met".into());
    }
    Outcome { params: p, residual: r, jacobian: j, converged, iterations, history, note }
}

/// `σ² (JᵀJ)⁺` with `σ² = ‖r‖²/(m − p)`.
pub(crate) fn covariance(j: &DMatrix<f64>, r: &DVector<f64>) -> DMatrix<f64> {
    let (m, p) = j.shape();
    if p == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sigma2 = if m > p { r.norm_squared() / (m - p) as f64 } else { 0.0 };
    let jtj = j.transpose() * j;
    let svd = jtj.clone().svd(true, true);
    let tol = 1e-14 * svd.singular_values.max().max(1e-300);
    let inv = svd.pseudo_inverse(tol).unwrap_or_else(|_| DMatrix::zeros(p, p));
    let cov = inv * sigma2;
    (&cov + cov.transpose()) * 0.5
}
