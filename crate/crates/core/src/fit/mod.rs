//! Fits of the measured signals: damped Rabi oscillations, number-state
//! populations under a known drive, parametric population laws, and the cat
//! interference fringe.
//!
//! Nonlinear fits use a damped Gauss-Newton iteration with analytic
//! Jacobians; the population decomposition is a linear least-squares problem
//! under `P_n ≥ 0`, `ΣP_n ≤ 1`.

mod constrained;
mod solver;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::lstsq;
use crate::signal::{cat_fringe, DriveParams, SignalTrace};
use crate::{Error, Result};
use solver::{covariance, gauss_newton, Outcome, Problem};

/// Added to `P(1 − P)` in shot-noise weights so rail values stay finite.
pub const WEIGHT_EPS: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Weight residuals by `shots/(P(1 − P) + ε)` when the trace carries shot
    /// counts. Off by default.
    pub weighted: bool,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { weighted: false, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub params: IndexMap<String, f64>,
    /// Standard errors, the square roots of the covariance diagonal.
    pub std_errors: IndexMap<String, f64>,
    /// Row-major, in the order of `params`.
    pub covariance: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Residual norm after each accepted step.
    pub residual_history: Vec<f64>,
    pub active_constraints: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl FitResult {
    fn new(names: &[String], values: &[f64], cov: &DMatrix<f64>, residual_norm: f64) -> Self {
        let params = names.iter().cloned().zip(values.iter().cloned()).collect();
        let std_errors = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), cov[(i, i)].max(0.0).sqrt()))
            .collect();
        let covariance = (0..cov.nrows()).map(|i| cov.row(i).iter().cloned().collect()).collect();
        Self {
            params,
            std_errors,
            covariance,
            residual_norm,
            converged: true,
            iterations: 0,
            residual_history: vec![residual_norm],
            active_constraints: vec![],
            diagnostics: vec![],
        }
    }

    fn from_outcome(names: &[&str], out: Outcome) -> Self {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let cov = covariance(&out.jacobian, &out.residual);
        let mut res = Self::new(&names, &out.params, &cov, out.residual.norm());
        res.converged = out.converged;
        res.iterations = out.iterations;
        res.residual_history = out.history;
        res.diagnostics.extend(out.note);
        res
    }

    /// Value of a named parameter.
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn weights(trace: &SignalTrace, options: &FitOptions) -> Vec<f64> {
    match (&trace.shots, options.weighted) {
        (Some(shots), true) => trace
            .values
            .iter()
            .zip(shots)
            .map(|(&p, &s)| (s as f64 / (p * (1.0 - p) + WEIGHT_EPS)).sqrt())
            .collect(),
        _ => vec![1.0; trace.len()],
    }
}

fn weighted_norm(y: &[f64], w: &[f64]) -> f64 {
    y.iter().zip(w).map(|(a, b)| (a * b).powi(2)).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Damped sinusoid

fn sinusoid(t: f64, p: &[f64]) -> f64 {
    p[3] + p[2] * (2.0 * p[0] * t).cos() * (-p[1] * t).exp()
}

fn sinusoid_grad(t: f64, p: &[f64]) -> [f64; 4] {
    let (s, c) = (2.0 * p[0] * t).sin_cos();
    let e = (-p[1] * t).exp();
    [-2.0 * t * p[2] * s * e, -t * p[2] * c * e, c * e, 1.0]
}

/// Angular frequency of the largest peak of `|Σ y_k e^{-iωt_k}|`, on a grid
/// oversampled 16 times past the `2π/T` resolution, refined parabolically.
fn spectral_peak(t: &[f64], y: &[f64]) -> f64 {
    let span = t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
    let mut sorted = t.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).fold(f64::MAX, f64::min);
    let nyquist = std::f64::consts::PI / min_gap;
    let step = 2.0 * std::f64::consts::PI / span / 16.0;
    let power = |w: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (&tk, &yk) in t.iter().zip(y) {
            let (s, c) = (w * tk).sin_cos();
            re += yk * c;
            im -= yk * s;
        }
        re * re + im * im
    };
    let count = (nyquist / step).ceil() as usize;
    let mut best = (1, 0.0);
    let mut values = vec![0.0; count + 2];
    for (k, v) in values.iter_mut().enumerate().skip(1) {
        *v = power(k as f64 * step);
        if k <= count && *v > best.1 {
            best = (k, *v);
        }
    }
    let k = best.0;
    let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    (k as f64 + shift.clamp(-0.5, 0.5)) * step
}

/// Fits `y = offset + amplitude · cos(2Ωt) e^{−γt}`; parameters are named
/// `Omega`, `gamma`, `amplitude`, `offset`.
pub fn fit_damped_sinusoid(trace: &SignalTrace, options: &FitOptions) -> Result<FitResult> {
    trace.validate()?;
    if trace.len() < 8 {
        return Err(Error::domain(format!("damped-sinusoid fit needs >= 8 points, got {}", trace.len())));
    }
    let t = &trace.abscissa;
    let y = &trace.values;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let omega0 = 0.5 * spectral_peak(t, &centred);
    let span = t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
    if 2.0 * omega0 * span < 2.0 * std::f64::consts::PI {
        return Err(Error::domain(format!(
            "trace spans {:.3} oscillations of the dominant frequency; at least one is needed",
            2.0 * omega0 * span / (2.0 * std::f64::consts::PI)
        )));
    }
    let w = weights(trace, options);

    // amplitude and offset are linear: pick the damping seed with the best
    // linear fit
    let mut start = vec![omega0, 0.0, 0.0, mean];
    let mut best = f64::INFINITY;
    for gamma in [0.0, 0.5 / span, 1.0 / span, 2.0 / span, 4.0 / span] {
        let a = DMatrix::from_fn(t.len(), 2, |i, j| {
            w[i] * if j == 0 { (2.0 * omega0 * t[i]).cos() * (-gamma * t[i]).exp() } else { 1.0 }
        });
        let b = DVector::from_iterator(t.len(), y.iter().zip(&w).map(|(v, wi)| v * wi));
        if let Ok(x) = lstsq(&a, &b) {
            let r = (&a * &x - &b).norm();
            if r < best {
                best = r;
                start = vec![omega0, gamma, x[0], x[1]];
            }
        }
    }

    let residuals = |p: &[f64]| DVector::from_iterator(t.len(), (0..t.len()).map(|i| w[i] * (sinusoid(t[i], p) - y[i])));
    let jacobian = |p: &[f64]| {
        let mut j = DMatrix::zeros(t.len(), 4);
        for i in 0..t.len() {
            let g = sinusoid_grad(t[i], p);
            for k in 0..4 {
                j[(i, k)] = w[i] * g[k];
            }
        }
        j
    };
    let problem = Problem {
        residuals: &residuals,
        jacobian: &jacobian,
        lower: vec![0.0, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY],
        upper: vec![f64::INFINITY; 4],
        data_norm: weighted_norm(y, &w),
    };
    let out = gauss_newton(&problem, &start, options.max_iterations);
    Ok(FitResult::from_outcome(&["Omega", "gamma", "amplitude", "offset"], out))
}

// ---------------------------------------------------------------------------
// Population decomposition

/// Smallest separation of the oscillation frequencies `2Ω_{n,n+1}`, `n ≤ nmax`,
/// with the pair that attains it.
fn closest_pair(drive: &DriveParams, nmax: usize) -> (f64, usize, usize) {
    let mut f: Vec<(f64, usize)> = (0..=nmax).map(|n| (2.0 * drive.rabi_rate(n), n)).collect();
    f.sort_by(|a, b| a.0.total_cmp(&b.0));
    f.windows(2)
        .map(|w| (w[1].0 - w[0].0, w[0].1, w[1].1))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::INFINITY, 0, 0))
}

/// Trace duration needed to separate the closest pair of frequencies:
/// `2π/Δ` with `Δ` the smallest spacing of `2Ω_{n,n+1}`.
pub fn required_duration(drive: &DriveParams, nmax: usize) -> f64 {
    2.0 * std::f64::consts::PI / closest_pair(drive, nmax).0
}

fn population_names(nmax: usize) -> Vec<String> {
    (0..=nmax).map(|n| format!("P{n}")).collect()
}

/// Decomposes a sideband trace into number-state populations `P_0..P_nmax`
/// under a known drive (damping included, not fitted), with `P_n ≥ 0` and
/// `ΣP_n ≤ 1`.
pub fn extract_populations(
    trace: &SignalTrace,
    drive: &DriveParams,
    nmax: usize,
    options: &FitOptions,
) -> Result<FitResult> {
    trace.validate()?;
    drive.validate()?;
    let m = trace.len();
    let n = nmax + 1;
    if m < n {
        return Err(Error::RankDeficient(format!("{m} samples cannot determine {n} populations")));
    }
    let span = trace.abscissa.iter().cloned().fold(f64::MIN, f64::max)
        - trace.abscissa.iter().cloned().fold(f64::MAX, f64::min);
    let (gap, a, b) = closest_pair(drive, nmax);
    let needed = 2.0 * std::f64::consts::PI / gap;
    if !(gap > 0.0) || span < needed {
        return Err(Error::Conditioning(format!(
            "trace duration {span:.4e} is shorter than the {needed:.4e} needed to separate the \
             frequencies of n = {a} and n = {b}; lengthen the trace or lower nmax"
        )));
    }
    let w = weights(trace, options);
    let design = DMatrix::from_fn(m, n, |i, k| w[i] * 0.5 * drive.component(k, trace.abscissa[i]));
    let rhs = DVector::from_iterator(m, trace.values.iter().zip(&w).map(|(y, wi)| wi * (y - 0.5)));

    let free = lstsq(&design, &rhs)?;
    let feasible = |x: &DVector<f64>| x.iter().all(|&v| v >= 0.0) && x.sum() <= 1.0;
    let mut x = if feasible(&free) {
        free
    } else {
        let mut g = DMatrix::zeros(n + 1, n);
        g.fill_diagonal(1.0);
        g.row_mut(n).fill(-1.0);
        let mut h = DVector::zeros(n + 1);
        h[n] = -1.0;
        let rough = constrained::lsi(&design, &rhs, &g, &h)?;
        polish(&design, &rhs, rough)
    };
    // enforce the constraints exactly against rounding
    x.apply(|v| *v = v.max(0.0));
    if x.sum() > 1.0 {
        x /= x.sum();
    }

    let mut active = vec![];
    for k in 0..n {
        if x[k] == 0.0 {
            active.push(format!("P{k} >= 0"));
        }
    }
    let sum_active = (x.sum() - 1.0).abs() <= 1e-12;
    if sum_active {
        active.push("sum <= 1".to_string());
    }

    let resid = &design * &x - &rhs;
    let free_idx: Vec<usize> = (0..n).filter(|&k| x[k] > 0.0).collect();
    let sub_cov = covariance(&design.select_columns(&free_idx), &resid);
    let mut cov = DMatrix::zeros(n, n);
    for (i, &fi) in free_idx.iter().enumerate() {
        for (j, &fj) in free_idx.iter().enumerate() {
            cov[(fi, fj)] = sub_cov[(i, j)];
        }
    }
    let mut res = FitResult::new(&population_names(nmax), x.as_slice(), &cov, resid.norm());
    res.active_constraints = active;
    if sum_active {
        res.diagnostics.push("covariance ignores the active sum constraint".into());
    }
    Ok(res)
}

/// Re-solves the equality-constrained problem on the active set found by the
/// inequality solver, recovering full precision when the polished point stays
/// feasible and is no worse.
fn polish(design: &DMatrix<f64>, rhs: &DVector<f64>, rough: DVector<f64>) -> DVector<f64> {
    let n = rough.len();
    let scale = rough.amax().max(1e-300);
    let free: Vec<usize> = (0..n).filter(|&k| rough[k] > 1e-10 * scale).collect();
    if free.is_empty() {
        return rough;
    }
    let sum_active = rough.sum() >= 1.0 - 1e-10;
    let mut x = DVector::zeros(n);
    let solved = if sum_active {
        // eliminate the last free variable: x_last = 1 − Σ others
        let (last, rest) = free.split_last().expect("nonempty");
        let col_last = design.column(*last).clone_owned();
        let a = DMatrix::from_fn(design.nrows(), rest.len(), |i, j| design[(i, rest[j])] - col_last[i]);
        let b = rhs - &col_last;
        if rest.is_empty() {
            x[*last] = 1.0;
            true
        } else if let Ok(z) = lstsq(&a, &b) {
            for (j, &k) in rest.iter().enumerate() {
                x[k] = z[j];
            }
            x[*last] = 1.0 - z.sum();
            true
        } else {
            false
        }
    } else if let Ok(z) = lstsq(&design.select_columns(&free), rhs) {
        for (j, &k) in free.iter().enumerate() {
            x[k] = z[j];
        }
        true
    } else {
        false
    };
    let ok = solved
        && x.iter().all(|&v| v >= 0.0)
        && x.sum() <= 1.0 + 1e-14
        && (design * &x - rhs).norm() <= (design * &rough - rhs).norm() * (1.0 + 1e-9) + 1e-15;
    if ok {
        x
    } else {
        rough
    }
}

// ---------------------------------------------------------------------------
// Parametric population laws

/// Normalized weights `w_n/Σw` and their derivative in the shape parameter,
/// given unnormalized `w` and `dw`.
fn normalized(w: &[f64], dw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s: f64 = w.iter().sum();
    let ds: f64 = dw.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / s).collect();
    let dp = dw.iter().zip(&p).map(|(d, pi)| (d - pi * ds) / s).collect();
    (p, dp)
}

/// Geometric law on `0..len` with ratio `q = n̄/(n̄+1)`, renormalized;
/// derivative with respect to `n̄`.
pub fn thermal_model(nbar: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let q = nbar / (1.0 + nbar);
    let mut w = vec![1.0; len];
    let mut dw = vec![0.0; len];
    for k in 1..len {
        w[k] = w[k - 1] * q;
        dw[k] = k as f64 * w[k - 1];
    }
    let (p, dp) = normalized(&w, &dw);
    let dq = 1.0 / (1.0 + nbar).powi(2);
    (p, dp.into_iter().map(|d| d * dq).collect())
}

/// Poisson law on `0..len`, renormalized; derivative with respect to `n̄`.
pub fn poisson_model(nbar: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut w = vec![1.0; len];
    let mut dw = vec![0.0; len];
    for k in 1..len {
        w[k] = w[k - 1] * nbar / k as f64;
        dw[k] = w[k - 1];
    }
    normalized(&w, &dw)
}

/// Squeezed-vacuum law on the even entries of `0..len`, renormalized;
/// derivative with respect to `β`. Entry `m` of the output is `P_{2m}`.
pub fn squeezed_model(beta: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let r = 0.5 * beta.ln();
    let th = r.tanh();
    let t = th * th;
    let evens = len.div_ceil(2);
    let mut c = vec![1.0; evens];
    let mut w = vec![1.0; evens];
    let mut dw = vec![0.0; evens];
    for m in 1..evens {
        // (2m)!/(4^m (m!)²)
        c[m] = c[m - 1] * (2 * m - 1) as f64 / (2 * m) as f64;
        w[m] = w[m - 1] * t;
        dw[m] = m as f64 * c[m] * w[m - 1];
    }
    for m in 0..evens {
        w[m] *= c[m];
    }
    let (p, dp) = normalized(&w, &dw);
    // dt/dβ = 2 tanh r sech² r · 1/(2β)
    let dt = th * (1.0 - t) / beta;
    (p, dp.into_iter().map(|d| d * dt).collect())
}

/// Validates and renormalizes to unit sum; the laws are normalized over the
/// same support.
fn normalized_input(pops: &[f64]) -> Result<Vec<f64>> {
    if pops.is_empty() {
        return Err(Error::domain("populations are empty"));
    }
    if pops.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("populations must be finite"));
    }
    let total: f64 = pops.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain(format!("populations sum to {total}")));
    }
    Ok(pops.iter().map(|p| p / total).collect())
}

fn mean_n(pops: &[f64]) -> f64 {
    pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// Ceiling for the distribution parameters. The renormalized laws flatten
/// out as the parameter grows, so a fit that reaches this is running off to
/// infinity rather than converging.
const PARAM_CEILING: f64 = 1e8;

fn one_param_fit(
    name: &str,
    data: &[f64],
    model: &dyn Fn(f64) -> (Vec<f64>, Vec<f64>),
    start: f64,
    lower: f64,
    options: &FitOptions,
) -> FitResult {
    let residuals = |p: &[f64]| {
        let (m, _) = model(p[0]);
        DVector::from_iterator(data.len(), m.iter().zip(data).map(|(a, b)| a - b))
    };
    let jacobian = |p: &[f64]| {
        let (_, d) = model(p[0]);
        DMatrix::from_column_slice(data.len(), 1, &d)
    };
    let problem = Problem {
        residuals: &residuals,
        jacobian: &jacobian,
        lower: vec![lower],
        upper: vec![PARAM_CEILING],
        data_norm: data.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    let mut res = FitResult::from_outcome(&[name], gauss_newton(&problem, &[start], options.max_iterations));
    if res.params[name] >= PARAM_CEILING * (1.0 - 1e-9) {
        res.converged = false;
        res.active_constraints.push(format!("{name} <= {PARAM_CEILING:e}"));
        res.diagnostics.push(format!(
            "{name} ran to its ceiling: the populations do not follow this law on the supplied support"
        ));
    }
    res
}

/// Thermal fit (input renormalized to unit sum): geometric law renormalized over the supplied support,
/// started from `n̄₀ = Σ n P_n`. Parameter `nbar`.
pub fn fit_thermal(pops: &[f64], options: &FitOptions) -> Result<FitResult> {
    let pops = normalized_input(pops)?;
    let len = pops.len();
    Ok(one_param_fit("nbar", &pops, &|x| thermal_model(x, len), mean_n(&pops), 0.0, options))
}

/// Poisson fit over the supplied support, started from `n̄₀ = Σ n P_n`.
/// Parameter `nbar`.
pub fn fit_poissonian(pops: &[f64], options: &FitOptions) -> Result<FitResult> {
    let pops = normalized_input(pops)?;
    let len = pops.len();
    Ok(one_param_fit("nbar", &pops, &|x| poisson_model(x, len), mean_n(&pops), 0.0, options))
}

/// Squeezed-vacuum fit on the even populations. Parameter `beta = e^{2r}`,
/// started from `n̄₀ = sinh² r`.
pub fn fit_squeezed(pops: &[f64], options: &FitOptions) -> Result<FitResult> {
    let pops = normalized_input(pops)?;
    let even: Vec<f64> = pops.iter().step_by(2).cloned().collect();
    let odd: f64 = pops.iter().skip(1).step_by(2).sum();
    let len = pops.len();
    let beta0 = (2.0 * mean_n(&pops).sqrt().asinh()).exp();
    let mut res = one_param_fit("beta", &even, &|b| squeezed_model(b, len), beta0, 1.0, options);
    if odd > 0.1 {
        res.diagnostics.push(format!("odd populations carry {odd:.3} of the weight"));
    }
    Ok(res)
}

// ---------------------------------------------------------------------------
// Cat fringe

fn cat_grad(phi: f64, alpha: f64, c: f64) -> [f64; 2] {
    let a2 = alpha * alpha;
    let e = (-a2 * (1.0 - phi.cos())).exp();
    let (ss, cs) = (a2 * phi.sin()).sin_cos();
    let de = -2.0 * alpha * (1.0 - phi.cos()) * e;
    let ds = 2.0 * alpha * phi.sin();
    [-0.5 * c * (de * cs - e * ss * ds), -0.5 * e * cs]
}

/// `α` at which the fringe `e^{−α²(1−cos φ)} cos(α² sin φ)` first falls to
/// one half at `φ = phi_half`, by bisection.
fn alpha_from_half_width(phi_half: f64) -> Option<f64> {
    let s = phi_half.sin();
    if !(s > 0.0) {
        return None;
    }
    let g = |a: f64| (-a * a * (1.0 - phi_half.cos())).exp() * (a * a * s).cos() - 0.5;
    let (mut lo, mut hi) = (0.0, (std::f64::consts::FRAC_PI_2 / s).sqrt());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Fits the cat fringe `½[1 − c e^{−α²(1−cos φ)} cos(α² sin φ)]` over a trace
/// in `φ`. Parameters `alpha` and `c`.
///
/// `c` starts from the depth at the sample nearest `φ = 0` and `α` from the
/// half-depth width of the central fringe. Because the fringe oscillates at
/// `α²` in `φ`, the start is then refined by scanning `α` with `c` solved
/// linearly, which keeps coarse grids from locking onto an alias.
pub fn fit_cat(trace: &SignalTrace, options: &FitOptions) -> Result<FitResult> {
    use std::f64::consts::{PI, TAU};
    trace.validate()?;
    let mut wrapped: Vec<f64> = trace.abscissa.iter().map(|p| p.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    wrapped.dedup();
    let gap = wrapped
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(wrapped[0] + TAU - wrapped[wrapped.len() - 1]))
        .fold(0.0, f64::max);
    if wrapped.len() < 8 || gap > TAU / 8.0 {
        return Err(Error::domain("cat fit needs phase samples covering [0, 2π) with gaps below π/4"));
    }
    let phis = &trace.abscissa;
    let y = &trace.values;
    let w = weights(trace, options);
    let dist0 = |p: f64| {
        let r = p.rem_euclid(TAU);
        r.min(TAU - r)
    };
    let i0 = (0..phis.len()).min_by(|&a, &b| dist0(phis[a]).total_cmp(&dist0(phis[b]))).expect("nonempty");
    let c0 = (1.0 - 2.0 * y[i0]).clamp(0.0, 1.0);
    let names = ["alpha", "c"];

    if c0 < 1e-9 && y.iter().all(|v| (v - 0.5).abs() < 1e-9) {
        let r = DVector::from_iterator(y.len(), y.iter().zip(&w).map(|(v, wi)| wi * (v - 0.5)));
        let j = DMatrix::from_fn(y.len(), 2, |i, k| w[i] * cat_grad(phis[i], 0.0, 0.0)[k]);
        let mut res = FitResult::from_outcome(
            &names,
            Outcome {
                params: vec![0.0, 0.0],
                residual: r.clone(),
                jacobian: j,
                converged: false,
                iterations: 0,
                history: vec![r.norm()],
                note: None,
            },
        );
        res.diagnostics
            .push("flat trace: contrast is zero, so alpha is not identifiable".into());
        return Ok(res);
    }

    // half-depth point of the central fringe, linearly interpolated
    let mut by_dist: Vec<(f64, f64)> = phis.iter().zip(y).map(|(&p, &v)| (dist0(p), 1.0 - 2.0 * v)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * c0;
    let phi_half = by_dist.windows(2).find(|w| w[1].1 <= half).map(|w| {
        let (x0, v0, x1, v1) = (w[0].0, w[0].1, w[1].0, w[1].1);
        if (v0 - v1).abs() > 0.0 {
            x0 + (v0 - half) * (x1 - x0) / (v0 - v1)
        } else {
            x1
        }
    });
    let width_alpha = phi_half.and_then(alpha_from_half_width).unwrap_or(1.0);

    // profile over α with c eliminated linearly (clamped to [0, 1])
    let profile = |a: f64| -> (f64, f64) {
        let g: Vec<f64> = phis.iter().map(|&p| -0.5 * cat_fringe_shape(p, a)).collect();
        let num: f64 = (0..y.len()).map(|i| w[i] * w[i] * g[i] * (y[i] - 0.5)).sum();
        let den: f64 = (0..y.len()).map(|i| w[i] * w[i] * g[i] * g[i]).sum();
        let c = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
        let r: f64 = (0..y.len()).map(|i| (w[i] * (0.5 + c * g[i] - y[i])).powi(2)).sum();
        (r, c)
    };
    let alpha_max = (PI / (gap * 0.5)).sqrt();
    let mut start = (width_alpha, profile(width_alpha));
    let scan = 4000;
    for k in 1..=scan {
        let a = alpha_max * k as f64 / scan as f64;
        let pr = profile(a);
        if pr.0 < start.1 .0 {
            start = (a, pr);
        }
    }

    let residuals = |p: &[f64]| {
        DVector::from_iterator(y.len(), (0..y.len()).map(|i| w[i] * (cat_fringe(phis[i], p[0], p[1]) - y[i])))
    };
    let jacobian = |p: &[f64]| {
        DMatrix::from_fn(y.len(), 2, |i, k| w[i] * cat_grad(phis[i], p[0], p[1])[k])
    };
    let problem = Problem {
        residuals: &residuals,
        jacobian: &jacobian,
        lower: vec![0.0, 0.0],
        upper: vec![f64::INFINITY, 1.0],
        data_norm: weighted_norm(y, &w),
    };
    let out = gauss_newton(&problem, &[start.0, start.1 .1], options.max_iterations);
    Ok(FitResult::from_outcome(&names, out))
}

/// `e^{−α²(1−cos φ)} cos(α² sin φ)`
fn cat_fringe_shape(phi: f64, alpha: f64) -> f64 {
    1.0 - 2.0 * cat_fringe(phi, alpha, 1.0)
}
