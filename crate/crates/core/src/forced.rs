//! Coherent states driven by a spatially uniform force.
//!
//! In the interaction picture a uniform force only translates a coherent
//! state and adds a phase: `|Ψ(t)⟩ = e^{iθ(t)}|α(t)⟩` with
//!
//! ```text
//! α(t) = α(0) + i J(t),          J(t) = ∫₀ᵗ f(t') e^{iω t'} dt'
//! θ(t) = θ(0) + Re α(0) Re J(t) + Im α(0) Im J(t)
//!        + ∫₀ᵗ dt' f(t') ∫₀^{t'} dt'' f(t'') sin ω(t' − t'')
//! ```
//!
//! where `f = x₀F/ħ` (rad/s). The double integral is rewritten as
//! `∫ f(t') Im[e^{iωt'} J*(t')] dt'`, which is exact per piece for
//! piecewise-constant forces and a single adaptive quadrature for sinusoids.
//!
//! [`numeric_propagate`] integrates the Schrödinger equation directly on a
//! truncated basis and is used to check the closed forms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fock::{coherent_amplitudes, StateVector};
use crate::quad;
use crate::{Error, Result, C64};

/// Absolute tolerance of the adaptive quadrature used for sinusoidal forces.
pub const QUAD_TOL: f64 = 1e-12;

/// Allowed drift of `‖ψ‖²` over a numerical propagation.
pub const NORM_DRIFT_TOL: f64 = 1e-9;

/// Force in frequency units, `f(t) = x₀F(t)/ħ` (rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForceProfile {
    /// `f(t) = f0` for all `t ≥ 0`.
    Constant { f0: f64 },
    /// `f(t) = f0 cos(omega_d t + phase)`.
    Sinusoid {
        f0: f64,
        omega_d: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `f(t) = values[k]` on `[breakpoints[k], breakpoints[k+1])`, zero
    /// outside the table.
    Table { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl ForceProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            ForceProfile::Constant { f0 } if !f0.is_finite() => Err(Error::domain("constant force must be finite")),
            ForceProfile::Sinusoid { f0, omega_d, phase }
                if !(f0.is_finite() && omega_d.is_finite() && phase.is_finite()) =>
            {
                Err(Error::domain("sinusoid parameters must be finite"))
            }
            ForceProfile::Table { breakpoints, values } => {
                if breakpoints.len() != values.len() + 1 {
                    return Err(Error::domain(format!(
                        "table needs len(breakpoints) = len(values) + 1, got {} and {}",
                        breakpoints.len(),
                        values.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::domain("table breakpoints must be strictly increasing"));
                }
                if breakpoints.iter().chain(values).any(|x| !x.is_finite()) {
                    return Err(Error::domain("table entries must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Uniform-step table starting at `t = 0`.
    pub fn uniform_table(dt: f64, values: Vec<f64>) -> Self {
        let breakpoints = (0..=values.len()).map(|k| k as f64 * dt).collect();
        ForceProfile::Table { breakpoints, values }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ForceProfile::Constant { f0 } => *f0,
            ForceProfile::Sinusoid { f0, omega_d, phase } => f0 * (omega_d * t + phase).cos(),
            ForceProfile::Table { breakpoints, values } => {
                if t < breakpoints[0] || t >= breakpoints[breakpoints.len() - 1] {
                    return 0.0;
                }
                let k = breakpoints.partition_point(|&b| b <= t) - 1;
                values[k]
            }
        }
    }

    /// Times in `(0, t)` where the force may jump.
    fn breaks_before(&self, t: f64) -> Vec<f64> {
        match self {
            ForceProfile::Table { breakpoints, .. } => {
                breakpoints.iter().cloned().filter(|&b| b > 0.0 && b < t).collect()
            }
            _ => vec![],
        }
    }

    /// Constant pieces clipped to `[0, t]`.
    fn pieces(&self, t: f64) -> Vec<(f64, f64, f64)> {
        match self {
            ForceProfile::Constant { f0 } => vec![(0.0, t, *f0)],
            ForceProfile::Table { breakpoints, values } => breakpoints
                .windows(2)
                .zip(values)
                .filter_map(|(w, &f)| {
                    let a = w[0].max(0.0);
                    let b = w[1].min(t);
                    (b > a).then_some((a, b, f))
                })
                .collect(),
            ForceProfile::Sinusoid { .. } => unreachable!("sinusoid is not piecewise constant"),
        }
    }
}

/// `α` and global phase `θ` of `e^{iθ}|α⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentLabel {
    pub alpha: C64,
    pub theta: f64,
}

impl CoherentLabel {
    pub fn new(alpha: C64, theta: f64) -> Self {
        Self { alpha, theta }
    }

    /// `e^{iθ}|α⟩` on `dim` states, renormalized over the truncation.
    pub fn state(&self, dim: usize) -> StateVector {
        let ph = C64::from_polar(1.0, self.theta);
        StateVector::from_amplitudes(coherent_amplitudes(self.alpha, dim).into_iter().map(|z| z * ph).collect())
            .expect("coherent amplitudes have nonzero norm")
    }
}

/// Maps an angle onto `(−π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let x = theta.rem_euclid(2.0 * PI);
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

/// `∫₀ᴸ e^{iνs} ds`, stable as `νL → 0`.
pub(crate) fn exp_integral(nu: f64, len: f64) -> C64 {
    let h = 0.5 * nu * len;
    let sinc = if h.abs() < 1e-4 { 1.0 - h * h / 6.0 + h.powi(4) / 120.0 } else { h.sin() / h };
    C64::from_polar(len * sinc, h)
}

/// `L − sin(ωL)/ω`, stable as `ωL → 0`.
fn ramp_minus_sine(omega: f64, len: f64) -> f64 {
    let x = omega * len;
    if x.abs() < 1e-2 {
        let x2 = x * x;
        len * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        len - x.sin() / omega
    }
}

/// Running `J(t)` and double-integral phase for a piecewise-constant force.
#[derive(Clone, Copy, Debug)]
pub struct PieceIntegrator {
    pub omega: f64,
    pub time: f64,
    /// `J(t) = ∫₀ᵗ f e^{iωt'} dt'`
    pub drive: C64,
    /// `∫₀ᵗ dt' f(t') ∫₀^{t'} dt'' f(t'') sin ω(t' − t'')`
    pub phase: f64,
}

impl PieceIntegrator {
    pub fn new(omega: f64) -> Self {
        Self { omega, time: 0.0, drive: C64::new(0.0, 0.0), phase: 0.0 }
    }

    /// Advances over `[time, time + len)` with constant force `f`.
    pub fn advance(&mut self, f: f64, len: f64) {
        self.advance_from(self.time, f, len);
    }

    /// Advances over `[start, start + len)`; `start ≥ time`, force zero in
    /// between.
    pub fn advance_from(&mut self, start: f64, f: f64, len: f64) {
        if f != 0.0 {
            let w = self.omega;
            let seg = C64::from_polar(1.0, w * start) * exp_integral(w, len);
            self.phase += f * ((self.drive.conj() * seg).im + f / w * ramp_minus_sine(w, len));
            self.drive += seg * f;
        }
        self.time = start + len;
    }
}

fn check_inputs(force: &ForceProfile, t: f64, omega_x: f64) -> Result<()> {
    force.validate()?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    if !(omega_x > 0.0) {
        return Err(Error::domain(format!("omega_x must be > 0, got {omega_x}")));
    }
    Ok(())
}

/// `J(t) = ∫₀ᵗ f(t') e^{iω_x t'} dt'` in closed form.
pub fn drive_integral(force: &ForceProfile, t: f64, omega_x: f64) -> C64 {
    match force {
        ForceProfile::Sinusoid { f0, omega_d, phase } => {
            let plus = C64::from_polar(1.0, *phase) * exp_integral(omega_x + omega_d, t);
            let minus = C64::from_polar(1.0, -phase) * exp_integral(omega_x - omega_d, t);
            (plus + minus) * (0.5 * f0)
        }
        _ => {
            let mut acc = PieceIntegrator::new(omega_x);
            for (a, b, f) in force.pieces(t) {
                acc.advance_from(a, f, b - a);
            }
            acc.drive
        }
    }
}

/// Label-independent part of `θ(t) − θ(0)`.
pub fn double_integral_phase(force: &ForceProfile, t: f64, omega_x: f64) -> f64 {
    match force {
        ForceProfile::Sinusoid { .. } => {
            let integrand = |s: f64| {
                let j = drive_integral(force, s, omega_x);
                force.value(s) * (C64::from_polar(1.0, omega_x * s) * j.conj()).im
            };
            // one quadrature panel per drive period keeps the bisection shallow
            let period = 2.0 * PI / omega_x;
            let panels = (t / period).ceil().max(1.0) as usize;
            let h = t / panels as f64;
            (0..panels)
                .map(|k| quad::integrate(integrand, k as f64 * h, (k + 1) as f64 * h, QUAD_TOL / panels as f64))
                .sum()
        }
        _ => {
            let mut acc = PieceIntegrator::new(omega_x);
            for (a, b, f) in force.pieces(t) {
                acc.advance_from(a, f, b - a);
            }
            acc.phase
        }
    }
}

pub fn alpha_of_t(alpha0: C64, force: &ForceProfile, t: f64, omega_x: f64) -> Result<C64> {
    check_inputs(force, t, omega_x)?;
    Ok(alpha0 + C64::new(0.0, 1.0) * drive_integral(force, t, omega_x))
}

/// `θ(t)`, not wrapped.
pub fn theta_of_t(label0: &CoherentLabel, force: &ForceProfile, t: f64, omega_x: f64) -> Result<f64> {
    check_inputs(force, t, omega_x)?;
    let j = drive_integral(force, t, omega_x);
    Ok(label0.theta + label0.alpha.re * j.re + label0.alpha.im * j.im + double_integral_phase(force, t, omega_x))
}

/// `e^{iθ(0)}|α(0)⟩ → e^{iθ(t)}|α(t)⟩`, with `θ` wrapped to `(−π, π]`.
pub fn propagate_label(label0: &CoherentLabel, force: &ForceProfile, t: f64, omega_x: f64) -> Result<CoherentLabel> {
    let alpha = alpha_of_t(label0.alpha, force, t, omega_x)?;
    let theta = theta_of_t(label0, force, t, omega_x)?;
    Ok(CoherentLabel { alpha, theta: wrap_phase(theta) })
}

/// `dψ/dt = i f(t)(a e^{−iωt} + a† e^{iωt}) ψ`
fn rhs(psi: &[C64], t: f64, force: &ForceProfile, omega_x: f64, out: &mut [C64]) {
    let f = force.value(t);
    let d = psi.len();
    if f == 0.0 {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        return;
    }
    let down = C64::from_polar(f, -omega_x * t) * C64::new(0.0, 1.0);
    let up = C64::from_polar(f, omega_x * t) * C64::new(0.0, 1.0);
    for n in 0..d {
        let mut v = C64::new(0.0, 0.0);
        if n + 1 < d {
            v += down * ((n + 1) as f64).sqrt() * psi[n + 1];
        }
        if n > 0 {
            v += up * (n as f64).sqrt() * psi[n - 1];
        }
        out[n] = v;
    }
}

/// Classical fourth-order Runge-Kutta on the truncated basis of `psi0`.
///
/// Steps never straddle a table breakpoint; each smooth segment is cut into
/// equal steps no longer than `dt`. Fails with [`Error::StepSize`] if the
/// norm drifts by more than [`NORM_DRIFT_TOL`].
pub fn numeric_propagate(
    psi0: &StateVector,
    force: &ForceProfile,
    t: f64,
    dt: f64,
    omega_x: f64,
) -> Result<StateVector> {
    Ok(numeric_propagate_at(psi0, force, &[t], dt, omega_x)?.pop().expect("one time requested"))
}

/// [`numeric_propagate`] sampled at each of the nondecreasing `times` in a
/// single pass.
pub fn numeric_propagate_at(
    psi0: &StateVector,
    force: &ForceProfile,
    times: &[f64],
    dt: f64,
    omega_x: f64,
) -> Result<Vec<StateVector>> {
    let t_end = times.last().copied().unwrap_or(0.0);
    check_inputs(force, t_end, omega_x)?;
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| !(t >= 0.0)) {
        return Err(Error::domain("sample times must be nondecreasing and >= 0"));
    }
    let d = psi0.dim();
    let mut psi = psi0.amplitudes().to_vec();
    let mut k1 = vec![C64::new(0.0, 0.0); d];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();

    let mut edges = vec![0.0];
    edges.extend(force.breaks_before(t_end));
    edges.extend_from_slice(times);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut emit = |psi: &[C64], at: f64, out: &mut Vec<StateVector>| -> Result<()> {
        while next < times.len() && times[next] <= at {
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            let drift = (norm - psi0.norm_sqr()).abs();
            if drift > NORM_DRIFT_TOL {
                return Err(Error::StepSize(format!(
                    "norm drifted by {drift:.3e} (> {NORM_DRIFT_TOL:e}); reduce dt or enlarge the basis"
                )));
            }
            out.push(StateVector::from_amplitudes(psi.to_vec())?);
            next += 1;
        }
        Ok(())
    };
    emit(&psi, 0.0, &mut out)?;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let steps = ((b - a) / dt).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        for s in 0..steps {
            let t0 = a + s as f64 * h;
            // stage times stay inside [a, b): evaluate the force at the
            // segment interior so table lookups never hit the next piece
            let tm = t0 + 0.5 * h;
            let t1 = if s + 1 == steps { b - 1e-15 * b.abs().max(1.0) } else { t0 + h };
            rhs(&psi, t0, force, omega_x, &mut k1);
            for i in 0..d {
                tmp[i] = psi[i] + k1[i] * (0.5 * h);
            }
            rhs(&tmp, tm, force, omega_x, &mut k2);
            for i in 0..d {
                tmp[i] = psi[i] + k2[i] * (0.5 * h);
            }
            rhs(&tmp, tm, force, omega_x, &mut k3);
            for i in 0..d {
                tmp[i] = psi[i] + k3[i] * h;
            }
            rhs(&tmp, t1, force, omega_x, &mut k4);
            for i in 0..d {
                psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        emit(&psi, b, &mut out)?;
    }
    Ok(out)
}
