//! Dephasing of `(|α₁⟩ + |α₂⟩)/√2` under a white-noise uniform force.
//!
//! Both components feel the same force, so `Δα = α₁ − α₂` never changes and
//! only the relative phase wanders:
//!
//! ```text
//! Δθ(t) = ½[Δα J*(t) + Δα* J(t)],   J(t) = ∫₀ᵗ f e^{iω_x t'} dt'
//! ```
//!
//! For `⟨f(t)f(t')⟩ = C δ(t − t')` the ensemble obeys `⟨Δθ²⟩ ≈ ½C|Δα|²t`,
//! `⟨|α_i(t) − α_i(0)|²⟩ = Ct` and `⟨e^{iΔθ}⟩ = e^{−C|Δα|²t/4}`; this module
//! estimates all three by Monte Carlo.
//!
//! The force is piecewise constant with independent `N(0, C/dt)` values per
//! step, and the integrals over each step are taken exactly. Trajectory `i`
//! draws from stream `i` of the configured seed, and trajectories are reduced
//! in fixed-size chunks combined in index order, so results do not depend on
//! the number of threads.

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forced::{exp_integral, ForceProfile};
use crate::{rng, Error, Result, C64};

/// Trajectories per reduction chunk.
const CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// White-noise strength `C` in `⟨f(t)f(t+τ)⟩ = C δ(τ)` (rad²/s).
    pub c: f64,
    pub dt: f64,
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// `α₁ − α₂`; the components start at `±Δα/2`.
    pub delta_alpha: C64,
    pub omega_x: f64,
    /// Statistics are recorded every `record_every` steps (and at `t = 0`).
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::domain(format!("noise strength C must be >= 0, got {}", self.c)));
        }
        if !(self.dt > 0.0) || !(self.omega_x > 0.0) {
            return Err(Error::domain("dt and omega_x must be > 0"));
        }
        if !(self.dt * self.omega_x < 0.1) {
            return Err(Error::domain(format!(
                "dt * omega_x = {} must be < 0.1 to resolve the oscillation",
                self.dt * self.omega_x
            )));
        }
        if self.trajectories == 0 || self.steps == 0 || self.record_every == 0 {
            return Err(Error::domain("steps, trajectories and record_every must be >= 1"));
        }
        Ok(())
    }

    pub fn alpha1_0(&self) -> C64 {
        self.delta_alpha * 0.5
    }

    pub fn alpha2_0(&self) -> C64 {
        -self.delta_alpha * 0.5
    }

    /// Recorded times: `0, k · record_every · dt`.
    pub fn record_times(&self) -> Vec<f64> {
        (0..=self.steps / self.record_every)
            .map(|k| (k * self.record_every) as f64 * self.dt)
            .collect()
    }
}

/// Per-step force values of trajectory `index`: i.i.d. `N(0, C/dt)`.
pub fn sample_force_values(config: &NoiseConfig, index: u64) -> Vec<f64> {
    if config.c == 0.0 {
        return vec![0.0; config.steps];
    }
    let normal = Normal::new(0.0, (config.c / config.dt).sqrt()).expect("finite positive sigma");
    let mut r = rng::stream(config.seed, index);
    (0..config.steps).map(|_| normal.sample(&mut r)).collect()
}

/// Force of trajectory `index` as a piecewise-constant profile on `[0, steps·dt)`.
pub fn sample_force(config: &NoiseConfig, index: u64) -> ForceProfile {
    ForceProfile::uniform_table(config.dt, sample_force_values(config, index))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub dtheta: f64,
    pub alpha1: C64,
    pub alpha2: C64,
}

/// Per-step quantities shared by every trajectory on the same time grid.
struct StepTable {
    seg: Vec<C64>,
}

impl StepTable {
    fn new(config: &NoiseConfig) -> Self {
        let e = exp_integral(config.omega_x, config.dt);
        let seg = (0..config.steps)
            .map(|k| C64::from_polar(1.0, config.omega_x * k as f64 * config.dt) * e)
            .collect();
        Self { seg }
    }
}

/// Accumulates `J(t)` step by step, calling `visit(step, J)` at record points.
fn walk(config: &NoiseConfig, table: &StepTable, forces: &[f64], mut visit: impl FnMut(usize, C64)) {
    let mut drive = C64::new(0.0, 0.0);
    visit(0, drive);
    for (k, (&f, &seg)) in forces.iter().zip(&table.seg).enumerate() {
        drive += seg * f;
        if (k + 1) % config.record_every == 0 {
            visit(k + 1, drive);
        }
    }
}

fn dtheta_of(delta_alpha: C64, drive: C64) -> f64 {
    (delta_alpha.conj() * drive).re
}

/// One trajectory under the given per-step force values.
pub fn run_with_forces(config: &NoiseConfig, forces: &[f64]) -> Result<Vec<TrajectoryPoint>> {
    config.validate()?;
    if forces.len() != config.steps {
        return Err(Error::domain(format!("expected {} force values, got {}", config.steps, forces.len())));
    }
    let table = StepTable::new(config);
    let mut out = Vec::with_capacity(config.steps / config.record_every + 1);
    let i = C64::new(0.0, 1.0);
    walk(config, &table, forces, |k, drive| {
        out.push(TrajectoryPoint {
            t: k as f64 * config.dt,
            dtheta: dtheta_of(config.delta_alpha, drive),
            alpha1: config.alpha1_0() + i * drive,
            alpha2: config.alpha2_0() + i * drive,
        });
    });
    Ok(out)
}

/// Trajectory `index` of the configured ensemble.
pub fn run_trajectory(config: &NoiseConfig, index: u64) -> Result<Vec<TrajectoryPoint>> {
    run_with_forces(config, &sample_force_values(config, index))
}

/// Running sums for one recorded time.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    dth: f64,
    dth2: f64,
    dth4: f64,
    cos: f64,
    sin: f64,
    cos2: f64,
    sin2: f64,
    cossin: f64,
    amp: f64,
    amp2: f64,
}

impl Moments {
    fn push(&mut self, dtheta: f64, amp: f64) {
        let (s, c) = dtheta.sin_cos();
        let d2 = dtheta * dtheta;
        self.dth += dtheta;
        self.dth2 += d2;
        self.dth4 += d2 * d2;
        self.cos += c;
        self.sin += s;
        self.cos2 += c * c;
        self.sin2 += s * s;
        self.cossin += c * s;
        self.amp += amp;
        self.amp2 += amp * amp;
    }

    fn merge(&mut self, o: &Moments) {
        self.dth += o.dth;
        self.dth2 += o.dth2;
        self.dth4 += o.dth4;
        self.cos += o.cos;
        self.sin += o.sin;
        self.cos2 += o.cos2;
        self.sin2 += o.sin2;
        self.cossin += o.cossin;
        self.amp += o.amp;
        self.amp2 += o.amp2;
    }
}

fn standard_error(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}

/// Ensemble averages at the recorded times, each with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_dtheta_sq: Vec<f64>,
    pub se_dtheta_sq: Vec<f64>,
    /// `⟨e^{iΔθ}⟩`
    pub mean_phase_factor: Vec<C64>,
    /// Standard error of `|⟨e^{iΔθ}⟩|` (spread of the samples projected on
    /// the direction of the mean).
    pub se_phase: Vec<f64>,
    /// `⟨|α_i(t) − α_i(0)|²⟩`, identical for both components.
    pub mean_amp_diffusion: Vec<f64>,
    pub se_amp: Vec<f64>,
    pub trajectories: usize,
}

impl EnsembleStats {
    fn from_moments(times: Vec<f64>, moments: &[Moments], n: usize) -> Self {
        let nf = n as f64;
        let mut s = EnsembleStats {
            times,
            mean_dtheta_sq: vec![],
            se_dtheta_sq: vec![],
            mean_phase_factor: vec![],
            se_phase: vec![],
            mean_amp_diffusion: vec![],
            se_amp: vec![],
            trajectories: n,
        };
        for m in moments {
            s.mean_dtheta_sq.push(m.dth2 / nf);
            s.se_dtheta_sq.push(standard_error(m.dth2, m.dth4, nf));
            let mean = C64::new(m.cos / nf, m.sin / nf);
            s.mean_phase_factor.push(mean);
            let se = if mean.norm() > 1e-12 {
                // Var(cos φ·u + sin φ·v) along the mean direction
                let (sp, cp) = mean.arg().sin_cos();
                let sum = cp * m.cos + sp * m.sin;
                let sum_sq = cp * cp * m.cos2 + sp * sp * m.sin2 + 2.0 * cp * sp * m.cossin;
                standard_error(sum, sum_sq, nf)
            } else {
                let v = standard_error(m.cos, m.cos2, nf).powi(2) + standard_error(m.sin, m.sin2, nf).powi(2);
                v.sqrt()
            };
            s.se_phase.push(se);
            s.mean_amp_diffusion.push(m.amp / nf);
            s.se_amp.push(standard_error(m.amp, m.amp2, nf));
        }
        s
    }

    /// CSV `t,mean_dtheta_sq,se,re_phase,im_phase,se_phase,amp_diff,se_amp`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_dtheta_sq,se,re_phase,im_phase,se_phase,amp_diff,se_amp\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i],
                self.mean_dtheta_sq[i],
                self.se_dtheta_sq[i],
                self.mean_phase_factor[i].re,
                self.mean_phase_factor[i].im,
                self.se_phase[i],
                self.mean_amp_diffusion[i],
                self.se_amp[i]
            );
        }
        out
    }
}

/// Ensemble statistics with a caller-supplied force for each trajectory index.
/// `final_samples` receives `Δθ` at the last recorded time, in index order.
pub fn ensemble_stats_with<F>(config: &NoiseConfig, forces: F) -> Result<(EnsembleStats, Vec<f64>)>
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    config.validate()?;
    let table = StepTable::new(config);
    let times = config.record_times();
    let records = times.len();
    let n = config.trajectories;
    let chunks: Vec<(Vec<Moments>, Vec<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut mom = vec![Moments::default(); records];
            let mut last = Vec::with_capacity(CHUNK);
            for idx in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let f = forces(idx as u64);
                assert_eq!(f.len(), config.steps, "force generator returned the wrong length");
                let mut j = 0;
                let mut final_dtheta = 0.0;
                walk(config, &table, &f, |_, drive| {
                    let d = dtheta_of(config.delta_alpha, drive);
                    mom[j].push(d, drive.norm_sqr());
                    final_dtheta = d;
                    j += 1;
                });
                last.push(final_dtheta);
            }
            (mom, last)
        })
        .collect();
    let mut total = vec![Moments::default(); records];
    let mut finals = Vec::with_capacity(n);
    for (mom, last) in &chunks {
        for (t, m) in total.iter_mut().zip(mom) {
            t.merge(m);
        }
        finals.extend_from_slice(last);
    }
    Ok((EnsembleStats::from_moments(times, &total, n), finals))
}

pub fn ensemble_stats(config: &NoiseConfig) -> Result<EnsembleStats> {
    Ok(ensemble_stats_with(config, |i| sample_force_values(config, i))?.0)
}

/// Sample skewness and excess kurtosis with their z-scores against the
/// Gaussian null (standard deviations `√(6/n)` and `√(24/n)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussianity {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub z_skewness: f64,
    pub z_kurtosis: f64,
}

impl Gaussianity {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
        let var = m(2);
        let (skewness, excess_kurtosis) = if var > 0.0 {
            (m(3) / var.powf(1.5), m(4) / (var * var) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Self {
            skewness,
            excess_kurtosis,
            z_skewness: skewness / (6.0 / n).sqrt(),
            z_kurtosis: excess_kurtosis / (24.0 / n).sqrt(),
        }
    }

    pub fn passes(&self, sigmas: f64) -> bool {
        self.z_skewness.abs() < sigmas && self.z_kurtosis.abs() < sigmas
    }
}

/// Decay of the coherence `|α₂⟩⟨α₁|`.
#[derive(Clone, Debug, PartialEq)]
pub struct OffDiagonalDecay {
    pub times: Vec<f64>,
    /// `⟨e^{iΔθ(t)}⟩`
    pub factors: Vec<C64>,
    pub se: Vec<f64>,
    /// Normality of the `Δθ` samples at the last time.
    pub gaussianity: Gaussianity,
    /// `|Δα| > 1`: phase diffusion dominates the change of the amplitudes,
    /// the regime in which the factor is the coherence decay.
    pub phase_dominated: bool,
}

/// Ensemble-averaged coherence decay at the recorded times.
pub fn offdiag_decay_matrix(config: &NoiseConfig) -> Result<OffDiagonalDecay> {
    let (stats, finals) = ensemble_stats_with(config, |i| sample_force_values(config, i))?;
    Ok(OffDiagonalDecay {
        times: stats.times,
        factors: stats.mean_phase_factor,
        se: stats.se_phase,
        gaussianity: Gaussianity::from_samples(&finals),
        phase_dominated: config.delta_alpha.norm() > 1.0,
    })
}

/// Time for the rms phase difference to reach about one radian: `2/(C|Δα|²)`.
pub fn decoherence_time(c: f64, delta_alpha: C64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::domain(format!("noise strength must be > 0, got {c}")));
    }
    if delta_alpha.norm() == 0.0 {
        return Err(Error::domain("delta_alpha must be nonzero"));
    }
    Ok(2.0 / (c * delta_alpha.norm_sqr()))
}

/// Bound `√2/|α(0)|²` on the fractional energy change of either component
/// after one decoherence time, for `α₁(0) = −α₂(0)`.
pub fn energy_change_bound(alpha0: C64) -> f64 {
    std::f64::consts::SQRT_2 / alpha0.norm_sqr()
}

/// `⟨Δθ²⟩` including the bounded terms:
/// `(C/4)[2|Δα|²t + 2 Re((Δα)² (1 − e^{−2iωt})/(2iω))]`.
pub fn analytic_dtheta_sq(c: f64, delta_alpha: C64, omega_x: f64, t: f64) -> f64 {
    let osc = delta_alpha * delta_alpha * (C64::new(1.0, 0.0) - C64::from_polar(1.0, -2.0 * omega_x * t))
        / C64::new(0.0, 2.0 * omega_x);
    0.25 * c * (2.0 * delta_alpha.norm_sqr() * t + 2.0 * osc.re)
}

/// Ordinary least-squares line; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `y(t)` over the records with `ω_x t` in `[lo, hi]`.
pub fn windowed_slope(stats: &EnsembleStats, y: &[f64], omega_x: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (x, v): (Vec<f64>, Vec<f64>) = stats
        .times
        .iter()
        .zip(y)
        .filter(|(t, _)| (lo..=hi).contains(&(*t * omega_x)))
        .map(|(t, y)| (*t, *y))
        .unzip();
    linear_fit(&x, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forced::{theta_of_t, CoherentLabel};
    use std::f64::consts::PI;

    fn config(c: f64, trajectories: usize) -> NoiseConfig {
        NoiseConfig {
            c,
            dt: PI / 64.0,
            steps: 640,
            trajectories,
            seed: 11,
            delta_alpha: C64::new(2.0, 0.0),
            omega_x: 1.0,
            record_every: 64,
        }
    }

    #[test]
    fn zero_noise_gives_zero_force_and_phase() {
        let cfg = config(0.0, 3);
        assert!(sample_force_values(&cfg, 0).iter().all(|&f| f == 0.0));
        let tr = run_trajectory(&cfg, 1).unwrap();
        assert!(tr.iter().all(|p| p.dtheta == 0.0));
        let s = ensemble_stats(&cfg).unwrap();
        assert!(s.mean_dtheta_sq.iter().all(|&v| v == 0.0));
        assert!(s.mean_amp_diffusion.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn force_variance_and_independence() {
        let cfg = NoiseConfig { steps: 1_000_000, dt: 0.01, c: 0.3, ..config(0.3, 1) };
        let f = sample_force_values(&cfg, 0);
        let var = f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64;
        assert!((var / (cfg.c / cfg.dt) - 1.0).abs() < 0.01);
        let g = sample_force_values(&cfg, 1);
        let corr = f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64 / var;
        assert!(corr.abs() < 3.0 / (f.len() as f64).sqrt());
        assert_eq!(f, sample_force_values(&cfg, 0));
    }

    #[test]
    fn single_impulse_phase() {
        let mut cfg = config(1.0, 1);
        cfg.record_every = 1;
        cfg.delta_alpha = C64::new(1.7, 0.0);
        let mut forces = vec![0.0; cfg.steps];
        let k0 = 100;
        let f = 0.8;
        forces[k0] = f;
        let tr = run_with_forces(&cfg, &forces).unwrap();
        let t0 = (k0 as f64 + 0.5) * cfg.dt;
        let expect = 1.7 * f * cfg.dt * (cfg.omega_x * t0).cos();
        // exact step integral differs from the midpoint value by O((ω dt)²)
        assert!((tr.last().unwrap().dtheta - expect).abs() < 1e-3 * expect.abs());
    }

    #[test]
    fn phase_difference_matches_label_propagation() {
        let cfg = NoiseConfig { delta_alpha: C64::new(1.2, -0.7), ..config(0.02, 1) };
        let force = sample_force(&cfg, 4);
        let tr = run_trajectory(&cfg, 4).unwrap();
        let last = tr.last().unwrap();
        let t = last.t;
        let l1 = CoherentLabel::new(cfg.alpha1_0(), 0.3);
        let l2 = CoherentLabel::new(cfg.alpha2_0(), -1.1);
        let th1 = theta_of_t(&l1, &force, t, cfg.omega_x).unwrap();
        let th2 = theta_of_t(&l2, &force, t, cfg.omega_x).unwrap();
        // the double integral cancels; Δθ as defined here is θ₁ − θ₂ (net of the start)
        let from_labels = (th1 - th2) - (0.3 - (-1.1));
        assert!((last.dtheta - from_labels).abs() < 1e-12);
        for p in &tr {
            assert!((p.alpha1 - p.alpha2 - cfg.delta_alpha).norm() < 1e-12);
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let cfg = config(0.05, 600);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| ensemble_stats(&cfg).unwrap());
        let b = four.install(|| ensemble_stats(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn decoherence_time_scaling() {
        let t = decoherence_time(0.1, C64::new(1.0, 0.0)).unwrap();
        assert!((t - 20.0).abs() < 1e-12);
        assert!((decoherence_time(0.1, C64::new(2.0, 0.0)).unwrap() - t / 4.0).abs() < 1e-12);
        assert!((decoherence_time(0.2, C64::new(1.0, 0.0)).unwrap() - t / 2.0).abs() < 1e-12);
        assert!(decoherence_time(0.0, C64::new(1.0, 0.0)).is_err());
        assert!(decoherence_time(0.1, C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(0.1, 1);
        cfg.dt = 0.2;
        assert!(cfg.validate().is_err());
        let cfg: std::result::Result<NoiseConfig, _> = serde_json::from_str(
            r#"{"c":0.1,"dt":0.01,"steps":10,"trajectories":2,"seed":1,"delta_alpha":[2,0],"omega_x":1,"bogus":1}"#,
        );
        assert!(cfg.is_err());
    }

    #[test]
    fn gaussianity_of_normal_samples() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut r = rng::stream(3, 0);
        let x: Vec<f64> = (0..20_000).map(|_| normal.sample(&mut r)).collect();
        assert!(Gaussianity::from_samples(&x).passes(5.0));
        let skewed: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!(!Gaussianity::from_samples(&skewed).passes(5.0));
    }

    #[test]
    fn analytic_variance_vanishing_bounded_terms() {
        let d = C64::new(2.0, 0.0);
        // at half periods the bounded terms cancel
        let t = 10.0 * PI;
        assert!((analytic_dtheta_sq(0.01, d, 1.0, t) - 0.5 * 0.01 * 4.0 * t).abs() < 1e-15);
    }
}
