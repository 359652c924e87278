//! Fluorescence signals: blue-sideband Rabi flopping and the cat interference
//! fringe, both as closed forms and (for the cat) as an explicit pulse sequence.

use std::fmt::Write as _;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::fock::{apply_raw, displacement_matrix, Populations};
use crate::special::laguerre;
use crate::{rng, Error, Result, C64};

pub const DEFAULT_KAPPA: f64 = 0.7;

/// Blue-sideband drive. `omega_base` is the `|0⟩ → |1⟩` Rabi rate `Ω_{0,1}`;
/// the damping of the `n`-th component is `gamma0 · (n+1)^kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveParams {
    pub omega_base: f64,
    pub eta: f64,
    #[serde(default)]
    pub gamma0: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl DriveParams {
    pub fn new(omega_base: f64, eta: f64, gamma0: f64, kappa: f64) -> Result<Self> {
        let d = Self { omega_base, eta, gamma0, kappa };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_base > 0.0) {
            return Err(Error::domain(format!("omega_base must be > 0, got {}", self.omega_base)));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::domain(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.gamma0 >= 0.0) {
            return Err(Error::domain(format!("gamma0 must be >= 0, got {}", self.gamma0)));
        }
        Ok(())
    }

    /// Ω_{n,n+1}
    pub fn rabi_rate(&self, n: usize) -> f64 {
        self.omega_base * rabi_ratio(n, self.eta)
    }

    /// γ_n
    pub fn damping(&self, n: usize) -> f64 {
        self.gamma0 * ((n + 1) as f64).powf(self.kappa)
    }

    /// Contribution of `|n⟩` to `2P↓ − 1` at time `t`.
    pub fn component(&self, n: usize, t: f64) -> f64 {
        (2.0 * self.rabi_rate(n) * t).cos() * (-self.damping(n) * t).exp()
    }
}

/// `Ω_{n,n+1}/Ω_{0,1} = L_n^{(1)}(η²)/√(n+1)` in magnitude: the ratio of
/// blue-sideband matrix elements `|⟨n+1|e^{iη(a+a†)}|n⟩|`.
pub fn rabi_ratio(n: usize, eta: f64) -> f64 {
    (laguerre(n, 1, eta * eta) / ((n + 1) as f64).sqrt()).abs()
}

/// `P↓(t)` for an initial `|↓, n⟩` under blue-sideband drive.
pub fn p_down_fock(t: f64, n: usize, drive: &DriveParams) -> f64 {
    0.5 * (1.0 + drive.component(n, t))
}

fn check_pops(pops: &[f64]) -> Result<()> {
    let total: f64 = pops.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!("populations sum to {total}, expected 1 within 1e-6")));
    }
    if let Some(p) = pops.iter().find(|&&p| p < -1e-12) {
        return Err(Error::domain(format!("negative population {p}")));
    }
    Ok(())
}

/// `P↓(t) = ½[1 + Σ P_n cos(2Ω_{n,n+1}t) e^{−γ_n t}]`.
pub fn p_down_distribution(t: f64, pops: &[f64], drive: &DriveParams) -> Result<f64> {
    check_pops(pops)?;
    Ok(p_down_unchecked(t, pops, drive))
}

fn p_down_unchecked(t: f64, pops: &[f64], drive: &DriveParams) -> f64 {
    let s: f64 = pops
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(n, &p)| p * drive.component(n, t))
        .sum();
    (0.5 * (1.0 + s)).clamp(0.0, 1.0)
}

/// Sideband trace of a population distribution over `times`.
pub fn sideband_trace(times: &[f64], pops: &[f64], drive: &DriveParams) -> Result<SignalTrace> {
    check_pops(pops)?;
    drive.validate()?;
    let values = times.iter().map(|&t| p_down_unchecked(t, pops, drive)).collect();
    SignalTrace::new(times.to_vec(), values)
}

/// Sideband trace of any state with number-state populations.
pub fn state_trace(times: &[f64], state: &impl Populations, drive: &DriveParams) -> Result<SignalTrace> {
    sideband_trace(times, &state.populations(), drive)
}

/// Cat fringe `½[1 − c e^{−α²(1−cos φ)} cos(α² sin φ)]`.
pub fn cat_fringe(phi: f64, alpha: f64, c: f64) -> f64 {
    let a2 = alpha * alpha;
    0.5 * (1.0 - c * (-a2 * (1.0 - phi.cos())).exp() * (a2 * phi.sin()).cos())
}

pub fn cat_trace(phis: &[f64], alpha: f64, c: f64) -> Result<SignalTrace> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::domain(format!("contrast must lie in [0, 1], got {c}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::domain(format!("alpha must be >= 0, got {alpha}")));
    }
    SignalTrace::new(phis.to_vec(), phis.iter().map(|&p| cat_fringe(p, alpha, c)).collect())
}

/// Ideal carrier rotation by `theta` about an axis at azimuth `phase`.
fn carrier(down: &mut [C64], up: &mut [C64], theta: f64, phase: f64) {
    let c = (0.5 * theta).cos();
    let s = (0.5 * theta).sin();
    let minus_i = C64::new(0.0, -1.0);
    let to_up = minus_i * C64::from_polar(s, phase);
    let to_down = minus_i * C64::from_polar(s, -phase);
    for (d, u) in down.iter_mut().zip(up.iter_mut()) {
        let (d0, u0) = (*d, *u);
        *d = d0 * c + to_down * u0;
        *u = to_up * d0 + u0 * c;
    }
}

/// Runs the cat interferometer and returns `P↓`:
///
/// 1. start in `|↓, 0⟩`
/// 2. carrier π/2 (phase 0)
/// 3. `D(α)` on the ↑ branch only
/// 4. carrier π (phase 0)
/// 5. `D(αe^{iφ})` on the ↑ branch only
/// 6. carrier π/2 with phase π
///
/// The last pulse is the inverse of the first, so with no displacement the
/// sequence is a net π rotation and the ion ends in `|↑⟩`; this makes the
/// output equal to [`cat_fringe`] with `c = 1` with no extra sign.
pub fn simulate_cat_interferometer(alpha: C64, phi: f64, dim: usize) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let zero = C64::new(0.0, 0.0);
    let mut down = vec![zero; dim];
    let mut up = vec![zero; dim];
    down[0] = C64::new(1.0, 0.0);

    carrier(&mut down, &mut up, FRAC_PI_2, 0.0);
    up = apply_raw(&displacement_matrix(alpha, dim), &up);
    carrier(&mut down, &mut up, PI, 0.0);
    up = apply_raw(&displacement_matrix(alpha * C64::from_polar(1.0, phi), dim), &up);
    carrier(&mut down, &mut up, FRAC_PI_2, PI);

    down.iter().map(|z| z.norm_sqr()).sum()
}

/// Sampled `P↓` against time (s) or phase (rad).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalTrace {
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<Vec<u64>>,
}

impl SignalTrace {
    pub fn new(abscissa: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let t = Self { abscissa, values, shots: None };
        t.validate()?;
        Ok(t)
    }

    pub fn with_shots(mut self, shots: Vec<u64>) -> Result<Self> {
        self.shots = Some(shots);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.abscissa.len() != self.values.len() {
            return Err(Error::domain("abscissa and values differ in length"));
        }
        if let Some(s) = &self.shots {
            if s.len() != self.values.len() {
                return Err(Error::domain("shots and values differ in length"));
            }
        }
        if self.abscissa.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("abscissa must be strictly increasing"));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("signal value {v} outside [0, 1]")));
        }
        Ok(())
    }

    /// CSV with header `abscissa,value[,shots]`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.shots {
            Some(shots) => {
                out.push_str("abscissa,value,shots\n");
                for ((x, v), n) in self.abscissa.iter().zip(&self.values).zip(shots) {
                    let _ = writeln!(out, "{x:.16e},{v:.16e},{n}");
                }
            }
            None => {
                out.push_str("abscissa,value\n");
                for (x, v) in self.abscissa.iter().zip(&self.values) {
                    let _ = writeln!(out, "{x:.16e},{v:.16e}");
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty trace file".into()))?;
        let with_shots = match header.trim() {
            "abscissa,value" => false,
            "abscissa,value,shots" => true,
            h => return Err(Error::Parse(format!("unexpected trace header {h:?}"))),
        };
        let (mut xs, mut vs, mut ns) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let want = if with_shots { 3 } else { 2 };
            if fields.len() != want {
                return Err(Error::Parse(format!("row {}: expected {want} fields", i + 1)));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)));
            xs.push(num(fields[0])?);
            vs.push(num(fields[1])?);
            if with_shots {
                ns.push(fields[2].parse::<u64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?);
            }
        }
        let t = Self::new(xs, vs)?;
        if with_shots {
            t.with_shots(ns)
        } else {
            Ok(t)
        }
    }
}

/// Replaces each value by a Binomial(`shots`, P↓)/`shots` draw. Point `i`
/// draws from stream `i` of `seed`, so the result does not depend on
/// evaluation order.
pub fn simulate_detection(trace: &SignalTrace, shots: u64, seed: u64) -> Result<SignalTrace> {
    if shots == 0 {
        return Err(Error::domain("shots must be positive"));
    }
    trace.validate()?;
    let values = trace
        .values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut r = rng::stream(seed, i as u64);
            let k = Binomial::new(shots, p).expect("p validated in [0,1]").sample(&mut r);
            k as f64 / shots as f64
        })
        .collect();
    SignalTrace::new(trace.abscissa.clone(), values)?.with_shots(vec![shots; trace.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, make_thermal};
    use crate::linalg::expm;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn drive(gamma0: f64) -> DriveParams {
        DriveParams::new(2.0 * PI * 0.1, 0.202, gamma0, DEFAULT_KAPPA).unwrap()
    }

    /// |⟨n+1|exp(iη(a+a†))|n⟩| from a Padé exponential on a large basis.
    fn sideband_elements_by_expm(eta: f64, dim: usize) -> Vec<f64> {
        let a = annihilation(dim);
        let gen = (&a + a.adjoint()) * C64::new(0.0, eta);
        let u = expm(&gen);
        (0..dim - 1).map(|n| u[(n + 1, n)].norm()).collect()
    }

    #[test]
    fn rabi_ratio_examples() {
        assert_eq!(rabi_ratio(0, 0.37), 1.0);
        let eta: f64 = 0.202;
        assert_relative_eq!(rabi_ratio(1, eta), (2.0 - eta * eta) / 2f64.sqrt(), max_relative = 1e-14);
        assert!((rabi_ratio(1, eta) - 1.3854).abs() < 5e-5);
        for n in 0..10 {
            assert_relative_eq!(rabi_ratio(n, 1e-7), ((n + 1) as f64).sqrt(), max_relative = 1e-10);
        }
    }

    #[test]
    fn rabi_ratio_matches_matrix_exponential() {
        for &eta in &[0.05, 0.202, 0.5] {
            let el = sideband_elements_by_expm(eta, 200);
            for n in 0..=10 {
                assert!((rabi_ratio(n, eta) - el[n] / el[0]).abs() < 1e-10, "eta {eta} n {n}");
            }
        }
    }

    #[test]
    fn fock_signal_limits() {
        let d = drive(0.0);
        assert_eq!(p_down_fock(0.0, 3, &d), 1.0);
        let t_half = PI / (2.0 * d.omega_base);
        assert!(p_down_fock(t_half, 0, &d) < 1e-15);
        let d = drive(0.5);
        assert!((p_down_fock(1e3, 2, &d) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn distribution_signal() {
        let d = drive(0.02);
        let mut delta = vec![0.0; 5];
        delta[0] = 1.0;
        for &t in &[0.0, 0.7, 3.3] {
            assert_eq!(p_down_distribution(t, &delta, &d).unwrap(), p_down_fock(t, 0, &d));
        }
        let pops = make_thermal(1.3, 64).unwrap().populations();
        assert_eq!(p_down_distribution(0.0, &pops, &d).unwrap(), 1.0);
        // direct summation oracle
        let t = 4.1;
        let mut s = 0.0;
        for (n, p) in pops.iter().enumerate() {
            s += p * (2.0 * d.omega_base * rabi_ratio(n, d.eta) * t).cos()
                * (-d.gamma0 * ((n + 1) as f64).powf(0.7) * t).exp();
        }
        assert!((p_down_distribution(t, &pops, &d).unwrap() - 0.5 * (1.0 + s)).abs() < 1e-12);
        assert!(p_down_distribution(1.0, &[0.5, 0.4], &d).is_err());
    }

    #[test]
    fn cat_fringe_values() {
        assert_relative_eq!(cat_fringe(0.0, 2.0, 0.7), 0.15, epsilon = 1e-15);
        assert_relative_eq!(cat_fringe(PI, 6.0, 1.0), 0.5 * (1.0 - (-72f64).exp()), epsilon = 1e-15);
        // small-φ envelope: e^{-α²(1-cos φ)} ≈ e^{-α²φ²/2}
        let (a, phi) = (3.0, 1e-3);
        let env = (-a * a * (1.0 - f64::cos(phi))).exp();
        assert_relative_eq!(env, (-a * a * phi * phi / 2.0).exp(), max_relative = 1e-9);
    }

    #[test]
    fn interferometer_reproduces_fringe() {
        assert!(simulate_cat_interferometer(C64::new(0.0, 0.0), 1.234, 8) < 1e-15);
        assert!(simulate_cat_interferometer(C64::new(1.5, 0.0), 0.0, 64) < 1e-12);
        let v = simulate_cat_interferometer(C64::new(1.0, 0.0), PI, 64);
        assert!((v - 0.5 * (1.0 - (-2f64).exp())).abs() < 1e-12);
        for k in 0..32 {
            let phi = 2.0 * PI * k as f64 / 32.0;
            let a = C64::from_polar(2.5, 0.4);
            let v = simulate_cat_interferometer(a, phi, 128);
            assert!((v - cat_fringe(phi, 2.5, 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn detection_sampling() {
        let tr = SignalTrace::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.5]).unwrap();
        let s = simulate_detection(&tr, 10_000, 42).unwrap();
        assert_eq!(s.values[0], 1.0);
        assert_eq!(s.values[1], 0.0);
        assert!((s.values[2] - 0.5).abs() < 0.025);
        assert_eq!(s, simulate_detection(&tr, 10_000, 42).unwrap());
        assert!(simulate_detection(&tr, 0, 1).is_err());
    }

    #[test]
    fn trace_validation_and_csv() {
        assert!(SignalTrace::new(vec![0.0, 0.0], vec![0.1, 0.2]).is_err());
        assert!(SignalTrace::new(vec![0.0, 1.0], vec![0.1, 1.2]).is_err());
        let tr = SignalTrace::new(vec![0.0, 0.1], vec![1.0 / 3.0, 0.25]).unwrap();
        let csv = tr.to_csv();
        assert_eq!(csv.lines().next(), Some("abscissa,value"));
        assert_eq!(SignalTrace::from_csv(&csv).unwrap(), tr);
        let tr = tr.with_shots(vec![100, 100]).unwrap();
        assert_eq!(SignalTrace::from_csv(&tr.to_csv()).unwrap(), tr);
    }
}
