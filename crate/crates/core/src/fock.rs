//! Truncated Fock-space states and operators for one motional mode.
//!
//! States live on `|0⟩, ..., |dim-1⟩`. Constructors compute the exact
//! infinite-basis amplitudes and renormalize over the truncated basis, so
//! every returned state is unit norm; how much mass was dropped can be
//! checked up front with [`coherent_warning`] and [`squeezed_warning`].

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{expm, CMatrix};
use crate::special::{laguerre_all, ln_factorial};
use crate::{Error, Result, C64};

/// Extra basis states used when an operator is built by exponentiation and
/// then cropped.
pub const DEFAULT_MARGIN: usize = 20;

/// Pure motional state on a truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

/// Mixed motional state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

/// Spin ⊗ motion state written as one motional branch per spin label.
/// The branches are unnormalized; together they carry unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinMotionState {
    pub down: Vec<C64>,
    pub up: Vec<C64>,
}

/// Trap and coupling constants for the x mode.
///
/// `omega_0` is the spin transition frequency; the Raman detuning from the
/// excited state (about -2π×12 GHz in typical setups) sets the coupling
/// strength but enters no model here, so it is not stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorParams {
    pub omega_x: f64,
    pub omega_0: f64,
    pub eta: f64,
    pub x0: f64,
}

impl OscillatorParams {
    pub fn new(omega_x: f64, omega_0: f64, eta: f64, x0: f64) -> Result<Self> {
        if !(omega_x > 0.0) {
            return Err(Error::domain(format!("omega_x must be > 0, got {omega_x}")));
        }
        if !(eta >= 0.0) {
            return Err(Error::domain(format!("eta must be >= 0, got {eta}")));
        }
        if !(x0 > 0.0) {
            return Err(Error::domain(format!("x0 must be > 0, got {x0}")));
        }
        Ok(Self { omega_x, omega_0, eta, x0 })
    }

    /// Ground-state extent `x0 = sqrt(ħ / 2 m ω_x)` for a particle of mass `mass` (kg).
    pub fn ground_state_extent(mass: f64, omega_x: f64) -> f64 {
        const HBAR: f64 = 1.054_571_817e-34;
        (HBAR / (2.0 * mass * omega_x)).sqrt()
    }
}

/// Truncation advisory raised by constructors whose target state has
/// significant weight beyond the basis.
#[derive(Clone, Debug, PartialEq)]
pub enum Warning {
    CoherentTruncation { mean_n: f64, dim: usize },
    SqueezedTail { lost_mass: f64, dim: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::CoherentTruncation { mean_n, dim } => write!(
                f,
                "|alpha|^2 = {mean_n} exceeds dim/4 = {}; truncation may distort the state",
                *dim as f64 / 4.0
            ),
            Warning::SqueezedTail { lost_mass, dim } => {
                write!(f, "squeezed vacuum loses {lost_mass:.3e} of its mass beyond dim = {dim}")
            }
        }
    }
}

/// Number-state populations of a state or ensemble.
pub trait Populations {
    fn populations(&self) -> Vec<f64>;

    fn mean_n(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

impl StateVector {
    /// Wraps `amps` after normalizing. Fails on an empty or all-zero vector.
    pub fn from_amplitudes(mut amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::domain("state dimension must be >= 1"));
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("state has zero or non-finite norm"));
        }
        amps.iter_mut().for_each(|z| *z /= norm);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self|other⟩` over the shared leading block.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Same state on a different basis size; padding with zeros or cropping
    /// (and renormalizing) as needed.
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let mut amps = self.amps.clone();
        amps.resize(dim, C64::new(0.0, 0.0));
        Self::from_amplitudes(amps)
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityMatrix { entries: &v * v.adjoint() }
    }

    /// Applies an operator given on at least `dim` rows/columns; the result
    /// is cropped to `dim` and returned unnormalized.
    pub fn apply(&self, op: &CMatrix) -> Vec<C64> {
        apply_raw(op, &self.amps)
    }
}

pub(crate) fn apply_raw(op: &CMatrix, v: &[C64]) -> Vec<C64> {
    let d = v.len();
    (0..d)
        .map(|m| (0..d.min(op.ncols())).map(|n| op[(m, n)] * v[n]).sum())
        .collect()
}

impl Populations for StateVector {
    fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace (both within `1e-10`).
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::domain("density matrix must be square and non-empty"));
        }
        let herm_err = (&entries - entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > 1e-10 {
            return Err(Error::domain(format!("matrix not Hermitian (max deviation {herm_err:.3e})")));
        }
        let tr = entries.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::domain(format!("trace is {tr}, expected 1")));
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix without validation; used for reconstruction output
    /// that has already been projected.
    pub(crate) fn from_matrix_unchecked(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn diagonal(pops: &[f64]) -> Result<Self> {
        let total: f64 = pops.iter().sum();
        if pops.is_empty() || !(total > 0.0) || pops.iter().any(|&p| p < 0.0) {
            return Err(Error::domain("populations must be non-negative with positive sum"));
        }
        let n = pops.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, p) in pops.iter().enumerate() {
            m[(i, i)] = C64::new(p / total, 0.0);
        }
        Ok(Self { entries: m })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.entries[(n, m)]
    }

    /// Embeds into a larger basis (zero padding) or crops the leading block.
    pub fn resized(&self, dim: usize) -> DensityMatrix {
        let mut out = CMatrix::zeros(dim, dim);
        let d = dim.min(self.dim());
        out.view_mut((0, 0), (d, d)).copy_from(&self.entries.view((0, 0), (d, d)));
        DensityMatrix { entries: out }
    }

    /// Frobenius distance after zero-padding both operands to a common size.
    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        let d = self.dim().max(other.dim());
        crate::linalg::frobenius(&(self.resized(d).entries - other.resized(d).entries))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.entries + self.entries.adjoint()).scale(0.5);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

impl Populations for DensityMatrix {
    fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re.max(0.0)).collect()
    }
}

impl SpinMotionState {
    pub fn dim(&self) -> usize {
        self.down.len()
    }

    pub fn down_norm_sqr(&self) -> f64 {
        self.down.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn up_norm_sqr(&self) -> f64 {
        self.up.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl Populations for SpinMotionState {
    fn populations(&self) -> Vec<f64> {
        self.down.iter().zip(&self.up).map(|(d, u)| d.norm_sqr() + u.norm_sqr()).collect()
    }
}

// ---------------------------------------------------------------------------
// constructors

pub fn make_fock(n: usize, dim: usize) -> Result<StateVector> {
    if n >= dim {
        return Err(Error::OutOfRange { what: "n", value: n, limit: dim });
    }
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[n] = C64::new(1.0, 0.0);
    Ok(StateVector { amps })
}

/// Untruncated coherent-state coefficients `e^{-|α|²/2} αⁿ/√n!` for `n < dim`.
pub fn coherent_amplitudes(alpha: C64, dim: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amps.push(c);
    }
    amps
}

/// Coherent state `|α⟩` renormalized over the truncated basis.
///
/// # Panics
/// If `dim == 0`.
pub fn make_coherent(alpha: C64, dim: usize) -> StateVector {
    assert!(dim >= 1, "make_coherent: dim must be >= 1");
    StateVector::from_amplitudes(coherent_amplitudes(alpha, dim))
        .expect("coherent amplitudes have nonzero norm")
}

pub fn coherent_warning(alpha: C64, dim: usize) -> Option<Warning> {
    let mean_n = alpha.norm_sqr();
    (mean_n > dim as f64 / 4.0).then_some(Warning::CoherentTruncation { mean_n, dim })
}

/// Thermal (geometric) number distribution with mean `nbar`, renormalized
/// over the truncated basis.
pub fn make_thermal(nbar: f64, dim: usize) -> Result<DensityMatrix> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::domain(format!("nbar must be finite and >= 0, got {nbar}")));
    }
    if dim == 0 {
        return Err(Error::domain("dim must be >= 1"));
    }
    DensityMatrix::diagonal(&thermal_distribution(nbar, dim))
}

/// `P_n = n̄ⁿ/(n̄+1)^{n+1}` for `n < len`, not renormalized.
pub fn thermal_distribution(nbar: f64, len: usize) -> Vec<f64> {
    let q = nbar / (nbar + 1.0);
    let p0 = 1.0 / (nbar + 1.0);
    let mut out = Vec::with_capacity(len);
    let mut p = p0;
    for n in 0..len {
        if n > 0 {
            p *= q;
        }
        out.push(p);
    }
    out
}

/// Squeeze parameter `r` from the variance reduction factor `β = e^{2r}`.
pub fn squeeze_r(beta: f64) -> f64 {
    0.5 * beta.ln()
}

fn squeezed_amplitudes(beta: f64, dim: usize) -> Vec<C64> {
    let r = squeeze_r(beta);
    let t = r.tanh();
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    let mut c = 1.0 / r.cosh().sqrt();
    let mut n = 0usize;
    while 2 * n < dim {
        amps[2 * n] = C64::new(c, 0.0);
        // c_{2n+2}/c_{2n} = -tanh r · sqrt((2n+1)/(2n+2))
        c *= -t * ((2 * n + 1) as f64 / (2 * n + 2) as f64).sqrt();
        n += 1;
    }
    amps
}

/// Squeezed vacuum with variance reduction `beta ≥ 1`.
///
/// Amplitudes use the `(-tanh r)ⁿ` sign convention on `|2n⟩`; odd number
/// states are exactly empty.
pub fn make_squeezed_vacuum(beta: f64, dim: usize) -> Result<StateVector> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::domain(format!("beta must be finite and >= 1, got {beta}")));
    }
    if dim == 0 {
        return Err(Error::domain("dim must be >= 1"));
    }
    StateVector::from_amplitudes(squeezed_amplitudes(beta, dim))
}

pub fn squeezed_warning(beta: f64, dim: usize) -> Option<Warning> {
    if !(beta >= 1.0) {
        return None;
    }
    let kept: f64 = squeezed_amplitudes(beta, dim).iter().map(|z| z.norm_sqr()).sum();
    let lost_mass = (1.0 - kept).max(0.0);
    (lost_mass > 1e-6).then_some(Warning::SqueezedTail { lost_mass, dim })
}

/// Spin-motion cat `(|↑⟩|αe^{iφ}⟩ + |↓⟩|α⟩)/√2`, the state after the second
/// displacement of the interferometer sequence. `make_cat(-α, π, dim)` gives
/// `(|↑,α⟩ + |↓,-α⟩)/√2`.
pub fn make_cat(alpha: C64, phi: f64, dim: usize) -> SpinMotionState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let up = make_coherent(alpha * C64::from_polar(1.0, phi), dim);
    let down = make_coherent(alpha, dim);
    SpinMotionState {
        down: down.amps.iter().map(|z| z * s).collect(),
        up: up.amps.iter().map(|z| z * s).collect(),
    }
}

/// `⟨a|b⟩` for untruncated coherent states.
pub fn coherent_overlap(a: C64, b: C64) -> C64 {
    (-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b).exp()
}

// ---------------------------------------------------------------------------
// displacement

/// `⟨m|D(α)|n⟩` for `m < rows`, `n < cols`, from the Laguerre closed form
///
/// ```text
/// ⟨m|D(α)|n⟩ = sqrt(n!/m!) α^{m-n} e^{-|α|²/2} L_n^{(m-n)}(|α|²),   m ≥ n
/// ```
/// and the mirrored expression with `-α*` above the diagonal. Elements are
/// exact (no truncation error) but lose relative precision roughly like
/// `e^{|α|²/2}` through the recurrence, so `|α| ≲ 4` keeps errors near 1e-12.
pub fn displacement_block(alpha: C64, rows: usize, cols: usize) -> CMatrix {
    let mut out = CMatrix::zeros(rows, cols);
    let x = alpha.norm_sqr();
    let ln_abs = if x > 0.0 { 0.5 * x.ln() } else { f64::NEG_INFINITY };
    let arg = alpha.arg();
    let max_k = rows.max(cols);
    for k in 0..max_k {
        // below / on diagonal: m = n + k
        let n_lower = rows.saturating_sub(k).min(cols);
        // above diagonal: n = m + k
        let n_upper = if k > 0 { cols.saturating_sub(k).min(rows) } else { 0 };
        let len = n_lower.max(n_upper);
        if len == 0 {
            continue;
        }
        if k > 0 && x == 0.0 {
            continue;
        }
        let lag = laguerre_all(len - 1, k, x);
        let kf = k as f64;
        for (j, l) in lag.iter().enumerate() {
            if *l == 0.0 {
                continue;
            }
            let ln_mag = 0.5 * (ln_factorial(j) - ln_factorial(j + k)) - 0.5 * x
                + if k > 0 { kf * ln_abs } else { 0.0 }
                + l.abs().ln();
            let mag = ln_mag.exp() * l.signum();
            if j < n_lower {
                out[(j + k, j)] = C64::from_polar(mag, kf * arg);
            }
            if k > 0 && j < n_upper {
                // (-α*)^k = (-1)^k |α|^k e^{-ik arg α}
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                out[(j, j + k)] = C64::from_polar(sign * mag, -kf * arg);
            }
        }
    }
    out
}

/// Displacement operator `D(α) = exp(αa† − α*a)` on `dim` states, closed form.
pub fn displacement_matrix(alpha: C64, dim: usize) -> CMatrix {
    displacement_block(alpha, dim, dim)
}

/// Annihilation operator on `dim` states.
pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// `D(α)` by Padé matrix exponential on `dim + margin` states, cropped to `dim`.
/// Edge effects of the truncated ladder operators stay in the discarded margin.
pub fn displacement_matrix_expm(alpha: C64, dim: usize, margin: usize) -> CMatrix {
    let work = dim + margin;
    let a = annihilation(work);
    let gen = a.adjoint() * alpha - &a * alpha.conj();
    let full = expm(&gen);
    full.view((0, 0), (dim, dim)).into_owned()
}

// ---------------------------------------------------------------------------
// JSON interchange: {"dim": d, "re": [...], "im": [...]} (row-major for matrices)

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Packed {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Packed {
            dim: self.dim(),
            re: self.amps.iter().map(|z| z.re).collect(),
            im: self.amps.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let p = Packed::deserialize(d)?;
        if p.re.len() != p.dim || p.im.len() != p.dim {
            return Err(D::Error::custom(format!("state vector needs {} re/im entries", p.dim)));
        }
        let amps = p.re.iter().zip(&p.im).map(|(&r, &i)| C64::new(r, i)).collect();
        StateVector::from_amplitudes(amps).map_err(D::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(self.entries[(i, j)].re);
                im.push(self.entries[(i, j)].im);
            }
        }
        Packed { dim: d, re, im }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let p = Packed::deserialize(d)?;
        let n = p.dim;
        if p.re.len() != n * n || p.im.len() != n * n {
            return Err(D::Error::custom(format!("density matrix needs {} re/im entries", n * n)));
        }
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(p.re[i * n + j], p.im[i * n + j]));
        DensityMatrix::from_matrix(m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fock_basics() {
        let s = make_fock(0, 4).unwrap();
        assert_eq!(s.populations(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(make_fock(1, 4).unwrap().populations(), vec![0.0, 1.0, 0.0, 0.0]);
        assert!(make_fock(2, 3).is_ok());
        assert!(matches!(make_fock(3, 3), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn coherent_vacuum_and_mean() {
        assert_eq!(make_coherent(c(0.0, 0.0), 8), make_fock(0, 8).unwrap());
        let s = make_coherent(c(1.5, 0.0), 64);
        assert!((s.mean_n() - 2.25).abs() < 1e-9);
        let s = make_coherent(c(3.1f64.sqrt(), 0.0), 64);
        assert_relative_eq!(s.populations()[0], (-3.1f64).exp(), max_relative = 1e-12);
        assert!(coherent_warning(c(4.0, 0.0), 64).is_none());
        assert!(coherent_warning(c(5.0, 0.0), 64).is_some());
    }

    #[test]
    fn coherent_is_poissonian() {
        let nbar: f64 = 2.9;
        let pops = make_coherent(c(nbar.sqrt(), 0.0), 64).populations();
        let mut expect = (-nbar).exp();
        for (n, p) in pops.iter().enumerate().take(30) {
            if n > 0 {
                expect *= nbar / n as f64;
            }
            assert_relative_eq!(*p, expect, max_relative = 1e-11);
        }
    }

    #[test]
    fn thermal_distribution_values() {
        let rho = make_thermal(0.0, 8).unwrap();
        assert_eq!(rho.populations()[0], 1.0);
        let p = make_thermal(1.3, 64).unwrap().populations();
        assert_relative_eq!(p[0], 1.0 / 2.3, max_relative = 1e-12);
        assert_relative_eq!(p[1] / p[0], 1.3 / 2.3, max_relative = 1e-12);
        assert!(make_thermal(-0.1, 4).is_err());
    }

    #[test]
    fn squeezed_vacuum_values() {
        assert_eq!(make_squeezed_vacuum(1.0, 8).unwrap(), make_fock(0, 8).unwrap());
        let s = make_squeezed_vacuum(40.0, 256).unwrap();
        let p = s.populations();
        assert_relative_eq!(p[0], 1.0 / squeeze_r(40.0).cosh(), max_relative = 1e-6);
        assert!((p[0] - 0.3085).abs() < 1e-4);
        assert!(p.iter().skip(1).step_by(2).all(|&x| x == 0.0));
        assert!(matches!(make_squeezed_vacuum(0.5, 8), Err(Error::Domain(_))));
        assert!(squeezed_warning(40.0, 64).is_some());
        assert!(squeezed_warning(40.0, 256).is_none());
    }

    #[test]
    fn squeezed_populations_follow_even_law() {
        // P_2n ∝ (2n)! tanh^{2n} r / (2ⁿ n!)², same normalization on both sides
        let beta = 6.0;
        let dim = 80;
        let t = squeeze_r(beta).tanh();
        let p = make_squeezed_vacuum(beta, dim).unwrap().populations();
        let law: Vec<f64> = (0..dim / 2)
            .map(|n| {
                (ln_factorial(2 * n) - 2.0 * (n as f64 * 2f64.ln() + ln_factorial(n))).exp()
                    * t.powi(2 * n as i32)
            })
            .collect();
        let total: f64 = law.iter().sum();
        for n in 0..dim / 2 {
            assert!((p[2 * n] - law[n] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn displacement_vacuum_overlap_and_identity() {
        let d0 = displacement_matrix(c(0.0, 0.0), 6);
        assert!((d0 - CMatrix::identity(6, 6)).iter().all(|z| z.norm() == 0.0));
        let a = c(0.8, -1.1);
        let d = displacement_matrix(a, 40);
        assert_relative_eq!(d[(0, 0)].re, (-0.5 * a.norm_sqr()).exp(), max_relative = 1e-13);
        assert!(d[(0, 0)].im.abs() < 1e-15);
    }

    #[test]
    fn displacement_on_vacuum_is_coherent() {
        let a = c(1.2, 0.7);
        let dim = 64;
        let d = displacement_matrix(a, dim);
        let col: Vec<C64> = (0..dim).map(|m| d[(m, 0)]).collect();
        let coh = make_coherent(a, dim);
        for (x, y) in col.iter().zip(coh.amplitudes()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn closed_form_matches_pade_exponential() {
        let dim = 64;
        for &a in &[c(0.3, 0.0), c(-1.0, 2.0), c(2.1, -1.9), c(0.0, 3.0)] {
            let closed = displacement_matrix(a, dim);
            let pade = displacement_matrix_expm(a, dim + 20, 20);
            let err = (0..dim - 20)
                .flat_map(|i| (0..dim - 20).map(move |j| (i, j)))
                .map(|(i, j)| (closed[(i, j)] - pade[(i, j)]).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "alpha = {a}: {err:e}");
        }
    }

    // Displacing |n⟩ by α reaches up to (√n + |α|)², so products of
    // cropped matrices are unitary only on the block whose displaced
    // support stays inside the working basis: n < 20 for |α| ≤ 3 on 84 states.
    const WORK: usize = 84;
    const INNER: usize = 20;

    fn inner_block_error(a: &CMatrix, b: &CMatrix) -> f64 {
        (0..INNER)
            .flat_map(|i| (0..INNER).map(move |j| (i, j)))
            .map(|(i, j)| (a[(i, j)] - b[(i, j)]).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn displacement_is_unitary_on_inner_block() {
        let id = CMatrix::identity(WORK, WORK);
        for &a in &[c(3.0, 0.0), c(2.0, -2.0), c(0.0, -3.0)] {
            let d = displacement_matrix(a, WORK);
            let dm = displacement_matrix(-a, WORK);
            assert!(inner_block_error(&(&d * &dm), &id) < 1e-10);
            assert!(inner_block_error(&(&d * d.adjoint()), &id) < 1e-10);
        }
    }

    proptest::proptest! {
        #[test]
        fn displacements_compose(ar in -1.5f64..1.5, ai in -1.5f64..1.5, br in -1.5f64..1.5, bi in -1.5f64..1.5) {
            let (a, b) = (c(ar, ai), c(br, bi));
            let lhs = displacement_matrix(a, WORK) * displacement_matrix(b, WORK);
            let rhs = displacement_matrix(a + b, WORK) * C64::from_polar(1.0, (a * b.conj()).im);
            proptest::prop_assert!(inner_block_error(&lhs, &rhs) < 1e-8);
        }

        #[test]
        fn coherent_mean_is_alpha_squared(ar in -3.0f64..3.0, ai in -3.0f64..3.0) {
            let a = c(ar, ai);
            let s = make_coherent(a, 72);
            proptest::prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            proptest::prop_assert!((s.mean_n() - a.norm_sqr()).abs() < 1e-9);
        }
    }

    #[test]
    fn cat_branches() {
        let s = make_cat(c(0.0, 0.0), 1.0, 8);
        assert_relative_eq!(s.down_norm_sqr(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(s.up_norm_sqr(), 0.5, epsilon = 1e-15);
        let s = make_cat(c(1.3, 0.2), 0.0, 32);
        assert_eq!(s.down, s.up);
        // branch overlap drives the interference fringe
        let (alpha, phi) = (c(1.1, 0.0), 0.9);
        let s = make_cat(alpha, phi, 80);
        let ov: C64 = s.down.iter().zip(&s.up).map(|(d, u)| d.conj() * u).sum::<C64>() * 2.0;
        let expect = (-alpha.norm_sqr() * (1.0 - C64::from_polar(1.0, phi))).exp();
        assert!((ov - expect).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = make_coherent(c(0.4, -0.2), 6);
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.starts_with("{\"dim\":6,\"re\":["));
        let back: StateVector = serde_json::from_str(&js).unwrap();
        assert!(back.inner(&s).norm() > 1.0 - 1e-15);
        let rho = s.to_density();
        let back: DensityMatrix = serde_json::from_str(&serde_json::to_string(&rho).unwrap()).unwrap();
        assert!(back.frobenius_distance(&rho) < 1e-15);
        assert!(serde_json::from_str::<StateVector>(r#"{"dim":2,"re":[1,0],"im":[0,0],"x":1}"#).is_err());
    }
}
