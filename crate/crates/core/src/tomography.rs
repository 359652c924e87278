//! Displaced-population tomography.
//!
//! `Q_k(α) = ⟨k|D(−α) ρ D(α)|k⟩` is the number distribution after shifting the
//! state by `−α`. Sampling it on a circle `α_p = |α| e^{iπp/N}`, `p = −N..N−1`
//! fixes every `ρ_nm` with `n, m ≤ N−1`; the parity-weighted sum of the same
//! data at a single `α` gives the Wigner function there.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::{displacement_block, DensityMatrix};
use crate::linalg::{condition_number, lstsq, project_physical, CMatrix};
use crate::{rng, Error, Result, C64};

/// Extra number states kept beyond `nmax` when tabulating `Q_k`.
pub const DEFAULT_K_PADDING: usize = 8;

/// Stop criterion for the parity sum.
pub const WIGNER_TAIL_TOL: f64 = 1e-9;

/// `2N` displacements of equal magnitude, phases `π/N` apart.
///
/// JSON form: `{"radius": r, "count_n": N, "phase_offset": φ}`, offset optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct DisplacementGrid {
    pub radius: f64,
    pub count_n: usize,
    /// Common phase added to every point.
    pub phase_offset: f64,
    points: Vec<C64>,
}

impl DisplacementGrid {
    pub fn new(radius: f64, count_n: usize) -> Result<Self> {
        Self::with_offset(radius, count_n, 0.0)
    }

    pub fn with_offset(radius: f64, count_n: usize, phase_offset: f64) -> Result<Self> {
        if count_n == 0 {
            return Err(Error::domain("grid needs N >= 1"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain(format!("grid radius must be > 0, got {radius}")));
        }
        let n = count_n as i64;
        let points = (-n..n)
            .map(|p| C64::from_polar(radius, std::f64::consts::PI * p as f64 / count_n as f64 + phase_offset))
            .collect();
        Ok(Self { radius, count_n, phase_offset, points })
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Signed label `p` of the `i`-th point.
    pub fn label(&self, i: usize) -> i64 {
        i as i64 - self.count_n as i64
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    radius: f64,
    count_n: usize,
    #[serde(default)]
    phase_offset: f64,
}

impl TryFrom<GridSpec> for DisplacementGrid {
    type Error = Error;

    fn try_from(g: GridSpec) -> Result<Self> {
        Self::with_offset(g.radius, g.count_n, g.phase_offset)
    }
}

impl From<DisplacementGrid> for GridSpec {
    fn from(g: DisplacementGrid) -> Self {
        Self { radius: g.radius, count_n: g.count_n, phase_offset: g.phase_offset }
    }
}

/// `Q_k(α_p)`: one row per grid point, one column per number state.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    rows: Vec<Vec<f64>>,
}

impl QTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::domain("Q table rows must be non-empty and of equal length"));
        }
        if rows.iter().flatten().any(|q| !(0.0..=1.0 + 1e-9).contains(q)) {
            return Err(Error::domain("Q values must lie in [0, 1]"));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn kmax(&self) -> usize {
        self.rows[0].len() - 1
    }

    /// CSV `p,k,q` with the signed grid label `p`.
    pub fn to_csv(&self, grid: &DisplacementGrid) -> String {
        let mut out = String::from("p,k,q\n");
        for (i, row) in self.rows.iter().enumerate() {
            for (k, q) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{k},{q:.16e}", grid.label(i));
            }
        }
        out
    }

    /// Parses the `p,k,q` layout; rows are ordered by `p`, which must run
    /// over a contiguous range `−N..N−1`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("p,k,q") => {}
            other => return Err(Error::Parse(format!("unexpected Q table header {other:?}"))),
        }
        let mut entries: Vec<(i64, usize, f64)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("row {}: expected p,k,q", i + 1)));
            }
            let err = |e: &dyn std::fmt::Display| Error::Parse(format!("row {}: {e}", i + 1));
            entries.push((
                f[0].parse().map_err(|e| err(&e))?,
                f[1].parse().map_err(|e| err(&e))?,
                f[2].parse().map_err(|e| err(&e))?,
            ));
        }
        let pmin = entries.iter().map(|e| e.0).min().ok_or_else(|| Error::Parse("empty Q table".into()))?;
        let pmax = entries.iter().map(|e| e.0).max().unwrap_or(pmin);
        let kmax = entries.iter().map(|e| e.1).max().unwrap_or(0);
        let mut rows = vec![vec![f64::NAN; kmax + 1]; (pmax - pmin + 1) as usize];
        for (p, k, q) in entries {
            rows[(p - pmin) as usize][k] = q;
        }
        if rows.iter().flatten().any(|q| q.is_nan()) {
            return Err(Error::Parse("Q table has missing (p, k) entries".into()));
        }
        Self::new(rows)
    }
}

/// `Q_k(α)` for `k ≤ kmax`. Displacement elements come from the closed form,
/// so `kmax` may exceed the dimension of `rho`.
pub fn simulate_q(rho: &DensityMatrix, alpha: C64, kmax: usize) -> Vec<f64> {
    let d = rho.dim();
    let b = displacement_block(-alpha, kmax + 1, d);
    let m = rho.entries();
    (0..=kmax)
        .map(|k| {
            let row = b.row(k);
            let mut q = C64::new(0.0, 0.0);
            for n in 0..d {
                if row[n] == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut s = C64::new(0.0, 0.0);
                for mm in 0..d {
                    s += m[(n, mm)] * row[mm].conj();
                }
                q += row[n] * s;
            }
            q.re.max(0.0)
        })
        .collect()
}

pub fn simulate_qtable(rho: &DensityMatrix, grid: &DisplacementGrid, kmax: usize) -> QTable {
    let rows = grid.points().par_iter().map(|&a| simulate_q(rho, a, kmax)).collect();
    QTable { rows }
}

/// Per-entry Binomial(`shots`, Q)/`shots` resampling. Entry `(i, k)` draws
/// from its own stream, so the output is fixed by `seed`.
pub fn add_projection_noise(table: &QTable, shots: u64, seed: u64) -> Result<QTable> {
    if shots == 0 {
        return Err(Error::domain("shots must be positive"));
    }
    let width = table.kmax() as u64 + 1;
    let rows = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(k, &q)| {
                    let mut r = rng::stream(seed, i as u64 * width + k as u64);
                    let n = Binomial::new(shots, q.clamp(0.0, 1.0)).expect("clamped probability").sample(&mut r);
                    n as f64 / shots as f64
                })
                .collect()
        })
        .collect();
    Ok(QTable { rows })
}

/// Reconstructed state with fit diagnostics.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    /// Condition number of the real design matrix.
    pub condition_number: f64,
    /// Least-squares residual before the physicality projection.
    pub residual_norm: f64,
}

/// Real parameters of a trace-one Hermitian `s×s` block: diagonal entries
/// `0..s−1` (the last one is fixed by the trace), then `(Re, Im)` of each
/// upper-triangle element.
struct HermitianLayout {
    s: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermitianLayout {
    fn new(s: usize) -> Self {
        let pairs = (0..s).flat_map(|n| (n + 1..s).map(move |m| (n, m))).collect();
        Self { s, pairs }
    }

    fn len(&self) -> usize {
        self.s * self.s - 1
    }

    fn assemble(&self, x: &DVector<f64>) -> CMatrix {
        let s = self.s;
        let mut rho = CMatrix::zeros(s, s);
        let mut tr = 0.0;
        for n in 0..s - 1 {
            rho[(n, n)] = C64::new(x[n], 0.0);
            tr += x[n];
        }
        rho[(s - 1, s - 1)] = C64::new(1.0 - tr, 0.0);
        for (j, &(n, m)) in self.pairs.iter().enumerate() {
            let z = C64::new(x[s - 1 + 2 * j], x[s + 2 * j]);
            rho[(n, m)] = z;
            rho[(m, n)] = z.conj();
        }
        rho
    }
}

/// Least-squares inversion of `Q_k(α_p) = Σ_{n,m ≤ nmax} ⟨k|D(−α_p)|n⟩ ρ_nm ⟨m|D(α_p)|k⟩`
/// over the real parameters of a trace-one Hermitian `ρ`, followed by
/// projection onto the physical states.
///
/// Requires `nmax ≤ N − 1` (phases `π/N` apart cannot separate coherences
/// whose index difference exceeds `N − 1`) and `kmax ≥ nmax`.
pub fn reconstruct_density(table: &QTable, grid: &DisplacementGrid, nmax: usize) -> Result<Reconstruction> {
    if nmax + 1 > grid.count_n {
        return Err(Error::RankDeficient(format!(
            "nmax = {nmax} violates nmax <= N - 1 = {} for a circle of 2N = {} displacements",
            grid.count_n - 1,
            2 * grid.count_n
        )));
    }
    if table.rows.len() != grid.points().len() {
        return Err(Error::domain(format!(
            "Q table has {} rows but the grid has {} points",
            table.rows.len(),
            grid.points().len()
        )));
    }
    let kmax = table.kmax();
    if kmax < nmax {
        return Err(Error::RankDeficient(format!("Q table covers k <= {kmax}, need k >= nmax = {nmax}")));
    }
    let s = nmax + 1;
    let layout = HermitianLayout::new(s);
    let rows_per_point = kmax + 1;
    let nrows = grid.points().len() * rows_per_point;
    let ncols = layout.len();

    let blocks: Vec<CMatrix> = grid
        .points()
        .par_iter()
        .map(|&a| displacement_block(-a, kmax + 1, s))
        .collect();

    let mut design = DMatrix::<f64>::zeros(nrows, ncols.max(1));
    let mut rhs = DVector::<f64>::zeros(nrows);
    for (i, b) in blocks.iter().enumerate() {
        for k in 0..=kmax {
            let r = i * rows_per_point + k;
            let last = b[(k, s - 1)].norm_sqr();
            rhs[r] = table.rows[i][k] - last;
            for n in 0..s - 1 {
                design[(r, n)] = b[(k, n)].norm_sqr() - last;
            }
            for (j, &(n, m)) in layout.pairs.iter().enumerate() {
                let c = b[(k, n)] * b[(k, m)].conj();
                design[(r, s - 1 + 2 * j)] = 2.0 * c.re;
                design[(r, s + 2 * j)] = -2.0 * c.im;
            }
        }
    }

    if ncols == 0 {
        // 1×1 block: ρ_00 = 1 by the trace condition
        let rho = DensityMatrix::from_matrix_unchecked(CMatrix::identity(1, 1));
        return Ok(Reconstruction { rho, condition_number: 1.0, residual_norm: rhs.norm() });
    }

    let cond = condition_number(&design);
    if !(cond < 1e12) {
        return Err(Error::RankDeficient(format!(
            "design matrix condition number {cond:.3e}; the grid cannot resolve nmax = {nmax} (need nmax <= N - 1 and a usable radius)"
        )));
    }
    let x = lstsq(&design, &rhs)?;
    let residual_norm = (&design * &x - &rhs).norm();
    let rho = project_physical(&layout.assemble(&x));
    Ok(Reconstruction { rho: DensityMatrix::from_matrix_unchecked(rho), condition_number: cond, residual_norm })
}

/// One Wigner value with its convergence flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WignerPoint {
    pub value: f64,
    pub converged: bool,
}

/// `W(α) = (2/π) Σ (−1)ⁿ Q_n(α)`. Converged when the last two `|Q_n|` are
/// both below [`WIGNER_TAIL_TOL`].
pub fn wigner_point(q: &[f64]) -> WignerPoint {
    let s: f64 = q.iter().enumerate().map(|(n, &v)| if n % 2 == 0 { v } else { -v }).sum();
    let converged = q.len() >= 2 && q[q.len() - 2..].iter().all(|v| v.abs() < WIGNER_TAIL_TOL);
    WignerPoint { value: std::f64::consts::FRAC_2_PI * s, converged }
}

/// Rectangular sampling of the complex plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl RectGrid {
    /// Square grid `[−half, half]²` with `n` points per side.
    pub fn square(half: f64, n: usize) -> Self {
        Self { re_min: -half, re_max: half, im_min: -half, im_max: half, n_re: n, n_im: n }
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![0.5 * (lo + hi)],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }

    /// Points in row-major order: imaginary part outer, real part inner.
    pub fn points(&self) -> Vec<C64> {
        let re = Self::axis(self.re_min, self.re_max, self.n_re);
        Self::axis(self.im_min, self.im_max, self.n_im)
            .into_iter()
            .flat_map(|y| re.iter().map(move |&x| C64::new(x, y)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerField {
    pub points: Vec<C64>,
    pub values: Vec<f64>,
    pub converged: Vec<bool>,
}

impl WignerField {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    /// CSV `re_alpha,im_alpha,w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_alpha,im_alpha,w\n");
        for (a, w) in self.points.iter().zip(&self.values) {
            let _ = writeln!(out, "{:.16e},{:.16e},{w:.16e}", a.re, a.im);
        }
        out
    }
}

/// Wigner value at `alpha`, growing the `Q_k` range until the parity sum's
/// tail criterion holds or a size cap is reached.
pub fn wigner_at(rho: &DensityMatrix, alpha: C64) -> WignerPoint {
    let d = rho.dim();
    let r = alpha.norm();
    let mut kmax = d + 16 + (4.0 * r * r + 8.0 * r).ceil() as usize;
    let cap = 4 * d + 400;
    loop {
        let w = wigner_point(&simulate_q(rho, alpha, kmax));
        if w.converged || kmax >= cap {
            return w;
        }
        kmax = (2 * kmax).min(cap);
    }
}

pub fn wigner_field(rho: &DensityMatrix, grid: &RectGrid) -> WignerField {
    let points = grid.points();
    let (values, converged) = points.par_iter().map(|&a| {
        let w = wigner_at(rho, a);
        (w.value, w.converged)
    })
    .unzip();
    WignerField { points, values, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_coherent, make_fock, make_squeezed_vacuum, Populations};
    use std::f64::consts::FRAC_2_PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_json_round_trip() {
        let g = DisplacementGrid::with_offset(1.5, 6, 0.1).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<DisplacementGrid>(&text).unwrap(), g);
        assert!(serde_json::from_str::<DisplacementGrid>(r#"{"radius":1,"count_n":0}"#).is_err());
        assert!(serde_json::from_str::<DisplacementGrid>(r#"{"radius":1,"count_n":2,"x":0}"#).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = DisplacementGrid::new(1.0, 4).unwrap();
        assert_eq!(g.points().len(), 8);
        assert_eq!(g.label(0), -4);
        assert!((g.points()[0] - c(-1.0, 0.0)).norm() < 1e-15);
        for w in g.points().windows(2) {
            let dphi = (w[1] / w[0]).arg();
            assert!((dphi - std::f64::consts::PI / 4.0).abs() < 1e-14);
        }
        assert!(DisplacementGrid::new(0.0, 4).is_err());
    }

    #[test]
    fn q_of_displaced_vacuum_is_poissonian() {
        let vac = make_fock(0, 4).unwrap().to_density();
        let a = c(0.6, -0.9);
        let q = simulate_q(&vac, a, 20);
        let x = a.norm_sqr();
        let mut expect = (-x).exp();
        for (k, v) in q.iter().enumerate() {
            if k > 0 {
                expect *= x / k as f64;
            }
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn q_at_origin_is_diagonal() {
        let rho = make_coherent(c(0.5, 0.5), 10).to_density();
        let q = simulate_q(&rho, c(0.0, 0.0), 9);
        for (a, b) in q.iter().zip(rho.populations()) {
            assert!((a - b).abs() < 1e-15);
        }
        let q = simulate_q(&make_fock(1, 3).unwrap().to_density(), c(0.0, 0.0), 2);
        assert_eq!(q[1], 1.0);
    }

    #[test]
    fn fock_one_round_trip() {
        let grid = DisplacementGrid::new(1.0, 4).unwrap();
        let rho = make_fock(1, 4).unwrap().to_density();
        let table = simulate_qtable(&rho, &grid, 3 + DEFAULT_K_PADDING);
        let rec = reconstruct_density(&table, &grid, 3).unwrap();
        assert!((rec.rho.get(1, 1).re - 1.0).abs() < 1e-6);
        assert!(rec.rho.frobenius_distance(&rho) < 1e-6);
        assert!(rec.condition_number.is_finite());
    }

    #[test]
    fn vacuum_round_trip_on_several_grids() {
        for &(r, n) in &[(0.5, 2usize), (1.0, 3), (1.3, 5)] {
            let grid = DisplacementGrid::new(r, n).unwrap();
            let rho = make_fock(0, n).unwrap().to_density();
            let table = simulate_qtable(&rho, &grid, n - 1 + DEFAULT_K_PADDING);
            let rec = reconstruct_density(&table, &grid, n - 1).unwrap();
            assert!((rec.rho.get(0, 0).re - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_condition_is_named() {
        let grid = DisplacementGrid::new(1.0, 3).unwrap();
        let rho = make_fock(0, 4).unwrap().to_density();
        let table = simulate_qtable(&rho, &grid, 12);
        let err = reconstruct_density(&table, &grid, 3).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)));
        assert!(err.to_string().contains("nmax <= N - 1"));
    }

    #[test]
    fn reconstruction_is_rotation_equivariant() {
        let n = 4;
        let grid = DisplacementGrid::new(1.0, n).unwrap();
        let state = StateVectorMix::squeezed_plus_phase();
        let rho = state.to_density();
        let table = simulate_qtable(&rho, &grid, n - 1 + DEFAULT_K_PADDING);
        let base = reconstruct_density(&table, &grid, n - 1).unwrap().rho;
        let chi = 0.37;
        let rotated = DisplacementGrid::with_offset(1.0, n, chi).unwrap();
        let turned = reconstruct_density(&table, &rotated, n - 1).unwrap().rho;
        for a in 0..n {
            for b in 0..n {
                let expect = base.get(a, b) * C64::from_polar(1.0, (a as f64 - b as f64) * chi);
                assert!((turned.get(a, b) - expect).norm() < 1e-8);
            }
        }
    }

    struct StateVectorMix;
    impl StateVectorMix {
        fn squeezed_plus_phase() -> crate::fock::StateVector {
            let s = make_squeezed_vacuum(2.0, 4).unwrap();
            let amps: Vec<C64> = s
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(n, z)| z + C64::from_polar(0.2, n as f64))
                .collect();
            crate::fock::StateVector::from_amplitudes(amps).unwrap()
        }
    }

    #[test]
    fn wigner_points_at_origin() {
        assert!((wigner_point(&[1.0, 0.0, 0.0]).value - FRAC_2_PI).abs() < 1e-15);
        let w = wigner_point(&[0.0, 1.0, 0.0, 0.0]);
        assert!((w.value + FRAC_2_PI).abs() < 1e-15);
        assert!(w.converged);
        assert!(!wigner_point(&[0.5, 0.5]).converged);
        for n in 0..6 {
            let rho = make_fock(n, 8).unwrap().to_density();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(wigner_at(&rho, c(0.0, 0.0)).value, sign * FRAC_2_PI);
        }
    }

    #[test]
    fn wigner_of_coherent_peaks_at_its_amplitude() {
        let beta = c(1.5, 0.0);
        let rho = make_coherent(beta, 48).to_density();
        let w = wigner_at(&rho, beta);
        assert!((w.value - FRAC_2_PI).abs() < 1e-10);
        assert!(w.converged);
    }

    #[test]
    fn fock_one_wigner_profile() {
        let rho = make_fock(1, 4).unwrap().to_density();
        let field = wigner_field(&rho, &RectGrid::square(2.0, 9));
        for (a, w) in field.points.iter().zip(&field.values) {
            let x = a.norm_sqr();
            let expect = FRAC_2_PI * (4.0 * x - 1.0) * (-2.0 * x).exp();
            assert!((w - expect).abs() < 1e-10);
        }
        assert!(field.all_converged());
        // zero crossing at |α| = 1/2
        assert!(wigner_at(&rho, c(0.5, 0.0)).value.abs() < 1e-12);
    }

    #[test]
    fn projection_noise_is_deterministic() {
        let grid = DisplacementGrid::new(1.0, 2).unwrap();
        let rho = make_fock(0, 2).unwrap().to_density();
        let mut table = simulate_qtable(&rho, &grid, 4);
        table.rows[0][0] = 1.0;
        let a = add_projection_noise(&table, 1000, 5).unwrap();
        assert_eq!(a, add_projection_noise(&table, 1000, 5).unwrap());
        assert_ne!(a, add_projection_noise(&table, 1000, 6).unwrap());
        assert_eq!(a.rows[0][0], 1.0);
        assert!(add_projection_noise(&table, 0, 5).is_err());
    }

    #[test]
    fn qtable_csv_round_trip() {
        let grid = DisplacementGrid::new(0.8, 3).unwrap();
        let rho = make_coherent(c(0.3, 0.1), 5).to_density();
        let table = simulate_qtable(&rho, &grid, 6);
        let csv = table.to_csv(&grid);
        assert!(csv.starts_with("p,k,q\n-3,0,"));
        assert_eq!(QTable::from_csv(&csv).unwrap(), table);
    }
}
