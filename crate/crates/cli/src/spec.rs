//! Inline state and drive descriptions shared by several commands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ionqho::fock::{
    coherent_warning, make_cat, make_coherent, make_fock, make_squeezed_vacuum, make_thermal, squeezed_warning,
    DensityMatrix, Populations, SpinMotionState, StateVector,
};
use ionqho::linalg::CMatrix;
use ionqho::signal::{DriveParams, DEFAULT_KAPPA};
use ionqho::C64;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliError, CliResult};

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_ETA: f64 = 0.202;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Fock,
    Coherent,
    Thermal,
    Squeezed,
    Cat,
}

/// A motional state, given inline or as a JSON file written by `state`.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    /// State family
    #[arg(long, value_enum)]
    pub kind: Option<StateKind>,
    /// Number state index (fock)
    #[arg(long)]
    pub n: Option<usize>,
    /// Real part of the coherent or cat amplitude
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Imaginary part of the coherent or cat amplitude
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_im: Option<f64>,
    /// Mean occupation (thermal)
    #[arg(long)]
    pub nbar: Option<f64>,
    /// Squeezing parameter, variance reduction factor (squeezed)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Relative phase of the cat branches
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Fock-space truncation
    #[arg(long)]
    pub dim: Option<usize>,
    /// Load the state from JSON instead
    #[arg(long)]
    pub state_file: Option<PathBuf>,
}

pub enum Built {
    Pure(StateVector),
    Mixed(DensityMatrix),
    Cat(SpinMotionState),
}

fn need<T>(v: Option<T>, field: &str, kind: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("state kind `{kind}` requires `{field}`")))
}

impl StateSpec {
    pub fn is_empty(&self) -> bool {
        self.kind.is_none() && self.state_file.is_none()
    }

    fn alpha_c(&self, kind: &str) -> CliResult<C64> {
        Ok(C64::new(need(self.alpha, "alpha", kind)?, self.alpha_im.unwrap_or(0.0)))
    }

    pub fn build(&self) -> CliResult<Built> {
        if let Some(path) = &self.state_file {
            if self.kind.is_some() {
                return Err(usage("give either `state_file` or `kind`, not both"));
            }
            return load_state(path);
        }
        let kind = self.kind.ok_or_else(|| usage("missing state: give `kind` or `state_file`"))?;
        let dim = self.dim.unwrap_or(DEFAULT_DIM);
        if dim == 0 {
            return Err(usage("`dim` must be >= 1"));
        }
        let built = match kind {
            StateKind::Fock => Built::Pure(make_fock(need(self.n, "n", "fock")?, dim)?),
            StateKind::Coherent => {
                let a = self.alpha_c("coherent")?;
                if let Some(w) = coherent_warning(a, dim) {
                    eprintln!("warning: {w}");
                }
                Built::Pure(make_coherent(a, dim))
            }
            StateKind::Thermal => Built::Mixed(make_thermal(need(self.nbar, "nbar", "thermal")?, dim)?),
            StateKind::Squeezed => {
                let beta = need(self.beta, "beta", "squeezed")?;
                if let Some(w) = squeezed_warning(beta, dim) {
                    eprintln!("warning: {w}");
                }
                Built::Pure(make_squeezed_vacuum(beta, dim)?)
            }
            StateKind::Cat => Built::Cat(make_cat(self.alpha_c("cat")?, self.phi.unwrap_or(0.0), dim)),
        };
        Ok(built)
    }
}

pub fn load_state(path: &std::path::Path) -> CliResult<Built> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read state {}: {e}", path.display())))?;
    if let Ok(psi) = serde_json::from_str::<StateVector>(&text) {
        return Ok(Built::Pure(psi));
    }
    serde_json::from_str::<DensityMatrix>(&text)
        .map(Built::Mixed)
        .map_err(|e| usage(format!("{} is neither a state vector nor a density matrix: {e}", path.display())))
}

impl Built {
    pub fn populations(&self) -> Vec<f64> {
        match self {
            Built::Pure(s) => s.populations(),
            Built::Mixed(r) => r.populations(),
            Built::Cat(c) => c.populations(),
        }
    }

    /// Motional density matrix; for a cat the spin is traced out.
    pub fn density(&self) -> CliResult<DensityMatrix> {
        match self {
            Built::Pure(s) => Ok(s.to_density()),
            Built::Mixed(r) => Ok(r.clone()),
            Built::Cat(c) => {
                let d = nalgebra::DVector::from_column_slice(&c.down);
                let u = nalgebra::DVector::from_column_slice(&c.up);
                let m: CMatrix = &d * d.adjoint() + &u * u.adjoint();
                Ok(DensityMatrix::from_matrix(m)?)
            }
        }
    }
}

/// Blue-sideband drive; only `omega_base` has no default.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    /// Rabi rate of |0> -> |1> (rad/s)
    #[arg(long)]
    pub omega_base: Option<f64>,
    /// Lamb-Dicke parameter
    #[arg(long)]
    pub eta: Option<f64>,
    /// Damping rate of the n = 0 component (1/s)
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Exponent of the damping growth with n
    #[arg(long)]
    pub kappa: Option<f64>,
}

impl DriveSpec {
    pub fn build(&self) -> CliResult<DriveParams> {
        let omega = self.omega_base.ok_or_else(|| usage("drive requires `omega_base`"))?;
        Ok(DriveParams::new(
            omega,
            self.eta.unwrap_or(DEFAULT_ETA),
            self.gamma0.unwrap_or(0.0),
            self.kappa.unwrap_or(DEFAULT_KAPPA),
        )?)
    }
}
