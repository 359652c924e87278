//! Motional quantum states of a single trapped ion.
//!
//! The crate covers the full loop of a harmonic-oscillator experiment on a
//! truncated Fock basis:
//!
//! * [`fock`]: state constructors (Fock, thermal, coherent, squeezed vacuum,
//!   spin-motion cat) and displacement operators.
//! * [`signal`]: blue-sideband and cat-interferometer `P↓` signals, with
//!   seeded shot-noise sampling.
//! * [`tomography`]: displaced populations, density-matrix reconstruction on a
//!   circle of displacements, parity-sum Wigner functions.
//! * [`forced`]: exact coherent-state propagator under a uniform force, plus a
//!   numerical Schrödinger integrator to check it against.
//! * [`decoherence`]: white-noise Monte Carlo for dephasing of two superposed
//!   coherent states.
//! * [`fit`]: damped Gauss-Newton fits of the measured signals.

pub mod decoherence;
pub mod error;
pub mod fit;
pub mod fock;
pub mod forced;
pub mod linalg;
pub mod quad;
pub mod rng;
pub mod signal;
pub mod special;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
