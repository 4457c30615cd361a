//! Spectral simulation and variational solvers for the 3D nonlinear
//! Schrödinger equation with a constant magnetic field in the symmetric gauge.
//!
//! The crate is organized around a periodic spectral discretization:
//!
//! - [`field_grid`] — grids, complex fields, Fourier transforms, differential
//!   operators, deterministic reductions, and checkpoint I/O;
//! - [`functionals`] — conserved quantities (mass, energy, angular momentum)
//!   and the auxiliary virial/Pohozaev/Nehari functionals;
//! - [`soliton_q`] — the free radial soliton `Q` and the sharp constants
//!   derived from it;
//! - [`dynamics`] — split-step time integration with conservation monitoring
//!   and blow-up detection;
//! - [`classify`] — global-existence / blow-up verdicts for initial data,
//!   with full numerical evidence;
//! - [`ground_states`] — constrained and action minimizers for standing
//!   waves, plus the strong-instability scaling experiment.

pub mod classify;
pub mod dynamics;
pub mod error;
pub mod field_grid;
pub mod functionals;
pub mod ground_states;
pub mod soliton_q;

pub use error::{Error, Result};
