//! Numerical laboratory for half-space acoustic scattering from a random,
//! anisotropic impedance boundary.
//!
//! The crate is organized along the pipeline:
//!
//! * [`field_synth`] builds local-strength models `b(x, θ)` and samples
//!   Gaussian Robin coefficients whose covariance has principal symbol
//!   `b(x, ξ⁰) |ξ|^(-2-2ε)`.
//! * [`forward`] evaluates the boundary single-layer operator, solves the
//!   boundary integral equation, and forms band-averaged backscatter data.
//! * [`asymptotics`] evaluates the deterministic high-frequency limit of the
//!   backscatter correlation.
//! * [`sradon`] implements the anisotropic spherical Radon transform and the
//!   Fourier slices it determines.
//! * [`recovery`] maps backscatter data back to the Radon domain and recovers
//!   the anisotropy matrix field.
//! * [`io`] holds the binary container, CSV and manifest formats.

pub mod asymptotics;
pub mod error;
pub mod field_synth;
pub mod forward;
pub mod grid;
pub mod io;
pub mod numerics;
pub mod recovery;
pub mod sradon;

pub use error::{Error, Result};
pub use grid::{Disk, GridSpec2D};
