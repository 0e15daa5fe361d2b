//! From backscatter data back to the anisotropy matrix field.
//!
//! * [`reduction`] inverts the height dependence at one center.
//! * [`joint`] fits an even-mode strength to all centers at once, which gives
//!   `𝒮b` on a full center grid.
//! * [`components`] turns the Fourier slices into `tr A` and, with one known
//!   entry, the remaining two entries.

pub mod components;
pub mod joint;
pub mod reduction;

pub use components::{recover_components, recover_trace, Component, KnownComponent, RecoveredAnisotropy, RecoveryDiagnostics};
pub use joint::{default_exterior_points, exterior_points, fit_strength, JointFit, JointFitOptions, ModeField};
pub use reduction::{reduce_to_radon, stability_constant, Reduction, ReductionProblem};
