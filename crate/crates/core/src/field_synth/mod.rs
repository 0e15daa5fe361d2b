//! Local-strength models and Gaussian field synthesis.

pub mod anisotropy;
pub mod covariance;
pub mod empirical;
pub mod sampler;
pub mod strength;

pub use anisotropy::{AnisotropyField, Preset, PsdReport};
pub use covariance::{covariance_kernel, CovarianceModel, FrozenKernel};
pub use empirical::{empirical_covariance, mean_power_spectrum, Estimate};
pub use sampler::{sample_field, sample_gaussian_potential, FieldRealization, FieldSynthesizer};
pub use strength::{build_quadratic_strength, AngularField, DirectionalField, LocalStrength};
