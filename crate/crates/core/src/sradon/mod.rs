//! Anisotropic spherical Radon transform, its Fourier slices and its null space.

pub mod null_space;
pub mod slices;
pub mod transform;

pub use null_space::{null_space_project, NullSplit};
pub use slices::{extract_slices, fourier_radon, slice_window, slices_from_strength, FourierRadon, SpectralSlices};
pub use transform::{radii_grid, radon_forward, Centers, RadonGrid};
