//! Numerical building blocks shared by the pipeline modules.

pub mod bessel;
pub mod fft;
pub mod linalg;
pub mod quad;
pub mod stats;
pub mod sum;

pub use num_complex::Complex64;
