//! Covariance symbols and their kernels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::strength::{DirectionalField, LocalStrength};
use crate::grid::GridSpec2D;
use crate::numerics::fft::Fft2;

/// Covariance with symbol `σ(x, ξ) = b(x, ξ⁰) (c + |ξ|²)^(-1-ε)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub strength: LocalStrength,
    /// Low-frequency regularization `c` (1 by default).
    pub low_freq: f64,
}

impl CovarianceModel {
    pub fn new(strength: LocalStrength) -> Self {
        Self { strength, low_freq: 1.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.strength.epsilon
    }

    pub fn grid(&self) -> &GridSpec2D {
        self.strength.grid()
    }

    /// `(c + |ξ|²)^(-1-ε)`.
    pub fn radial_factor(&self, xi2: f64) -> f64 {
        (self.low_freq + xi2).powf(-1.0 - self.epsilon())
    }

    /// Mean of `b(x, ·)` over directions; stands in for `b(x, ξ⁰)` at `ξ = 0`.
    pub fn angular_mean(&self, x: [f64; 2]) -> f64 {
        let n = self.strength.n_ang();
        (0..n).map(|j| self.strength.eval(x, crate::field_synth::strength::angle(j, n))).sum::<f64>() / n as f64
    }

    pub fn symbol(&self, x: [f64; 2], xi: [f64; 2]) -> f64 {
        let xi2 = xi[0] * xi[0] + xi[1] * xi[1];
        let b = if xi2 == 0.0 { self.angular_mean(x) } else { self.strength.eval(x, xi[1].atan2(xi[0])) };
        b * self.radial_factor(xi2)
    }
}

/// Kernel `c(z, z − d)` of the symbol frozen at `z`, tabulated at all lattice offsets `d`.
pub struct FrozenKernel {
    grid: GridSpec2D,
    table: Vec<f64>,
}

impl FrozenKernel {
    pub fn new(model: &CovarianceModel, z: [f64; 2]) -> Self {
        let grid = *model.grid();
        let n = grid.len();
        let mut spec: Vec<Complex64> = (0..n).map(|i| Complex64::new(model.symbol(z, grid.xi(i)), 0.0)).collect();
        Fft2::for_grid(&grid).inverse(&mut spec);
        // (2π)^-2 Σ σ Δξ² e^{iξ·d} with Δξ² = (2π)²/(Lx Ly); the FFT inverse already divides by N.
        let scale = n as f64 / (grid.extent[0] * grid.extent[1]);
        Self { grid, table: spec.iter().map(|c| c.re * scale).collect() }
    }

    /// Periodic bilinear interpolation of the tabulated kernel at offset `d`.
    pub fn at(&self, d: [f64; 2]) -> f64 {
        let h = self.grid.spacing();
        let (nx, ny) = (self.grid.nx as i64, self.grid.ny as i64);
        let u = d[0] / h[0];
        let v = d[1] / h[1];
        let (i0, j0) = (u.floor(), v.floor());
        let (fu, fv) = (u - i0, v - j0);
        let t = |i: i64, j: i64| self.table[(j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize];
        let (i0, j0) = (i0 as i64, j0 as i64);
        (1.0 - fu) * (1.0 - fv) * t(i0, j0) + fu * (1.0 - fv) * t(i0 + 1, j0) + (1.0 - fu) * fv * t(i0, j0 + 1) + fu * fv * t(i0 + 1, j0 + 1)
    }
}

/// `c(z1, z2) = (2π)^{-2} ∫ e^{i(z1−z2)·ξ} σ(z1, ξ) dξ`, evaluated on the model grid's frequency lattice.
pub fn covariance_kernel(model: &CovarianceModel, z1: [f64; 2], z2: [f64; 2]) -> Result<f64> {
    let g = model.grid();
    for z in [z1, z2] {
        if !g.covers(z) {
            return Err(Error::Domain(format!("point {z:?} lies outside the model grid")));
        }
    }
    Ok(FrozenKernel::new(model, z1).at([z1[0] - z2[0], z1[1] - z2[1]]))
}
