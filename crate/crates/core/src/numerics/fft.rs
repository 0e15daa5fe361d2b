//! Two-dimensional FFTs on row-major grids, plus the continuum scaling used
//! throughout: `ℱf(ξ) = ∫ f(x) e^{-iξ·x} dx` approximated by `h² Σ f(x_n) e^{-iξ·x_n}`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec2D;

/// Planned 2-D transform for an `nx × ny` row-major array (`ix` fastest).
pub struct Fft2 {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
        }
    }

    pub fn for_grid(grid: &GridSpec2D) -> Self {
        Self::new(grid.nx, grid.ny)
    }

    fn run(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.nx * self.ny, "array does not match the planned shape");
        let (nx, ny) = (self.nx, self.ny);
        data.par_chunks_mut(nx).for_each_init(
            || vec![Complex64::default(); row.get_inplace_scratch_len()],
            |scratch, r| row.process_with_scratch(r, scratch),
        );
        let mut t = vec![Complex64::default(); nx * ny];
        transpose(data, &mut t, nx, ny);
        t.par_chunks_mut(ny).for_each_init(
            || vec![Complex64::default(); col.get_inplace_scratch_len()],
            |scratch, c| col.process_with_scratch(c, scratch),
        );
        transpose(&t, data, ny, nx);
    }

    /// Unnormalized forward transform `Σ f_n e^{-2πi k·n/N}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let s = 1.0 / (self.nx * self.ny) as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], nx: usize, ny: usize) {
    // src is ny rows of nx; dst becomes nx rows of ny.
    const B: usize = 32;
    for by in (0..ny).step_by(B) {
        for bx in (0..nx).step_by(B) {
            for y in by..(by + B).min(ny) {
                for x in bx..(bx + B).min(nx) {
                    dst[x * ny + y] = src[y * nx + x];
                }
            }
        }
    }
}

/// Continuum Fourier transform of real grid samples.
pub fn forward_continuum(grid: &GridSpec2D, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_continuum_c(grid, &mut data);
    data
}

/// In-place continuum transform of complex grid samples.
pub fn forward_continuum_c(grid: &GridSpec2D, data: &mut [Complex64]) {
    Fft2::for_grid(grid).forward(data);
    let area = grid.cell_area();
    let o = grid.origin;
    data.par_iter_mut().enumerate().for_each(|(i, v)| {
        let xi = grid.xi(i);
        *v *= Complex64::from_polar(area, -(xi[0] * o[0] + xi[1] * o[1]));
    });
}

/// Inverse of [`forward_continuum_c`]: `f(x_n) = (2π)^{-2} ∫ ℱf(ξ) e^{iξ·x_n} dξ` on the FFT lattice.
pub fn inverse_continuum_c(grid: &GridSpec2D, data: &mut [Complex64]) {
    let area = grid.cell_area();
    let o = grid.origin;
    data.par_iter_mut().enumerate().for_each(|(i, v)| {
        let xi = grid.xi(i);
        *v *= Complex64::from_polar(1.0 / area, xi[0] * o[0] + xi[1] * o[1]);
    });
    Fft2::for_grid(grid).inverse(data);
}

/// Band-limited (spectral) upsampling of real samples by an integer factor.
///
/// The refined grid keeps the origin and window, so every original node is
/// reproduced exactly up to round-off.
pub fn upsample_real(grid: &GridSpec2D, values: &[f64], factor: usize) -> (GridSpec2D, Vec<f64>) {
    if factor == 1 {
        return (*grid, values.to_vec());
    }
    let fine = grid.refined(factor);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut coarse: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::new(nx, ny).forward(&mut coarse);
    let (fx, fy) = (fine.nx, fine.ny);
    let mut spec = vec![Complex64::default(); fx * fy];
    let map = |i: usize, n: usize, nf: usize| -> Option<usize> {
        if i < n / 2 {
            Some(i)
        } else if i > n / 2 {
            Some(nf - (n - i))
        } else {
            None
        }
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let v = coarse[iy * nx + ix];
            // Nyquist bins are split symmetrically so the result stays real.
            let tx: Vec<(usize, f64)> = match map(ix, nx, fx) {
                Some(t) => vec![(t, 1.0)],
                None => vec![(nx / 2, 0.5), (fx - nx / 2, 0.5)],
            };
            let ty: Vec<(usize, f64)> = match map(iy, ny, fy) {
                Some(t) => vec![(t, 1.0)],
                None => vec![(ny / 2, 0.5), (fy - ny / 2, 0.5)],
            };
            for &(jx, wx) in &tx {
                for &(jy, wy) in &ty {
                    spec[jy * fx + jx] += v * (wx * wy);
                }
            }
        }
    }
    Fft2::new(fx, fy).inverse(&mut spec);
    let scale = (factor * factor) as f64;
    (fine, spec.iter().map(|c| c.re * scale).collect())
}
