//! Boundary single-layer operator `S_k φ(x) = ∫_D g_k(x − z) φ(z) dz` on the plane.
//!
//! Applied as a Fourier multiplier on a 2× zero-padded lattice. The
//! multiplier is the exact transform of the kernel truncated at `|x| ≤ R`
//! with `R ≥ diam D`, `p_R(ρ) = ½ ∫₀^R J₀(ρr) e^{ikr} dr`, so restricted to `D`
//! the periodic convolution reproduces the untruncated operator.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::green::greens_r;
use crate::grid::{Disk, GridSpec2D};
use crate::numerics::bessel::j0;
use crate::numerics::fft::Fft2;
use crate::numerics::quad::gauss_legendre;
use crate::numerics::sum::norm_c;

/// Complex density on grid nodes, zero outside the support disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDensity {
    pub grid: GridSpec2D,
    pub disk: Disk,
    pub k: f64,
    pub values: Vec<Complex64>,
}

impl BoundaryDensity {
    pub fn zeros(grid: GridSpec2D, disk: Disk, k: f64) -> Self {
        Self { grid, disk, k, values: vec![Complex64::default(); grid.len()] }
    }

    pub fn norm(&self) -> f64 {
        norm_c(&self.values) * self.grid.cell_area().sqrt()
    }

    /// Zero every node outside the disk.
    pub fn restrict(&mut self) {
        for (p, v) in self.grid.nodes().zip(self.values.iter_mut()) {
            if !self.disk.contains(p) {
                *v = Complex64::default();
            }
        }
    }
}

/// Untruncated symbol of the boundary single layer:
/// `1 / (2√(ρ² − k²))` for `ρ > k` and `i / (2√(k² − ρ²))` for `ρ < k`.
pub fn trace_symbol(rho: f64, k: f64) -> Result<Complex64> {
    let d = rho * rho - k * k;
    if d == 0.0 {
        return Err(Error::Singular("symbol evaluated on the circle |ξ| = k".into()));
    }
    Ok(if d > 0.0 { Complex64::new(0.5 / d.sqrt(), 0.0) } else { Complex64::new(0.0, 0.5 / (-d).sqrt()) })
}

/// `p_R(ρ) = ½ ∫₀^R J₀(ρ r) e^{ikr} dr` by composite Gauss–Legendre with panels
/// shorter than half the local oscillation length.
pub fn truncated_symbol(rho: f64, k: f64, r_max: f64, gl: &(Vec<f64>, Vec<f64>)) -> Complex64 {
    let panels = (((rho + k) * r_max / PI).ceil() as usize + 2).max(4);
    let h = r_max / panels as f64;
    let mut acc = Complex64::default();
    for p in 0..panels {
        let lo = p as f64 * h;
        for (x, w) in gl.0.iter().zip(&gl.1) {
            let r = lo + 0.5 * h * (x + 1.0);
            acc += Complex64::from_polar(0.5 * h * w * j0(rho * r), k * r);
        }
    }
    0.5 * acc
}

/// Matrix-free `χ_D S_k χ_D` on one grid.
pub struct SlpOperator {
    pub grid: GridSpec2D,
    pub disk: Disk,
    pub k: f64,
    mask: Vec<bool>,
    pnx: usize,
    pny: usize,
    fft: Fft2,
    multiplier: Vec<Complex64>,
}

impl SlpOperator {
    pub fn new(grid: &GridSpec2D, disk: &Disk, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Config(format!("wavenumber must be positive, got {k}")));
        }
        grid.check_support(disk)?;
        if grid.nyquist() <= 2.0 * k {
            return Err(Error::Aliasing(format!(
                "grid Nyquist frequency {:.1} does not exceed 2k = {:.1}",
                grid.nyquist(),
                2.0 * k
            )));
        }
        let h = grid.spacing();
        let (pnx, pny) = (2 * grid.nx, 2 * grid.ny);
        let (lx, ly) = (pnx as f64 * h[0], pny as f64 * h[1]);
        let r_max = disk.diameter() + 4.0 * h[0].max(h[1]);
        debug_assert!(lx.min(ly) >= disk.diameter() + r_max);
        let gl = gauss_legendre(8);
        // One symbol evaluation per distinct |frequency index| pair.
        let square = (lx - ly).abs() < 1e-12 * lx;
        let (hx_n, hy_n) = (pnx / 2 + 1, pny / 2 + 1);
        let keys: Vec<(usize, usize)> = (0..hy_n)
            .flat_map(|j| (0..hx_n).map(move |i| (i, j)))
            .filter(|&(i, j)| !square || i <= j)
            .collect();
        let vals: Vec<Complex64> = keys
            .par_iter()
            .map(|&(i, j)| {
                let xi = [2.0 * PI * i as f64 / lx, 2.0 * PI * j as f64 / ly];
                truncated_symbol(xi[0].hypot(xi[1]), k, r_max, &gl)
            })
            .collect();
        let table: HashMap<(usize, usize), Complex64> = keys.into_iter().zip(vals).collect();
        let mut multiplier = vec![Complex64::default(); pnx * pny];
        for iy in 0..pny {
            let j = if iy <= pny / 2 { iy } else { pny - iy };
            for ix in 0..pnx {
                let i = if ix <= pnx / 2 { ix } else { pnx - ix };
                let key = if square && i > j { (j, i) } else { (i, j) };
                multiplier[iy * pnx + ix] = table[&key];
            }
        }
        let mask = grid.nodes().map(|p| disk.contains(p)).collect();
        Ok(Self { grid: *grid, disk: *disk, k, mask, pnx, pny, fft: Fft2::new(pnx, pny), multiplier })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn convolve(&self, phi: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert_eq!(phi.len(), nx * ny);
        let mut buf = vec![Complex64::default(); self.pnx * self.pny];
        for iy in 0..ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                if self.mask[i] {
                    buf[iy * self.pnx + ix] = phi[i];
                }
            }
        }
        self.fft.forward(&mut buf);
        buf.par_iter_mut().zip(&self.multiplier).for_each(|(b, m)| *b *= if adjoint { m.conj() } else { *m });
        self.fft.inverse(&mut buf);
        let mut out = vec![Complex64::default(); nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                out[iy * nx + ix] = buf[iy * self.pnx + ix];
            }
        }
        out
    }

    /// `S_k(χ_D φ)` on every grid node.
    pub fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        self.convolve(phi, false)
    }

    /// `χ_D S_k χ_D φ`.
    pub fn apply_restricted(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.convolve(phi, false);
        for (o, m) in out.iter_mut().zip(&self.mask) {
            if !m {
                *o = Complex64::default();
            }
        }
        out
    }

    fn apply_restricted_adjoint(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.convolve(phi, true);
        for (o, m) in out.iter_mut().zip(&self.mask) {
            if !m {
                *o = Complex64::default();
            }
        }
        out
    }

    /// Power-iteration estimate of the L² operator norm of `χ_D S_k χ_D`.
    pub fn norm_estimate(&self, iterations: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = self
            .mask
            .iter()
            .map(|&m| if m { Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) } else { Complex64::default() })
            .collect();
        let mut est = 0.0;
        for _ in 0..iterations {
            let n = norm_c(&v);
            v.iter_mut().for_each(|x| *x /= n);
            let w = self.apply_restricted_adjoint(&self.apply_restricted(&v));
            est = norm_c(&w).sqrt();
            v = w;
        }
        est
    }
}

/// `S_k φ` for a boundary density, evaluated on the density's grid.
pub fn apply_slp_boundary(phi: &BoundaryDensity, k: f64) -> Result<Vec<Complex64>> {
    let op = SlpOperator::new(&phi.grid, &phi.disk, k)?;
    for (p, v) in phi.grid.nodes().zip(&phi.values) {
        if *v != Complex64::default() && !phi.disk.contains(p) {
            return Err(Error::Domain("boundary density is not supported in the disk".into()));
        }
    }
    Ok(op.apply(&phi.values))
}

/// Nyström evaluation of `χ_D S_k φ` with singularity subtraction:
/// `Σ_{m≠n} g(x_n − x_m)(φ_m − φ_n) h² + φ_n ∫_D g(x_n − z) dz`, the last
/// integral done in polar coordinates around `x_n`. Quadratic cost; used as an oracle.
pub fn slp_direct(grid: &GridSpec2D, disk: &Disk, phi: &[Complex64], k: f64) -> Vec<Complex64> {
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| disk.contains(grid.node_at(i))).collect();
    let area = grid.cell_area();
    let n_theta = 512;
    let mut out = vec![Complex64::default(); grid.len()];
    let vals: Vec<Complex64> = nodes
        .par_iter()
        .map(|&n| {
            let x = grid.node_at(n);
            let mut acc = Complex64::default();
            for &m in &nodes {
                if m == n {
                    continue;
                }
                let z = grid.node_at(m);
                let r = (x[0] - z[0]).hypot(x[1] - z[1]);
                acc += greens_r(r, k) * (phi[m] - phi[n]) * area;
            }
            // ∫_0^{2π} ∫_0^{ρ(θ)} e^{ikr}/(4π) dr dθ = (1/4π) ∫ (e^{ikρ(θ)} − 1)/(ik) dθ.
            let u = [x[0] - disk.center[0], x[1] - disk.center[1]];
            let mut s = Complex64::default();
            for t in 0..n_theta {
                let th = 2.0 * PI * t as f64 / n_theta as f64;
                let (sn, cs) = th.sin_cos();
                let ud = u[0] * cs + u[1] * sn;
                let rho = -ud + (ud * ud - (u[0] * u[0] + u[1] * u[1]) + disk.radius * disk.radius).sqrt();
                s += (Complex64::from_polar(1.0, k * rho) - 1.0) / Complex64::new(0.0, k);
            }
            let self_int = s * (2.0 * PI / n_theta as f64) / (4.0 * PI);
            acc + phi[n] * self_int
        })
        .collect();
    for (&n, v) in nodes.iter().zip(vals) {
        out[n] = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec2D {
        GridSpec2D::square([0.0, 0.0], 2.5, n).unwrap()
    }

    #[test]
    fn zero_density_maps_to_zero() {
        let phi = BoundaryDensity::zeros(grid(32), Disk::unit(), 3.0);
        assert!(apply_slp_boundary(&phi, 3.0).unwrap().iter().all(|v| *v == Complex64::default()));
    }

    #[test]
    fn aliasing_rejected() {
        assert!(matches!(SlpOperator::new(&grid(32), &Disk::unit(), 30.0), Err(Error::Aliasing(_))));
    }

    #[test]
    fn truncated_symbol_approaches_trace_symbol() {
        let gl = gauss_legendre(8);
        let k = 5.0;
        for rho in [60.0, 100.0] {
            let pr = truncated_symbol(rho, k, 40.0, &gl);
            let p = trace_symbol(rho, k).unwrap();
            assert!((pr - p).norm() < 0.05 * p.norm(), "{pr} vs {p}");
        }
        assert!(trace_symbol(5.0, 5.0).is_err());
        assert!(trace_symbol(3.0, 5.0).unwrap().re == 0.0);
    }

    #[test]
    fn truncated_symbol_at_zero_frequency() {
        // p_R(0) = ½ ∫₀^R e^{ikr} dr in closed form.
        let gl = gauss_legendre(8);
        let (k, r) = (3.0, 2.1);
        let exact = 0.5 * (Complex64::from_polar(1.0, k * r) - 1.0) / Complex64::new(0.0, k);
        assert!((truncated_symbol(0.0, k, r, &gl) - exact).norm() < 1e-8);
    }

    #[test]
    fn power_iteration_matches_adjoint_structure() {
        let op = SlpOperator::new(&grid(32), &Disk::unit(), 4.0).unwrap();
        let a = op.norm_estimate(30, 1);
        let b = op.norm_estimate(30, 2);
        assert!(a > 0.0 && (a - b).abs() < 0.02 * a);
    }
}
