//! Frozen-coefficient spectral synthesis of Gaussian Robin coefficients.
//!
//! White noise on the grid is filtered by `(c + |ξ|²)^{-(1+ε)/2}` restricted to
//! antipodal angular sectors; each sector is modulated node-wise by
//! `√b(x, θ_s)` and the sum is multiplied by a smooth cutoff of the support
//! disk. Noise at node `i` is drawn from a ChaCha stream keyed by
//! `(seed, i)`, so synthesis is independent of thread scheduling.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::covariance::CovarianceModel;
use crate::field_synth::strength::DirectionalField;
use crate::grid::{plateau, smooth_step, Disk, GridSpec2D};
use crate::numerics::fft::{upsample_real, Fft2};

/// One realization of the Robin coefficient on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub grid: GridSpec2D,
    pub disk: Disk,
    pub values: Vec<f64>,
    pub seed: u64,
    pub epsilon: f64,
    pub strength_ref: String,
}

impl FieldRealization {
    pub fn zeros(grid: GridSpec2D, disk: Disk, epsilon: f64) -> Self {
        Self { grid, disk, values: vec![0.0; grid.len()], seed: 0, epsilon, strength_ref: "zero".into() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn at(&self, p: [f64; 2]) -> f64 {
        self.grid.interp(&self.values, p)
    }

    /// Band-limited refinement by an integer factor (same window).
    pub fn upsampled(&self, factor: usize) -> Self {
        let (grid, values) = upsample_real(&self.grid, &self.values, factor);
        Self { grid, values, ..self.clone() }
    }

    /// Largest |λ| at nodes farther than two cells outside the support disk.
    pub fn leakage(&self) -> f64 {
        let h = self.grid.min_spacing();
        self.grid
            .nodes()
            .zip(&self.values)
            .filter(|(p, _)| self.disk.distance(*p) > 2.0 * h)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

/// Standard normal draw for node `node` of realization `seed`.
fn node_rng(base: &ChaCha8Rng, node: usize) -> ChaCha8Rng {
    let mut r = base.clone();
    r.set_stream(node as u64);
    r.set_word_pos(0);
    r
}

/// Grid white noise with variance `1/h²` per node (unit spectral density).
pub fn white_noise(grid: &GridSpec2D, seed: u64) -> Vec<f64> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / grid.cell_area().sqrt();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let v: f64 = node_rng(&base, i).sample(StandardNormal);
            v * s
        })
        .collect()
}

/// C∞ cutoff: 1 on the disk, 0 beyond a two-cell collar.
pub fn support_cutoff(grid: &GridSpec2D, disk: &Disk) -> Vec<f64> {
    let h = grid.min_spacing();
    grid.nodes().map(|p| smooth_step(disk.distance(p) / (2.0 * h))).collect()
}

/// Precomputed filters for repeated sampling from one model.
pub struct FieldSynthesizer {
    grid: GridSpec2D,
    disk: Disk,
    epsilon: f64,
    strength_ref: String,
    fft: Fft2,
    /// `√((c + |ξ|²)^{-1-ε})` per frequency, Nyquist lines removed.
    radial: Vec<f64>,
    /// Sector index per frequency (`usize::MAX` for the DC bin, shared by all sectors).
    sector: Vec<usize>,
    /// `cutoff(x) √b(x, θ_s)` per sector, layout `[s * N + i]`.
    modulation: Vec<f64>,
    n_sectors: usize,
}

impl FieldSynthesizer {
    pub fn new(model: &CovarianceModel, grid: &GridSpec2D) -> Result<Self> {
        let strength = &model.strength;
        if !grid.same_as(strength.grid()) {
            return Err(Error::Config("sampling grid differs from the covariance model grid".into()));
        }
        let disk = *strength.disk();
        grid.check_support(&disk)?;
        if grid.nodes_across(&disk) < 16.0 {
            return Err(Error::Config(format!(
                "grid resolves the support disk with only {:.1} nodes across its diameter (need 16)",
                grid.nodes_across(&disk)
            )));
        }
        let n = grid.len();
        let isotropic = strength.is_isotropic();
        let n_sectors = if isotropic { 1 } else { strength.n_ang() / 2 };
        let width = PI / n_sectors as f64;
        let (nx, ny) = (grid.nx, grid.ny);
        let mut radial = vec![0.0; n];
        let mut sector = vec![0usize; n];
        for i in 0..n {
            let (ix, iy) = (i % nx, i / nx);
            if ix == nx / 2 || iy == ny / 2 {
                continue;
            }
            let xi = grid.xi(i);
            radial[i] = model.radial_factor(xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            sector[i] = if i == 0 {
                usize::MAX
            } else {
                let a = xi[1].atan2(xi[0]).rem_euclid(PI);
                ((a / width).round() as usize) % n_sectors
            };
        }
        let cutoff = support_cutoff(grid, &disk);
        let mut modulation = vec![0.0; n_sectors * n];
        for s in 0..n_sectors {
            for i in 0..n {
                modulation[s * n + i] = cutoff[i] * strength.sample(s, i).sqrt();
            }
        }
        Ok(Self {
            grid: *grid,
            disk,
            epsilon: model.epsilon(),
            strength_ref: strength.id.clone(),
            fft: Fft2::for_grid(grid),
            radial,
            sector,
            modulation,
            n_sectors,
        })
    }

    pub fn sample(&self, seed: u64) -> FieldRealization {
        let n = self.grid.len();
        let mut noise: Vec<Complex64> = white_noise(&self.grid, seed).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut noise);
        let dc_weight = (1.0 / self.n_sectors as f64).sqrt();
        // Sectors are independent; sum them in a fixed order.
        let chunk = 8;
        let mut values = vec![0.0; n];
        for start in (0..self.n_sectors).step_by(chunk) {
            let end = (start + chunk).min(self.n_sectors);
            let parts: Vec<Vec<f64>> = (start..end)
                .into_par_iter()
                .map(|s| {
                    let mut spec: Vec<Complex64> = (0..n)
                        .map(|i| {
                            let w = match self.sector[i] {
                                usize::MAX => dc_weight,
                                t if t == s => 1.0,
                                _ => 0.0,
                            };
                            noise[i] * (w * self.radial[i])
                        })
                        .collect();
                    self.fft.inverse(&mut spec);
                    let m = &self.modulation[s * n..(s + 1) * n];
                    spec.iter().zip(m).map(|(c, m)| c.re * m).collect()
                })
                .collect();
            for p in parts {
                for (v, x) in values.iter_mut().zip(p) {
                    *v += x;
                }
            }
        }
        FieldRealization {
            grid: self.grid,
            disk: self.disk,
            values,
            seed,
            epsilon: self.epsilon,
            strength_ref: self.strength_ref.clone(),
        }
    }
}

/// Draw one realization with covariance symbol `model` on `grid`.
pub fn sample_field(model: &CovarianceModel, grid: &GridSpec2D, seed: u64) -> Result<FieldRealization> {
    Ok(FieldSynthesizer::new(model, grid)?.sample(seed))
}

/// Literal directional-derivative field `q = ψ(x) ∂₁Y`, with `Y` isotropic of
/// symbol `(1 + |ξ|²)^{-2-ε}` and `ψ` the plateau used by the
/// `GaussianPotential` preset. Its principal symbol is `ψ² cos²θ |ξ|^{-2-2ε}`.
pub fn sample_gaussian_potential(grid: &GridSpec2D, disk: &Disk, epsilon: f64, seed: u64) -> Result<FieldRealization> {
    grid.check_support(disk)?;
    let mut spec: Vec<Complex64> = white_noise(grid, seed).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let fft = Fft2::for_grid(grid);
    fft.forward(&mut spec);
    let (nx, ny) = (grid.nx, grid.ny);
    for (i, c) in spec.iter_mut().enumerate() {
        if i % nx == nx / 2 || i / nx == ny / 2 {
            *c = Complex64::default();
            continue;
        }
        let xi = grid.xi(i);
        let f = (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).powf(-(2.0 + epsilon) / 2.0);
        *c *= Complex64::new(0.0, xi[0] * f);
    }
    fft.inverse(&mut spec);
    let values = grid
        .nodes()
        .zip(&spec)
        .map(|(p, c)| {
            let r = disk.center_distance(p) / disk.radius;
            plateau(r, 0.6, 0.9) * c.re
        })
        .collect();
    Ok(FieldRealization {
        grid: *grid,
        disk: *disk,
        values,
        seed,
        epsilon,
        strength_ref: "gaussian-potential-literal".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::anisotropy::{AnisotropyField, Preset};
    use crate::field_synth::strength::build_quadratic_strength;

    fn model(preset: Preset, n: usize) -> CovarianceModel {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, n).unwrap();
        let a = AnisotropyField::preset(g, Disk::unit(), preset).unwrap();
        CovarianceModel::new(build_quadratic_strength(&a, 0.5).unwrap())
    }

    #[test]
    fn zero_model_zero_field() {
        let m = model(Preset::Zero, 64);
        let f = sample_field(&m, m.grid(), 7).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn same_seed_same_bytes() {
        let m = model(Preset::Default, 64);
        let a = sample_field(&m, m.grid(), 42).unwrap();
        let b = sample_field(&m, m.grid(), 42).unwrap();
        assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let c = sample_field(&m, m.grid(), 43).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let m = model(Preset::Default, 64);
        let run = |t: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| sample_field(&m, m.grid(), 9).unwrap())
        };
        assert_eq!(run(1).values, run(3).values);
    }

    #[test]
    fn supported_in_disk() {
        let m = model(Preset::Identity, 64);
        let f = sample_field(&m, m.grid(), 1).unwrap();
        assert_eq!(f.leakage(), 0.0);
        assert!(!f.is_zero());
    }

    #[test]
    fn rejects_coarse_or_mismatched_grid() {
        let g = GridSpec2D::square([0.0, 0.0], 10.0, 32).unwrap();
        let a = AnisotropyField::preset(g, Disk::unit(), Preset::Identity).unwrap();
        let m = CovarianceModel::new(build_quadratic_strength(&a, 0.5).unwrap());
        assert!(matches!(sample_field(&m, &g, 0), Err(Error::Config(_))));
        let m2 = model(Preset::Identity, 64);
        let other = GridSpec2D::square([0.0, 0.0], 2.5, 128).unwrap();
        assert!(matches!(sample_field(&m2, &other, 0), Err(Error::Config(_))));
    }

    #[test]
    fn white_noise_has_unit_density() {
        let g = GridSpec2D::square([0.0, 0.0], 2.0, 128).unwrap();
        let w = white_noise(&g, 3);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var * g.cell_area() - 1.0).abs() < 0.02);
    }
}
