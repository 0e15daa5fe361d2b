//! Local strengths `b(x, θ)`: direction-dependent variance densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field_synth::anisotropy::AnisotropyField;
use crate::grid::{Disk, GridSpec2D};

/// A real function of position and direction that can be evaluated anywhere.
pub trait DirectionalField: Sync {
    fn grid(&self) -> &GridSpec2D;
    /// Disk outside of which the field vanishes.
    fn support(&self) -> &Disk;
    /// Number of equispaced sample directions.
    fn n_ang(&self) -> usize;
    /// Value at point `p` and direction angle `theta` (radians from e₁).
    fn eval(&self, p: [f64; 2], theta: f64) -> f64;
}

/// Samples `f(x_i, θ_j)` on grid nodes and `n_ang` equispaced directions
/// `θ_j = 2πj / n_ang`; layout `values[j * N + i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularField {
    pub grid: GridSpec2D,
    pub disk: Disk,
    pub n_ang: usize,
    pub values: Vec<f64>,
}

impl AngularField {
    pub fn new(grid: GridSpec2D, disk: Disk, n_ang: usize, values: Vec<f64>) -> Result<Self> {
        if n_ang < 32 || n_ang % 2 != 0 {
            return Err(Error::Config(format!("angular sampling must be even and at least 32, got {n_ang}")));
        }
        if values.len() != n_ang * grid.len() {
            return Err(Error::Config("angular samples do not match grid × directions".into()));
        }
        Ok(Self { grid, disk, n_ang, values })
    }

    pub fn from_fn(grid: GridSpec2D, disk: Disk, n_ang: usize, f: impl Fn([f64; 2], f64) -> f64) -> Result<Self> {
        let n = grid.len();
        let mut values = vec![0.0; n_ang * n];
        for j in 0..n_ang {
            let th = angle(j, n_ang);
            for i in 0..n {
                let p = grid.node_at(i);
                if disk.contains(p) {
                    values[j * n + i] = f(p, th);
                }
            }
        }
        Self::new(grid, disk, n_ang, values)
    }

    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], ..self.clone() }
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[j * n..(j + 1) * n]
    }

    /// Largest violation of `f(x, θ) = f(x, θ + π)` relative to the field scale.
    pub fn evenness_defect(&self) -> f64 {
        let n = self.grid.len();
        let half = self.n_ang / 2;
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut worst = 0.0f64;
        for j in 0..half {
            for i in 0..n {
                worst = worst.max((self.values[j * n + i] - self.values[(j + half) * n + i]).abs());
            }
        }
        worst / scale
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(), ..self.clone() })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.n_ang != other.n_ang {
            return Err(Error::Inconsistent("angular fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        crate::numerics::sum::norm(&self.values)
    }
}

pub fn angle(j: usize, n_ang: usize) -> f64 {
    2.0 * PI * j as f64 / n_ang as f64
}

impl DirectionalField for AngularField {
    fn grid(&self) -> &GridSpec2D {
        &self.grid
    }
    fn support(&self) -> &Disk {
        &self.disk
    }
    fn n_ang(&self) -> usize {
        self.n_ang
    }
    /// Bilinear in space, linear in angle between samples.
    fn eval(&self, p: [f64; 2], theta: f64) -> f64 {
        let n = self.grid.len();
        let t = theta.rem_euclid(2.0 * PI) / (2.0 * PI) * self.n_ang as f64;
        let j0 = (t.floor() as usize) % self.n_ang;
        let j1 = (j0 + 1) % self.n_ang;
        let w = t - t.floor();
        let st = self.grid.bilinear_stencil(p);
        let mut a = 0.0;
        let mut b = 0.0;
        for (i, wi) in st {
            if i != usize::MAX {
                a += wi * self.values[j0 * n + i];
                b += wi * self.values[j1 * n + i];
            }
        }
        (1.0 - w) * a + w * b
    }
}

/// Local strength of order `ε`; optionally carries the exact quadratic form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalStrength {
    pub samples: AngularField,
    pub epsilon: f64,
    pub form: Option<AnisotropyField>,
    pub id: String,
}

fn content_id(samples: &AngularField, epsilon: f64) -> String {
    let mut h = Sha256::new();
    h.update(epsilon.to_le_bytes());
    h.update((samples.n_ang as u64).to_le_bytes());
    for v in &samples.values {
        h.update(v.to_le_bytes());
    }
    let d = h.finalize();
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Default angular sampling for quadratic strengths.
pub const DEFAULT_N_ANG: usize = 64;

impl LocalStrength {
    /// Non-negative, even sampled strength.
    pub fn from_samples(samples: AngularField, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if samples.evenness_defect() > 1e-12 {
            return Err(Error::InvalidModel("local strength is not even in the direction".into()));
        }
        if let Some(v) = samples.values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidModel(format!("local strength must be non-negative and finite, found {v}")));
        }
        let id = content_id(&samples, epsilon);
        Ok(Self { samples, epsilon, form: None, id })
    }

    pub fn grid(&self) -> &GridSpec2D {
        &self.samples.grid
    }

    pub fn disk(&self) -> &Disk {
        &self.samples.disk
    }

    pub fn is_zero(&self) -> bool {
        self.samples.values.iter().all(|v| *v == 0.0)
    }

    /// True if `b(x, ·)` is constant in the direction at every node (up to round-off).
    pub fn is_isotropic(&self) -> bool {
        let n = self.grid().len();
        let v = &self.samples.values;
        (1..self.samples.n_ang).all(|j| (0..n).all(|i| (v[j * n + i] - v[i]).abs() <= 1e-13 * v[i].abs()))
    }

    /// `b(x_i, θ_j)` at a node.
    pub fn sample(&self, j: usize, node: usize) -> f64 {
        self.samples.values[j * self.grid().len() + node]
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("(A4) requires ε > 0, got {epsilon}")));
    }
    Ok(())
}

impl DirectionalField for LocalStrength {
    fn grid(&self) -> &GridSpec2D {
        &self.samples.grid
    }
    fn support(&self) -> &Disk {
        &self.samples.disk
    }
    fn n_ang(&self) -> usize {
        self.samples.n_ang
    }
    fn eval(&self, p: [f64; 2], theta: f64) -> f64 {
        match &self.form {
            Some(a) => {
                let [a1, a2, a3] = a.interp(p);
                let (s, c) = theta.sin_cos();
                a1 * c * c + a2 * s * s + 2.0 * a3 * c * s
            }
            None => self.samples.eval(p, theta),
        }
    }
}

/// `b(x, θ) = ⟨θ, A(x) θ⟩`, sampled at [`DEFAULT_N_ANG`] directions.
pub fn build_quadratic_strength(a: &AnisotropyField, epsilon: f64) -> Result<LocalStrength> {
    build_quadratic_strength_with(a, epsilon, DEFAULT_N_ANG)
}

pub fn build_quadratic_strength_with(a: &AnisotropyField, epsilon: f64, n_ang: usize) -> Result<LocalStrength> {
    check_epsilon(epsilon)?;
    if let Some((i, lo)) = a.psd_violation() {
        let p = a.grid.node_at(i);
        return Err(Error::InvalidModel(format!(
            "A(x) is not positive semidefinite at {p:?} (eigenvalue {lo:.3e})"
        )));
    }
    let n = a.grid.len();
    let mut values = vec![0.0; n_ang * n];
    for j in 0..n_ang {
        let (s, c) = angle(j, n_ang).sin_cos();
        // Exact evenness: θ and θ + π share the same (c², s², cs).
        let (c2, s2, cs) = if j >= n_ang / 2 {
            let (s0, c0) = angle(j - n_ang / 2, n_ang).sin_cos();
            (c0 * c0, s0 * s0, c0 * s0)
        } else {
            (c * c, s * s, c * s)
        };
        for i in 0..n {
            // PSD forms are non-negative; clamp round-off from the rank-deficient case.
            values[j * n + i] = (a.a1[i] * c2 + a.a2[i] * s2 + 2.0 * a.a3[i] * cs).max(0.0);
        }
    }
    let samples = AngularField::new(a.grid, a.disk, n_ang, values)?;
    let id = content_id(&samples, epsilon);
    Ok(LocalStrength { samples, epsilon, form: Some(a.clone()), id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::anisotropy::Preset;

    fn grid() -> GridSpec2D {
        GridSpec2D::square([0.0, 0.0], 2.5, 32).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_strength() {
        let a = AnisotropyField::zero(grid(), Disk::unit()).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        assert!(b.is_zero());
    }

    #[test]
    fn identity_gives_unit_strength() {
        let a = AnisotropyField::preset(grid(), Disk::unit(), Preset::Identity).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        for (i, p) in grid().nodes().enumerate() {
            for j in 0..b.n_ang() {
                let expect = if Disk::unit().contains(p) { 1.0 } else { 0.0 };
                assert!((b.sample(j, i) - expect).abs() < 1e-15);
            }
        }
        assert!(b.is_isotropic());
    }

    #[test]
    fn rank_one_gives_cos_squared() {
        let a = AnisotropyField::constant(grid(), Disk::unit(), [1.0, 0.0, 0.0]).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        let i = grid().index(16, 16);
        for j in 0..b.n_ang() {
            let th = angle(j, b.n_ang());
            assert!((b.sample(j, i) - th.cos().powi(2)).abs() < 1e-14);
        }
        assert!((b.eval([0.1, 0.2], 0.3) - 0.3f64.cos().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn quadratic_samples_are_exactly_even() {
        let a = AnisotropyField::preset(grid(), Disk::unit(), Preset::Default).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        assert_eq!(b.samples.evenness_defect(), 0.0);
        assert!(b.samples.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = AnisotropyField::constant(grid(), Disk::unit(), [1.0, -0.5, 0.0]).unwrap();
        assert!(matches!(build_quadratic_strength(&a, 0.5), Err(Error::InvalidModel(_))));
        let ok = AnisotropyField::constant(grid(), Disk::unit(), [1.0, 1.0, 0.0]).unwrap();
        assert!(build_quadratic_strength(&ok, 0.0).is_err());
    }

    #[test]
    fn sampled_evaluation_interpolates_angles() {
        let a = AnisotropyField::preset(grid(), Disk::unit(), Preset::Default).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        let sampled = LocalStrength::from_samples(b.samples.clone(), 0.5).unwrap();
        let p = grid().node(15, 17);
        for th in [0.05, 1.0, 2.9, 4.4] {
            assert!((sampled.eval(p, th) - b.eval(p, th)).abs() < 3e-3);
        }
    }
}
