//! Symmetric positive semidefinite matrix fields `A(x) = [[a1, a3], [a3, a2]]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bump, plateau, Disk, GridSpec2D};

/// Tolerance for the PSD test relative to the field's eigenvalue bound.
const PSD_TOL: f64 = 1e-12;

/// Built-in anisotropy phantoms. Lengths scale with the support disk radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Preset {
    /// `A ≡ 0`.
    Zero,
    /// `A = I` on the support disk.
    Identity,
    /// `A = g(x) I` with a smooth bump `g`.
    IsotropicBump,
    /// `A = g(x) diag(1, 0)`.
    AxisAligned,
    /// `A = g(x) R(φ(x)) diag(1, 0.3) R(φ(x))ᵀ` with orientation `φ` varying across the disk.
    Default,
    /// `A = v vᵀ` for `v = ψ(x) (1, 0)`, `ψ` a smooth plateau (directional-derivative field).
    GaussianPotential,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => Preset::Zero,
            "identity" => Preset::Identity,
            "isotropic-bump" => Preset::IsotropicBump,
            "axis-aligned" => Preset::AxisAligned,
            "default" => Preset::Default,
            "gaussian-potential" => Preset::GaussianPotential,
            other => return Err(Error::Config(format!("unknown anisotropy preset '{other}'"))),
        })
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::Identity => "identity",
            Preset::IsotropicBump => "isotropic-bump",
            Preset::AxisAligned => "axis-aligned",
            Preset::Default => "default",
            Preset::GaussianPotential => "gaussian-potential",
        }
    }

    /// Matrix entries `[a1, a2, a3]` at `p` for support disk `disk`.
    pub fn eval(&self, disk: &Disk, p: [f64; 2]) -> [f64; 3] {
        let u = [(p[0] - disk.center[0]) / disk.radius, (p[1] - disk.center[1]) / disk.radius];
        let r = u[0].hypot(u[1]);
        let inside = r <= 1.0;
        match self {
            Preset::Zero => [0.0; 3],
            Preset::Identity => {
                if inside {
                    [1.0, 1.0, 0.0]
                } else {
                    [0.0; 3]
                }
            }
            Preset::IsotropicBump => {
                let g = bump(r, 0.9);
                [g, g, 0.0]
            }
            Preset::AxisAligned => [bump(r, 0.9), 0.0, 0.0],
            Preset::Default => {
                let g = bump(r, 0.9);
                let phi = 0.5 + 0.6 * u[0];
                let (s, c) = phi.sin_cos();
                let (l1, l2) = (1.0, 0.3);
                [g * (l1 * c * c + l2 * s * s), g * (l1 * s * s + l2 * c * c), g * (l1 - l2) * c * s]
            }
            Preset::GaussianPotential => {
                let psi = plateau(r, 0.6, 0.9);
                [psi * psi, 0.0, 0.0]
            }
        }
    }
}

/// Report of an eigenvalue-clipping pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub clipped_nodes: usize,
    /// Most negative eigenvalue encountered (0 if none).
    pub min_eigenvalue: f64,
}

/// Sampled anisotropy matrix field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyField {
    pub grid: GridSpec2D,
    pub disk: Disk,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub a3: Vec<f64>,
    pub support_mask: Vec<bool>,
    /// Upper bound on the eigenvalues of `A(x)` over all nodes.
    pub eig_bound: f64,
}

fn eigenvalues(a1: f64, a2: f64, a3: f64) -> (f64, f64) {
    let m = 0.5 * (a1 + a2);
    let d = (0.25 * (a1 - a2).powi(2) + a3 * a3).sqrt();
    (m - d, m + d)
}

impl AnisotropyField {
    /// Assemble from component arrays; entries outside the support disk are zeroed.
    pub fn new(grid: GridSpec2D, disk: Disk, mut a1: Vec<f64>, mut a2: Vec<f64>, mut a3: Vec<f64>) -> Result<Self> {
        grid.check_support(&disk)?;
        let n = grid.len();
        if a1.len() != n || a2.len() != n || a3.len() != n {
            return Err(Error::Config("component arrays do not match the grid".into()));
        }
        if a1.iter().chain(&a2).chain(&a3).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite anisotropy entries".into()));
        }
        let support_mask: Vec<bool> = grid.nodes().map(|p| disk.contains(p)).collect();
        for i in 0..n {
            if !support_mask[i] {
                a1[i] = 0.0;
                a2[i] = 0.0;
                a3[i] = 0.0;
            }
        }
        let eig_bound = (0..n).map(|i| eigenvalues(a1[i], a2[i], a3[i]).1).fold(0.0, f64::max);
        Ok(Self { grid, disk, a1, a2, a3, support_mask, eig_bound })
    }

    pub fn from_fn(grid: GridSpec2D, disk: Disk, f: impl Fn([f64; 2]) -> [f64; 3]) -> Result<Self> {
        let vals: Vec<[f64; 3]> = grid.nodes().map(f).collect();
        Self::new(
            grid,
            disk,
            vals.iter().map(|v| v[0]).collect(),
            vals.iter().map(|v| v[1]).collect(),
            vals.iter().map(|v| v[2]).collect(),
        )
    }

    pub fn preset(grid: GridSpec2D, disk: Disk, preset: Preset) -> Result<Self> {
        Self::from_fn(grid, disk, |p| preset.eval(&disk, p))
    }

    pub fn zero(grid: GridSpec2D, disk: Disk) -> Result<Self> {
        Self::preset(grid, disk, Preset::Zero)
    }

    /// Constant matrix on the support disk.
    pub fn constant(grid: GridSpec2D, disk: Disk, m: [f64; 3]) -> Result<Self> {
        Self::from_fn(grid, disk, |_| m)
    }

    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.a1[idx], self.a2[idx], self.a3[idx]]
    }

    /// Bilinearly interpolated entries at an arbitrary point.
    pub fn interp(&self, p: [f64; 2]) -> [f64; 3] {
        [self.grid.interp(&self.a1, p), self.grid.interp(&self.a2, p), self.grid.interp(&self.a3, p)]
    }

    pub fn trace(&self) -> Vec<f64> {
        self.a1.iter().zip(&self.a2).map(|(a, b)| a + b).collect()
    }

    /// First node violating positive semidefiniteness, if any.
    pub fn psd_violation(&self) -> Option<(usize, f64)> {
        let tol = PSD_TOL * self.eig_bound.max(1.0);
        (0..self.grid.len()).find_map(|i| {
            let (lo, _) = eigenvalues(self.a1[i], self.a2[i], self.a3[i]);
            (lo < -tol).then_some((i, lo))
        })
    }

    /// Clip negative eigenvalues to zero, logging a warning when anything changes.
    pub fn enforce_psd(&mut self) -> PsdReport {
        let mut rep = PsdReport::default();
        for i in 0..self.grid.len() {
            let (a1, a2, a3) = (self.a1[i], self.a2[i], self.a3[i]);
            let (lo, hi) = eigenvalues(a1, a2, a3);
            if lo >= 0.0 {
                continue;
            }
            rep.clipped_nodes += 1;
            rep.min_eigenvalue = rep.min_eigenvalue.min(lo);
            if hi <= 0.0 {
                self.a1[i] = 0.0;
                self.a2[i] = 0.0;
                self.a3[i] = 0.0;
                continue;
            }
            // Keep only the positive eigenpair: A = hi · v vᵀ.
            let (vx, vy) = if a3.abs() > 0.0 {
                (hi - a2, a3)
            } else if a1 >= a2 {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            };
            let nv = vx.hypot(vy);
            let (vx, vy) = (vx / nv, vy / nv);
            self.a1[i] = hi * vx * vx;
            self.a2[i] = hi * vy * vy;
            self.a3[i] = hi * vx * vy;
        }
        if rep.clipped_nodes > 0 {
            log::warn!(
                "clipped negative eigenvalues of A at {} nodes (most negative {:.3e})",
                rep.clipped_nodes,
                rep.min_eigenvalue
            );
        }
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec2D {
        GridSpec2D::square([0.0, 0.0], 2.5, 32).unwrap()
    }

    #[test]
    fn presets_are_psd_and_supported() {
        for p in [
            Preset::Zero,
            Preset::Identity,
            Preset::IsotropicBump,
            Preset::AxisAligned,
            Preset::Default,
            Preset::GaussianPotential,
        ] {
            let a = AnisotropyField::preset(grid(), Disk::unit(), p).unwrap();
            assert!(a.psd_violation().is_none(), "{p:?}");
            for (i, pt) in a.grid.nodes().enumerate() {
                if !Disk::unit().contains(pt) {
                    assert_eq!(a.at(i), [0.0; 3]);
                }
            }
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
    }

    #[test]
    fn default_preset_has_expected_eigenvalues() {
        let d = Disk::unit();
        let m = Preset::Default.eval(&d, [0.0, 0.0]);
        let (lo, hi) = eigenvalues(m[0], m[1], m[2]);
        assert!((lo - 0.3).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clipping_reports_and_fixes() {
        let mut a = AnisotropyField::constant(grid(), Disk::unit(), [1.0, 1.0, 2.0]).unwrap();
        assert!(a.psd_violation().is_some());
        let rep = a.enforce_psd();
        assert!(rep.clipped_nodes > 0 && (rep.min_eigenvalue + 1.0).abs() < 1e-12);
        assert!(a.psd_violation().is_none());
        let i = a.support_mask.iter().position(|&m| m).unwrap();
        let [a1, a2, a3] = a.at(i);
        assert!((a1 - 1.5).abs() < 1e-12 && (a2 - 1.5).abs() < 1e-12 && (a3 - 1.5).abs() < 1e-12);
    }
}
