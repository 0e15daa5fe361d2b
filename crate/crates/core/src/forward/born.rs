//! Scattered field and the first Born term.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field_synth::FieldRealization;
use crate::forward::green::greens_r;
use crate::forward::slp::BoundaryDensity;
use crate::numerics::sum::pairwise_sum_c;

/// Largest admissible `k·h` for node quadrature of oscillatory kernels.
pub const MAX_KH: f64 = 0.25;
/// Largest spectral refinement factor tried by [`born_u1_refined`].
pub const MAX_REFINE: usize = 16;

fn check_above(x: [f64; 3]) -> Result<()> {
    if !(x[2] > 0.0) {
        return Err(Error::Domain(format!("point {x:?} is not strictly above the boundary")));
    }
    Ok(())
}

/// `u_s(x) = (S_k⁺ φ)(x) = Σ_z g_k(x − z) φ(z) h²` for `x₃ > 0`.
pub fn scattered_field(phi: &BoundaryDensity, x: [f64; 3]) -> Result<Complex64> {
    check_above(x)?;
    let area = phi.grid.cell_area();
    let terms: Vec<Complex64> = phi
        .grid
        .nodes()
        .zip(&phi.values)
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(z, v)| {
            let r = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + x[2] * x[2]).sqrt();
            greens_r(r, phi.k) * v * area
        })
        .collect();
    Ok(pairwise_sum_c(&terms))
}

/// `u₁(x; y, k) = (4π² k^p)^{-1} ∫ e^{ik(|x−z|+|y−z|)} / (|x−z||y−z|) λ(z) dz`
/// by node quadrature on the field grid.
pub fn born_u1(lambda: &FieldRealization, x: [f64; 3], y: [f64; 3], k: f64, p: f64) -> Result<Complex64> {
    check_above(x)?;
    check_above(y)?;
    let h = lambda.grid.spacing();
    let kh = k * h[0].max(h[1]);
    if kh > MAX_KH {
        return Err(Error::Accuracy(format!("k·h = {kh:.3} exceeds {MAX_KH}; refine the field grid")));
    }
    Ok(born_u1_unchecked(lambda, x, y, k, p))
}

fn born_u1_unchecked(lambda: &FieldRealization, x: [f64; 3], y: [f64; 3], k: f64, p: f64) -> Complex64 {
    let g = &lambda.grid;
    let area = g.cell_area();
    let rows: Vec<Complex64> = (0..g.ny)
        .into_par_iter()
        .map(|iy| {
            let terms: Vec<Complex64> = (0..g.nx)
                .filter_map(|ix| {
                    let i = g.index(ix, iy);
                    let l = lambda.values[i];
                    if l == 0.0 {
                        return None;
                    }
                    let z = g.node(ix, iy);
                    let rx = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + x[2] * x[2]).sqrt();
                    let ry = ((y[0] - z[0]).powi(2) + (y[1] - z[1]).powi(2) + y[2] * y[2]).sqrt();
                    Some(Complex64::from_polar(l * area / (rx * ry), k * (rx + ry)))
                })
                .collect();
            pairwise_sum_c(&terms)
        })
        .collect();
    pairwise_sum_c(&rows) / (4.0 * PI * PI * k.powf(p))
}

/// Power-of-two refinement factor that brings `k·h` within [`MAX_KH`].
pub fn refinement_factor(h: f64, k: f64) -> Result<usize> {
    let mut f = 1;
    while k * h / f as f64 > MAX_KH {
        f *= 2;
        if f > MAX_REFINE {
            return Err(Error::Accuracy(format!("k = {k} needs more than {MAX_REFINE}× refinement of spacing {h}")));
        }
    }
    Ok(f)
}

/// [`born_u1`] after band-limited refinement of `λ` to satisfy the phase-accuracy rule.
pub fn born_u1_refined(lambda: &FieldRealization, x: [f64; 3], y: [f64; 3], k: f64, p: f64) -> Result<Complex64> {
    let f = refinement_factor(lambda.grid.spacing()[0].max(lambda.grid.spacing()[1]), k)?;
    if f == 1 {
        born_u1(lambda, x, y, k, p)
    } else {
        born_u1(&lambda.upsampled(f), x, y, k, p)
    }
}

/// Backscatter (`y = x`) Born term in polar coordinates about `x′`:
/// `u₁ = (4π² k^p)^{-1} ∫₀^∞ e^{2ik s(ρ)} M(ρ) ρ / s(ρ)² dρ`, `s = √(ρ² + x₃²)`,
/// `M(ρ) = ∫ λ(x′ + ρθ) dθ`. The radial profile is built once and reused
/// for every wavenumber up to `k_max`.
#[derive(Clone, Debug)]
pub struct RadialBorn {
    pub x: [f64; 3],
    /// Distances `s(ρ_j)`.
    s: Vec<f64>,
    /// Quadrature weights times `M(ρ_j) ρ_j / s_j²`.
    w: Vec<f64>,
    pub k_max: f64,
}

impl RadialBorn {
    pub fn new(lambda: &FieldRealization, x: [f64; 3], k_max: f64) -> Result<Self> {
        check_above(x)?;
        let h0 = lambda.grid.spacing()[0].max(lambda.grid.spacing()[1]);
        // Bilinear lookups on the circle need a twice finer grid than node quadrature.
        let f = refinement_factor(h0, 2.0 * k_max)?;
        let fine = if f == 1 { lambda.clone() } else { lambda.upsampled(f) };
        Ok(Self::from_refined(&fine, x, k_max, h0))
    }

    /// Build from an already refined field. `h_coarse` sets the support collar.
    pub fn from_refined(fine: &FieldRealization, x: [f64; 3], k_max: f64, h_coarse: f64) -> Self {
        let hf = fine.grid.spacing()[0].max(fine.grid.spacing()[1]);
        let disk = fine.disk;
        let a = disk.radius + 3.0 * h_coarse;
        let xp = [x[0], x[1]];
        let d = disk.center_distance(xp);
        let theta_c = (disk.center[1] - x[1]).atan2(disk.center[0] - x[0]);
        let rho_lo = (d - a).max(0.0);
        let rho_hi = d + a;
        let drho = (MAX_KH / k_max).min(hf);
        let nr = ((rho_hi - rho_lo) / drho).ceil() as usize + 1;
        let drho = (rho_hi - rho_lo) / (nr - 1) as f64;
        let vals: Vec<(f64, f64)> = (0..nr)
            .into_par_iter()
            .map(|j| {
                let rho = rho_lo + j as f64 * drho;
                let s2 = rho * rho + x[2] * x[2];
                let m = circle_integral(fine, xp, rho, d, a, theta_c, hf);
                let wt = if j == 0 || j == nr - 1 { 0.5 * drho } else { drho };
                (s2.sqrt(), wt * m * rho / s2)
            })
            .collect();
        let (s, w) = vals.into_iter().filter(|(_, w)| *w != 0.0).unzip();
        Self { x, s, w, k_max }
    }

    pub fn u1(&self, k: f64, p: f64) -> Complex64 {
        let terms: Vec<Complex64> = self.s.iter().zip(&self.w).map(|(s, w)| Complex64::from_polar(*w, 2.0 * k * s)).collect();
        pairwise_sum_c(&terms) / (4.0 * PI * PI * k.powf(p))
    }
}

/// `∫ λ(x′ + ρθ) dθ` over the arc of the circle inside the support collar.
fn circle_integral(fine: &FieldRealization, xp: [f64; 2], rho: f64, d: f64, a: f64, theta_c: f64, h: f64) -> f64 {
    if rho == 0.0 {
        return 2.0 * PI * fine.at(xp);
    }
    let half = if d <= a && rho <= a - d {
        PI
    } else {
        let c = (d * d + rho * rho - a * a) / (2.0 * d * rho);
        if c >= 1.0 {
            return 0.0;
        }
        c.max(-1.0).acos()
    };
    let n = ((2.0 * half * rho / h).ceil() as usize).max(8);
    let dth = 2.0 * half / n as f64;
    let full = half >= PI;
    let mut acc = 0.0;
    let count = if full { n } else { n + 1 };
    for i in 0..count {
        let th = theta_c - half + i as f64 * dth;
        let wt = if !full && (i == 0 || i == n) { 0.5 } else { 1.0 };
        acc += wt * fine.at([xp[0] + rho * th.cos(), xp[1] + rho * th.sin()]);
    }
    acc * dth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Disk, GridSpec2D};

    fn smooth_field(n: usize) -> FieldRealization {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, n).unwrap();
        let mut f = FieldRealization::zeros(g, Disk::unit(), 0.5);
        for (i, p) in g.nodes().enumerate() {
            f.values[i] = crate::grid::bump(p[0].hypot(p[1]), 0.9) * (1.0 + 0.5 * (4.0 * p[0] - p[1]).sin());
        }
        f
    }

    #[test]
    fn zero_field_zero_born() {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, 32).unwrap();
        let f = FieldRealization::zeros(g, Disk::unit(), 0.5);
        assert_eq!(born_u1(&f, [1.5, 0.0, 0.5], [1.5, 0.0, 0.5], 2.0, 1.5).unwrap(), Complex64::default());
    }

    #[test]
    fn accuracy_guard() {
        let f = smooth_field(32);
        assert!(matches!(born_u1(&f, [1.5, 0.0, 0.5], [1.5, 0.0, 0.5], 10.0, 1.5), Err(Error::Accuracy(_))));
        assert!(born_u1_refined(&f, [1.5, 0.0, 0.5], [1.5, 0.0, 0.5], 10.0, 1.5).is_ok());
    }

    #[test]
    fn single_node_density() {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, 16).unwrap();
        let mut phi = BoundaryDensity::zeros(g, Disk::unit(), 3.0);
        let i = g.index(8, 8);
        phi.values[i] = Complex64::new(2.0, -1.0);
        let x = [1.4, 0.3, 0.6];
        let z = g.node(8, 8);
        let r = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + x[2] * x[2]).sqrt();
        let expect = phi.values[i] * greens_r(r, 3.0) * g.cell_area();
        assert!((scattered_field(&phi, x).unwrap() - expect).norm() < 1e-15);
        assert!(matches!(scattered_field(&phi, [1.0, 0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn reciprocity_and_linearity() {
        let f = smooth_field(64);
        let (x, y) = ([1.5, 0.2, 0.5], [-0.3, 1.6, 0.8]);
        let a = born_u1(&f, x, y, 4.0, 1.5).unwrap();
        let b = born_u1(&f, y, x, 4.0, 1.5).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
        let g = f.scaled(2.0);
        let c = born_u1(&g, x, y, 4.0, 1.5).unwrap();
        assert!((c - 2.0 * a).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn radial_path_matches_node_quadrature() {
        let f = smooth_field(128);
        let x = [1.6, 0.0, 0.5];
        let rb = RadialBorn::new(&f, x, 30.0).unwrap();
        for k in [5.0, 15.0, 30.0] {
            let a = rb.u1(k, 1.5);
            let b = born_u1_refined(&f, x, x, k, 1.5).unwrap();
            assert!((a - b).norm() < 2e-3 * b.norm(), "k={k}: {a} vs {b}");
        }
    }
}
