//! Fourier analysis of `𝒮b` and extraction of the two recoverable slices.
//!
//! With `F(ξ, r) = ℱ_{x′}(𝒮b)(ξ, r)` and the even angular expansion
//! `(ℱb)(ξ, α + φ) = Σ_m c_m(ξ) cos 2mφ + s_m(ξ) sin 2mφ` about the direction
//! `α` of `ξ`,
//!
//! `F(ξ, r) = 2π Σ_m (−1)^m c_m(ξ) J_{2m}(r|ξ|)`.
//!
//! The sine coefficients never reach the data. The two values fixed by the
//! cosine coefficients alone are `(ℱb)(ξ, ξ⁰) = Σ c_m` and
//! `(ℱb)(ξ, (ξ⁰)^⊥) = Σ (−1)^m c_m`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::DirectionalField;
use crate::grid::{Disk, GridSpec2D};
use crate::numerics::bessel::jn_all;
use crate::numerics::fft::forward_continuum;
use crate::numerics::linalg::ridge_solve;
use crate::sradon::transform::{Centers, RadonGrid};

/// Highest even angular mode index in the fit (`cos 2mφ`, `m ≤ M`).
pub const N_MODES: usize = 8;
/// Ridge weight relative to the largest singular value.
pub const RIDGE: f64 = 1e-8;
/// Masking threshold on the condition number of the two leading modes.
pub const COND_CAP: f64 = 1e6;
/// Higher modes join the fit only while the system stays this well conditioned.
pub const MODE_COND: f64 = 10.0;

/// `ℱ_{x′} 𝒮b` on the center grid's frequency lattice, layout `[ir * N + i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierRadon {
    pub grid: GridSpec2D,
    pub radii: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Continuum FFT over centers for every radius.
pub fn fourier_radon(rg: &RadonGrid) -> Result<FourierRadon> {
    let Centers::Grid(grid) = &rg.centers else {
        return Err(Error::Layout("the Fourier transform needs centers on a uniform grid".into()));
    };
    let n = grid.len();
    let mut values = Vec::with_capacity(n * rg.radii.len());
    for ir in 0..rg.radii.len() {
        values.extend(forward_continuum(grid, &rg.values[ir * n..(ir + 1) * n]));
    }
    Ok(FourierRadon { grid: *grid, radii: rg.radii.clone(), values })
}

/// The slices `(ℱb)(ξ, ξ⁰)` and `(ℱb)(ξ, (ξ⁰)^⊥)` with per-frequency fit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSlices {
    pub grid: GridSpec2D,
    pub slice_par: Vec<Complex64>,
    pub slice_perp: Vec<Complex64>,
    /// False where the angular fit was too ill-conditioned to trust.
    pub valid: Vec<bool>,
    pub cond: Vec<f64>,
    pub r_window: (f64, f64),
}

impl SpectralSlices {
    pub fn masked_fraction(&self) -> f64 {
        self.valid.iter().filter(|v| !**v).count() as f64 / self.valid.len().max(1) as f64
    }

    /// Slice sum `(ℱb)(ξ, ξ⁰) + (ℱb)(ξ, (ξ⁰)^⊥)`, the Fourier transform of `tr A` for quadratic strengths.
    pub fn trace_spectrum(&self) -> Vec<Complex64> {
        self.slice_par.iter().zip(&self.slice_perp).map(|(a, b)| a + b).collect()
    }

    /// Largest `|ξ|` on the lattice.
    pub fn xi_max(&self) -> f64 {
        xi_max(&self.grid)
    }
}

fn xi_max(g: &GridSpec2D) -> f64 {
    (0..g.len()).map(|i| g.xi(i)).fold(0.0, |m, x| m.max(x[0].hypot(x[1])))
}

/// Largest radius window whose rings around `disk` stay inside the periodic
/// center box. Beyond it `x′ ↦ 𝒮b(x′, r)` is cut off at the box edge and the
/// transform in `x′` aliases.
pub fn slice_window(centers: &GridSpec2D, disk: &Disk) -> Result<(f64, f64)> {
    let mid = [centers.origin[0] + centers.extent[0] / 2.0, centers.origin[1] + centers.extent[1] / 2.0];
    let half = 0.5 * centers.extent[0].min(centers.extent[1]) - disk.center_distance(mid) - disk.radius;
    if !(half > 0.0) {
        return Err(Error::Grid("the center box does not contain the support disk".into()));
    }
    Ok((0.0, half))
}

/// Per-frequency ridge fit of the even angular modes against the radial dependence.
pub fn extract_slices(fr: &FourierRadon, r_window: (f64, f64)) -> Result<SpectralSlices> {
    let grid = fr.grid;
    let n = grid.len();
    let rows: Vec<usize> = (0..fr.radii.len())
        .filter(|&i| fr.radii[i] >= r_window.0 - 1e-12 && fr.radii[i] <= r_window.1 + 1e-12)
        .collect();
    if rows.len() < N_MODES + 1 {
        return Err(Error::Config(format!("radius window holds {} radii, need at least {}", rows.len(), N_MODES + 1)));
    }
    let width = r_window.1 - r_window.0;
    let xm = xi_max(&grid);
    if width * xm < 4.0 * PI {
        return Err(Error::Config(format!(
            "radius window of width {width:.3} spans fewer than two oscillations at |ξ| = {xm:.1}"
        )));
    }
    let radii: Vec<f64> = rows.iter().map(|&i| fr.radii[i]).collect();
    let per_xi: Vec<(Complex64, Complex64, bool, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let data: Vec<Complex64> = rows.iter().map(|&ir| fr.values[ir * n + i]).collect();
            if i == 0 {
                let c0 = data.iter().sum::<Complex64>() / (2.0 * PI * data.len() as f64);
                return (c0, c0, true, 1.0);
            }
            let xi = grid.xi(i);
            fit_one(&radii, xi[0].hypot(xi[1]), &data)
        })
        .collect();
    let mut out = SpectralSlices {
        grid,
        slice_par: Vec::with_capacity(n),
        slice_perp: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
        cond: Vec::with_capacity(n),
        r_window,
    };
    for (p, q, v, c) in per_xi {
        out.slice_par.push(p);
        out.slice_perp.push(q);
        out.valid.push(v);
        out.cond.push(c);
    }
    Ok(out)
}

fn fit_one(radii: &[f64], rho: f64, data: &[Complex64]) -> (Complex64, Complex64, bool, f64) {
    let nr = radii.len();
    let mut a = DMatrix::zeros(nr, N_MODES + 1);
    for (row, r) in radii.iter().enumerate() {
        let j = jn_all(2 * N_MODES, r * rho);
        for m in 0..=N_MODES {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            a[(row, m)] = 2.0 * PI * sign * j[2 * m];
        }
    }
    let cond_of = |m: usize| {
        let sv = a.columns(0, m + 1).into_owned().singular_values();
        if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY }
    };
    let lead = cond_of(1);
    if !(lead <= COND_CAP) {
        return (Complex64::default(), Complex64::default(), false, lead);
    }
    // Modes the radius window cannot see would only feed noise into the slice sums.
    let mut m_eff = 1;
    while m_eff < N_MODES && cond_of(m_eff + 1) <= MODE_COND {
        m_eff += 1;
    }
    let sub = a.columns(0, m_eff + 1).into_owned();
    let b = DMatrix::from_fn(nr, 2, |r, c| if c == 0 { data[r].re } else { data[r].im });
    let (x, cond) = ridge_solve(&sub, &b, RIDGE);
    let mut par = Complex64::default();
    let mut perp = Complex64::default();
    for m in 0..=m_eff {
        let c = Complex64::new(x[(m, 0)], x[(m, 1)]);
        par += c;
        perp += if m % 2 == 0 { c } else { -c };
    }
    (par, perp, true, cond)
}

/// Direct evaluation of both slices from `b`: continuum FFT of `x ↦ b(x, θ_j)` at
/// `n_dirs` equispaced directions, then trigonometric interpolation in the direction.
pub fn slices_from_strength<F: DirectionalField>(b: &F, grid: &GridSpec2D, n_dirs: usize) -> Result<SpectralSlices> {
    if n_dirs < 8 || n_dirs % 4 != 0 {
        return Err(Error::Config("direction count must be a multiple of 4 and at least 8".into()));
    }
    let n = grid.len();
    let spectra: Vec<Vec<Complex64>> = (0..n_dirs)
        .into_par_iter()
        .map(|j| {
            let th = 2.0 * PI * j as f64 / n_dirs as f64;
            let vals: Vec<f64> = grid.nodes().map(|p| b.eval(p, th)).collect();
            forward_continuum(grid, &vals)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n_dirs);
    let res: Vec<(Complex64, Complex64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut ang: Vec<Complex64> = spectra.iter().map(|s| s[i]).collect();
            fft.process(&mut ang);
            let coef: Vec<Complex64> = ang.iter().map(|c| c / n_dirs as f64).collect();
            if i == 0 {
                return (coef[0], coef[0]);
            }
            let xi = grid.xi(i);
            let alpha = xi[1].atan2(xi[0]);
            (trig_eval(&coef, alpha), trig_eval(&coef, alpha + PI / 2.0))
        })
        .collect();
    Ok(SpectralSlices {
        grid: *grid,
        slice_par: res.iter().map(|r| r.0).collect(),
        slice_perp: res.iter().map(|r| r.1).collect(),
        valid: vec![true; n],
        cond: vec![1.0; n],
        r_window: (0.0, 0.0),
    })
}

/// Evaluate the trigonometric interpolant with DFT coefficients `coef` at `theta`;
/// the Nyquist mode is split symmetrically.
fn trig_eval(coef: &[Complex64], theta: f64) -> Complex64 {
    let n = coef.len();
    let mut acc = coef[0];
    for m in 1..n / 2 {
        acc += coef[m] * Complex64::from_polar(1.0, m as f64 * theta) + coef[n - m] * Complex64::from_polar(1.0, -(m as f64) * theta);
    }
    acc + coef[n / 2] * (n as f64 / 2.0 * theta).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::{build_quadratic_strength, AnisotropyField, LocalStrength, Preset};
    use crate::grid::Disk;
    use crate::numerics::sum::rel_l2_c;
    use crate::sradon::transform::{radii_grid, radon_forward};

    fn strength(m: Preset) -> LocalStrength {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, 64).unwrap();
        build_quadratic_strength(&AnisotropyField::preset(g, Disk::unit(), m).unwrap(), 0.5).unwrap()
    }

    fn centers() -> GridSpec2D {
        GridSpec2D::new([-2.25, -2.25], [4.5, 4.5], 64, 64).unwrap()
    }

    /// Frequencies well inside the center grid's band.
    fn resolved(g: &GridSpec2D) -> Vec<usize> {
        let lim = 0.5 * g.nyquist();
        (0..g.len()).filter(|&i| {
            let x = g.xi(i);
            x[0].hypot(x[1]) <= lim
        }).collect()
    }

    fn pipeline(b: &LocalStrength) -> SpectralSlices {
        let c = centers();
        let rs = radii_grid(1.0, b.grid().min_spacing());
        let rg = radon_forward(b, &Centers::Grid(c), &rs).unwrap();
        extract_slices(&fourier_radon(&rg).unwrap(), (0.0, 1.0)).unwrap()
    }

    #[test]
    fn zero_radon_zero_transform() {
        let rg = RadonGrid::zeros(Centers::Grid(centers()), vec![0.0, 0.1]);
        assert!(fourier_radon(&rg).unwrap().values.iter().all(|v| v.norm() == 0.0));
        let list = RadonGrid::zeros(Centers::List(vec![[0.0, 0.0]]), vec![0.0]);
        assert!(matches!(fourier_radon(&list), Err(Error::Layout(_))));
    }

    #[test]
    fn dc_bin_is_center_integral() {
        let b = strength(Preset::Default);
        let c = centers();
        let rg = radon_forward(&b, &Centers::Grid(c), &[0.3, 0.6]).unwrap();
        let fr = fourier_radon(&rg).unwrap();
        for ir in 0..2 {
            let s: f64 = rg.values[ir * c.len()..(ir + 1) * c.len()].iter().sum::<f64>() * c.cell_area();
            assert!((fr.values[ir * c.len()].re - s).abs() < 1e-12 * s.abs());
        }
    }

    #[test]
    fn fubini_identity() {
        // F(ξ, r) = ∫ e^{i r θ·ξ} (ℱb)(ξ, θ) dθ, right side from direct FFTs of b(·, θ).
        let b = strength(Preset::Default);
        let c = centers();
        let rs = [0.25, 0.5];
        let fr = fourier_radon(&radon_forward(&b, &Centers::Grid(c), &rs).unwrap()).unwrap();
        let nd = 64;
        let spectra: Vec<Vec<Complex64>> = (0..nd)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / nd as f64;
                forward_continuum(&c, &c.nodes().map(|p| b.eval(p, th)).collect::<Vec<_>>())
            })
            .collect();
        let idx = resolved(&c);
        for (ir, r) in rs.iter().enumerate() {
            let lhs: Vec<Complex64> = idx.iter().map(|&i| fr.values[ir * c.len() + i]).collect();
            let rhs: Vec<Complex64> = idx
                .iter()
                .map(|&i| {
                    let xi = c.xi(i);
                    (0..nd)
                        .map(|j| {
                            let th = 2.0 * PI * j as f64 / nd as f64;
                            spectra[j][i] * Complex64::from_polar(2.0 * PI / nd as f64, r * (th.cos() * xi[0] + th.sin() * xi[1]))
                        })
                        .sum()
                })
                .collect();
            let e = rel_l2_c(&lhs, &rhs);
            assert!(e < 0.01, "r = {r}: {e}");
        }
    }

    #[test]
    fn isotropic_slices_coincide() {
        let s = pipeline(&strength(Preset::IsotropicBump));
        let idx: Vec<usize> = resolved(&s.grid).into_iter().filter(|&i| s.valid[i]).collect();
        let a: Vec<Complex64> = idx.iter().map(|&i| s.slice_par[i]).collect();
        let b: Vec<Complex64> = idx.iter().map(|&i| s.slice_perp[i]).collect();
        assert!(rel_l2_c(&a, &b) < 0.01);
    }

    #[test]
    fn slices_match_direct_evaluation() {
        let b = strength(Preset::AxisAligned);
        let s = pipeline(&b);
        let d = slices_from_strength(&b, &s.grid, 64).unwrap();
        let idx: Vec<usize> = resolved(&s.grid).into_iter().filter(|&i| s.valid[i]).collect();
        for (x, y) in [(&s.slice_par, &d.slice_par), (&s.slice_perp, &d.slice_perp)] {
            let a: Vec<Complex64> = idx.iter().map(|&i| x[i]).collect();
            let e: Vec<Complex64> = idx.iter().map(|&i| y[i]).collect();
            assert!(rel_l2_c(&a, &e) < 0.05, "{}", rel_l2_c(&a, &e));
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let s = pipeline(&strength(Preset::Default));
        let g = s.grid;
        for iy in 1..g.ny {
            for ix in 1..g.nx {
                if ix == g.nx / 2 || iy == g.ny / 2 {
                    continue;
                }
                let (i, j) = (g.index(ix, iy), g.index(g.nx - ix, g.ny - iy));
                assert!((s.slice_par[i] - s.slice_par[j].conj()).norm() <= 1e-9 * (1.0 + s.slice_par[i].norm()));
                assert!((s.slice_perp[i] - s.slice_perp[j].conj()).norm() <= 1e-9 * (1.0 + s.slice_perp[i].norm()));
            }
        }
    }

    #[test]
    fn short_window_rejected() {
        let rg = RadonGrid::zeros(Centers::Grid(centers()), radii_grid(0.1, 0.005));
        assert!(extract_slices(&fourier_radon(&rg).unwrap(), (0.0, 0.1)).is_err());
    }

    #[test]
    fn window_keeps_rings_in_the_box() {
        let w = slice_window(&centers(), &Disk::unit()).unwrap();
        assert!((w.1 - 1.25).abs() < 1e-12);
        let off = Disk::new([0.5, 0.0], 1.0).unwrap();
        assert!((slice_window(&centers(), &off).unwrap().1 - 0.75).abs() < 1e-12);
        assert!(slice_window(&centers(), &Disk::new([0.0, 0.0], 2.5).unwrap()).is_err());
    }

}
