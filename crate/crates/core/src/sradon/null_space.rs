//! Splitting an even strength into the part invisible to `𝒮` and its complement.
//!
//! Per frequency `ξ` with direction `α`, the angular profile `θ ↦ (ℱf)(ξ, θ)`
//! is reflected about the axis `α + π/2`. In angular Fourier coefficients the
//! reflection reads `ĝ^R_m = ĝ_{−m} e^{−2imβ}`, `β = α + π/2`. The odd part
//! `(ĝ − ĝ^R)/2` lies in the null space; the even part carries everything
//! `𝒮` can see.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::AngularField;
use crate::grid::Disk;
use crate::numerics::fft::Fft2;

/// Evenness tolerance relative to the field's scale.
const EVEN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSplit {
    /// Component annihilated by the transform.
    pub null: AngularField,
    /// Reflection-symmetric complement; `null + symmetric = f`.
    pub symmetric: AngularField,
}

/// Disk inscribed in the grid with a two-cell margin: the split is not
/// compactly supported, so outputs keep the whole window.
fn window_disk(f: &AngularField) -> Disk {
    let g = f.grid;
    let h = g.spacing();
    let c = [g.origin[0] + 0.5 * (g.nx - 1) as f64 * h[0], g.origin[1] + 0.5 * (g.ny - 1) as f64 * h[1]];
    let r = 0.5 * ((g.nx - 1) as f64 * h[0]).min((g.ny - 1) as f64 * h[1]) - 2.0 * h[0].max(h[1]);
    Disk { center: c, radius: r.max(f.disk.radius) }
}

pub fn null_space_project(f: &AngularField) -> Result<NullSplit> {
    let defect = f.evenness_defect();
    if defect > EVEN_TOL {
        return Err(Error::Contract(format!("input is not even in the direction (defect {defect:.2e})")));
    }
    let g = f.grid;
    let n = g.len();
    let na = f.n_ang;
    let fft2 = Fft2::for_grid(&g);
    let mut spec: Vec<Vec<Complex64>> = (0..na)
        .map(|j| {
            let mut s: Vec<Complex64> = f.slice(j).iter().map(|v| Complex64::new(*v, 0.0)).collect();
            fft2.forward(&mut s);
            s
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(na);
    let inv = planner.plan_fft_inverse(na);
    // Reflection per spatial frequency.
    let null_spec: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i % g.nx, i / g.nx);
            if i == 0 || ix == g.nx / 2 || iy == g.ny / 2 {
                // No direction (DC) or aliased direction (Nyquist lines): keep it visible.
                return vec![Complex64::default(); na];
            }
            let xi = g.xi(i);
            let beta = xi[1].atan2(xi[0]) + PI / 2.0;
            let mut a: Vec<Complex64> = spec.iter().map(|s| s[i]).collect();
            fwd.process(&mut a);
            let mut out = vec![Complex64::default(); na];
            for m in 0..na {
                let mi = if m <= na / 2 { m as i64 } else { m as i64 - na as i64 };
                let neg = ((na as i64 - mi) % na as i64) as usize;
                let refl = a[neg] * Complex64::from_polar(1.0, -2.0 * mi as f64 * beta);
                out[m] = 0.5 * (a[m] - refl);
            }
            if na % 2 == 0 {
                // The Nyquist angular mode has no distinct partner; leave it visible.
                out[na / 2] = Complex64::default();
            }
            inv.process(&mut out);
            out.iter().map(|c| c / na as f64).collect()
        })
        .collect();
    let mut null_vals = vec![0.0; na * n];
    for (j, s) in spec.iter_mut().enumerate() {
        for (i, v) in s.iter_mut().enumerate() {
            *v = null_spec[i][j];
        }
        fft2.inverse(s);
        for (i, v) in s.iter().enumerate() {
            null_vals[j * n + i] = v.re;
        }
    }
    // Exact evenness: average antipodal samples (they agree up to round-off).
    let half = na / 2;
    for j in 0..half {
        for i in 0..n {
            let m = 0.5 * (null_vals[j * n + i] + null_vals[(j + half) * n + i]);
            null_vals[j * n + i] = m;
            null_vals[(j + half) * n + i] = m;
        }
    }
    let disk = window_disk(f);
    let sym_vals: Vec<f64> = f.values.iter().zip(&null_vals).map(|(a, b)| a - b).collect();
    Ok(NullSplit {
        null: AngularField::new(g, disk, na, null_vals)?,
        symmetric: AngularField::new(g, disk, na, sym_vals)?,
    })
}
