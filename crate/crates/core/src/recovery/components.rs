//! Trace and component recovery from the two Fourier slices.
//!
//! For a quadratic strength with spectra `â = ℱa₁`, `ĉ = ℱa₂`, `b̂ = ℱa₃`
//! and `α` the direction of `ξ`:
//!
//! * `r₁ + r₂ = â + ĉ` (the trace),
//! * `r₁ − r₂ = (â − ĉ) cos 2α + 2 b̂ sin 2α`.
//!
//! One known component closes the system except at `ξ = 0` and on the lines
//! where the coefficient to divide by vanishes. Those frequencies start from an
//! angular interpolation along their ring. When the support disk is known they
//! are then refined by alternating projections: the solved spectrum is held
//! fixed and the field is forced to vanish outside the disk.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Disk, GridSpec2D};
use crate::numerics::fft::{forward_continuum, forward_continuum_c, inverse_continuum_c};
use crate::numerics::sum::norm_c;
use crate::sradon::SpectralSlices;

/// Above this masked fraction the zero fill is reported as a warning.
pub const MASK_WARN: f64 = 0.2;
/// Frequencies with `|cos 2α|` (or `|sin 2α|`) below this are filled, not divided.
pub const EXCLUDE: f64 = 0.1;
/// Default relative noise level of the slices for the consistency check.
pub const DEFAULT_SLICE_NOISE: f64 = 0.01;
/// Alternating-projection sweeps for the support-constrained fill.
pub const SUPPORT_SWEEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    A1,
    A2,
    A3,
}

impl std::str::FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a1" => Ok(Component::A1),
            "a2" => Ok(Component::A2),
            "a3" => Ok(Component::A3),
            other => Err(Error::Config(format!("unknown component '{other}' (expected a1, a2 or a3)"))),
        }
    }
}

/// One component field sampled on the slices' grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownComponent {
    pub which: Component,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryDiagnostics {
    pub masked_fraction: f64,
    /// True when masked frequencies were zero-filled above [`MASK_WARN`].
    pub zero_filled: bool,
    /// `‖Im‖ / ‖Re‖` of the inverse transforms.
    pub imag_residue: f64,
    /// Relative defect of the known component on the filled frequency lines.
    pub consistency_residual: Option<f64>,
    pub filled_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredAnisotropy {
    pub grid: GridSpec2D,
    pub trace: Vec<f64>,
    pub a1: Option<Vec<f64>>,
    pub a2: Option<Vec<f64>>,
    pub a3: Option<Vec<f64>>,
    pub diagnostics: RecoveryDiagnostics,
}

fn masked_check(slices: &SpectralSlices) -> (f64, bool) {
    let f = slices.masked_fraction();
    let warn = f > MASK_WARN;
    if warn {
        log::warn!("{:.1}% of frequencies are masked; they were zero-filled", 100.0 * f);
    }
    (f, warn)
}

/// Inverse continuum transform; returns the real part and `(‖Im‖², ‖Re‖²)`.
fn to_space(grid: &GridSpec2D, mut spec: Vec<Complex64>) -> (Vec<f64>, (f64, f64)) {
    inverse_continuum_c(grid, &mut spec);
    let re: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let im2: f64 = spec.iter().map(|c| c.im * c.im).sum();
    let re2: f64 = re.iter().map(|v| v * v).sum();
    (re, (im2, re2))
}

fn residue(parts: &[(f64, f64)]) -> f64 {
    let im: f64 = parts.iter().map(|p| p.0).sum();
    let re: f64 = parts.iter().map(|p| p.1).sum();
    if re > 0.0 {
        (im / re).sqrt()
    } else {
        0.0
    }
}

/// `tr A` from `slice_par + slice_perp`; masked frequencies contribute zero.
pub fn recover_trace(slices: &SpectralSlices) -> Result<RecoveredAnisotropy> {
    let (masked_fraction, zero_filled) = masked_check(slices);
    let spec: Vec<Complex64> = slices
        .trace_spectrum()
        .into_iter()
        .zip(&slices.valid)
        .map(|(t, v)| if *v { t } else { Complex64::default() })
        .collect();
    let (trace, part) = to_space(&slices.grid, spec);
    Ok(RecoveredAnisotropy {
        grid: slices.grid,
        trace,
        a1: None,
        a2: None,
        a3: None,
        diagnostics: RecoveryDiagnostics {
            masked_fraction,
            zero_filled,
            imag_residue: residue(&[part]),
            consistency_residual: None,
            filled_fraction: None,
        },
    })
}

/// Lattice points grouped by rounded `|ξ|` in units of the coarser frequency step.
fn rings(grid: &GridSpec2D) -> (Vec<usize>, Vec<Vec<usize>>) {
    let step = 2.0 * PI / grid.extent[0].max(grid.extent[1]);
    let n = grid.len();
    let mut ring_of = vec![0; n];
    let mut rings: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let xi = grid.xi(i);
        let k = (xi[0].hypot(xi[1]) / step).round() as usize;
        if rings.len() <= k {
            rings.resize(k + 1, Vec::new());
        }
        ring_of[i] = k;
        rings[k].push(i);
    }
    (ring_of, rings)
}

/// Angular interpolation of `values` at the excluded points from valid ring neighbours.
fn fill_on_rings(grid: &GridSpec2D, values: &mut [Complex64], excluded: &[bool]) {
    let (ring_of, rings) = rings(grid);
    let angle = |i: usize| {
        let xi = grid.xi(i);
        xi[1].atan2(xi[0])
    };
    let snapshot = values.to_vec();
    for i in 0..values.len() {
        if !excluded[i] {
            continue;
        }
        if i == 0 {
            // DC: mean over the first ring, whose odd part cancels.
            let ring: Vec<usize> = rings.get(1).map(|r| r.iter().copied().filter(|&j| !excluded[j]).collect()).unwrap_or_default();
            if !ring.is_empty() {
                values[0] = ring.iter().map(|&j| snapshot[j]).sum::<Complex64>() / ring.len() as f64;
            }
            continue;
        }
        let a = angle(i);
        let mut lo: Option<(f64, usize)> = None;
        let mut hi: Option<(f64, usize)> = None;
        for &j in &rings[ring_of[i]] {
            if excluded[j] {
                continue;
            }
            let d = (angle(j) - a + PI).rem_euclid(2.0 * PI) - PI;
            if d > 0.0 && hi.map_or(true, |(b, _)| d < b) {
                hi = Some((d, j));
            }
            if d < 0.0 && lo.map_or(true, |(b, _)| d > b) {
                lo = Some((d, j));
            }
        }
        values[i] = match (lo, hi) {
            (Some((dl, jl)), Some((dh, jh))) => (snapshot[jl] * dh - snapshot[jh] * dl) / (dh - dl),
            (Some((_, j)), None) | (None, Some((_, j))) => snapshot[j],
            (None, None) => Complex64::default(),
        };
    }
}

/// Refill the `free` frequencies so the field vanishes outside `disk`
/// (widened by one cell). The other frequencies are left untouched.
fn fill_by_support(grid: &GridSpec2D, disk: &Disk, spec: &mut [Complex64], free: &[bool]) {
    let pad = grid.spacing()[0].hypot(grid.spacing()[1]);
    let outside: Vec<bool> = (0..grid.len()).map(|i| disk.center_distance(grid.node_at(i)) > disk.radius + pad).collect();
    let data = spec.to_vec();
    let mut field = spec.to_vec();
    for _ in 0..SUPPORT_SWEEPS {
        inverse_continuum_c(grid, &mut field);
        for (v, o) in field.iter_mut().zip(&outside) {
            if *o {
                *v = Complex64::default();
            }
        }
        forward_continuum_c(grid, &mut field);
        for i in 0..field.len() {
            if !free[i] {
                field[i] = data[i];
            }
        }
    }
    spec.copy_from_slice(&field);
}

/// Recover the two unknown components from the slices and one known component.
///
/// `support`, when given, is the disk outside which the anisotropy vanishes;
/// it replaces the ring interpolation at the excluded frequencies.
pub fn recover_components(
    slices: &SpectralSlices,
    known: &KnownComponent,
    noise: f64,
    support: Option<&Disk>,
) -> Result<RecoveredAnisotropy> {
    let g = slices.grid;
    let n = g.len();
    if known.values.len() != n {
        return Err(Error::Config("known component must be sampled on the slices' grid".into()));
    }
    let (masked_fraction, zero_filled) = masked_check(slices);
    let kspec = forward_continuum(&g, &known.values);
    let mut t = vec![Complex64::default(); n];
    let mut delta = vec![Complex64::default(); n];
    for i in 0..n {
        if slices.valid[i] {
            t[i] = slices.slice_par[i] + slices.slice_perp[i];
            delta[i] = slices.slice_par[i] - slices.slice_perp[i];
        }
    }
    let trig: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let xi = g.xi(i);
            let a = xi[1].atan2(xi[0]);
            ((2.0 * a).cos(), (2.0 * a).sin())
        })
        .collect();
    // Unknown spectrum solved by division: `â − ĉ` for a known a3, `b̂` otherwise.
    let by_cos = known.which == Component::A3;
    let excluded: Vec<bool> = (0..n)
        .map(|i| {
            let (c2, s2) = trig[i];
            i == 0 || if by_cos { c2.abs() < EXCLUDE } else { s2.abs() < EXCLUDE }
        })
        .collect();
    // `other` is what the known component contributes to r₁ − r₂.
    let mut solved = vec![Complex64::default(); n];
    let diff_known: Vec<Complex64> = (0..n)
        .map(|i| match known.which {
            Component::A1 => 2.0 * kspec[i] - t[i],
            Component::A2 => t[i] - 2.0 * kspec[i],
            Component::A3 => Complex64::default(),
        })
        .collect();
    for i in 0..n {
        if excluded[i] || !slices.valid[i] {
            continue;
        }
        let (c2, s2) = trig[i];
        solved[i] = if by_cos {
            (delta[i] - 2.0 * kspec[i] * s2) / c2
        } else {
            (delta[i] - diff_known[i] * c2) / (2.0 * s2)
        };
    }
    fill_on_rings(&g, &mut solved, &excluded);
    if let Some(disk) = support {
        fill_by_support(&g, disk, &mut solved, &excluded);
    }

    // The known component is checked where it alone must explain r₁ − r₂.
    let mut defect = Vec::new();
    let mut scale = Vec::new();
    for i in 1..n {
        if !excluded[i] || !slices.valid[i] {
            continue;
        }
        let (c2, s2) = trig[i];
        let model = if by_cos { 2.0 * kspec[i] * s2 + solved[i] * c2 } else { diff_known[i] * c2 + 2.0 * solved[i] * s2 };
        defect.push(delta[i] - model);
        scale.push(Complex64::new(delta[i].norm() + t[i].norm(), 0.0));
    }
    let consistency = if scale.is_empty() { 0.0 } else { norm_c(&defect) / norm_c(&scale).max(f64::MIN_POSITIVE) };
    let allowed = 3.0 * noise.max(f64::EPSILON);
    if consistency > allowed {
        return Err(Error::Inconsistent(format!(
            "known {:?} disagrees with the slices: relative defect {consistency:.3e} exceeds {allowed:.3e}",
            known.which
        )));
    }

    let (sa, sc, sb): (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) = match known.which {
        Component::A3 => (
            (0..n).map(|i| 0.5 * (t[i] + solved[i])).collect(),
            (0..n).map(|i| 0.5 * (t[i] - solved[i])).collect(),
            kspec.clone(),
        ),
        Component::A1 => (kspec.clone(), (0..n).map(|i| t[i] - kspec[i]).collect(), solved),
        Component::A2 => ((0..n).map(|i| t[i] - kspec[i]).collect(), kspec.clone(), solved),
    };
    let (a1, p1) = to_space(&g, sa);
    let (a2, p2) = to_space(&g, sc);
    let (a3, p3) = to_space(&g, sb);
    let (trace, pt) = to_space(&g, t);
    let filled = excluded.iter().filter(|e| **e).count() as f64 / n as f64;
    Ok(RecoveredAnisotropy {
        grid: g,
        trace,
        a1: Some(a1),
        a2: Some(a2),
        a3: Some(a3),
        diagnostics: RecoveryDiagnostics {
            masked_fraction,
            zero_filled,
            imag_residue: residue(&[p1, p2, p3, pt]),
            consistency_residual: Some(consistency),
            filled_fraction: Some(filled),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::{build_quadratic_strength, AnisotropyField, Preset};
    use crate::grid::Disk;
    use crate::numerics::sum::rel_l2;
    use crate::sradon::slices_from_strength;

    fn grid() -> GridSpec2D {
        GridSpec2D::square([0.0, 0.0], 4.5, 64).unwrap()
    }

    fn slices(p: Preset) -> (AnisotropyField, SpectralSlices) {
        let a = AnisotropyField::preset(grid(), Disk::unit(), p).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        let s = slices_from_strength(&b, &grid(), 64).unwrap();
        (a, s)
    }

    #[test]
    fn zero_slices_zero_fields() {
        let (_, mut s) = slices(Preset::Zero);
        s.slice_par.iter_mut().for_each(|v| *v = Complex64::default());
        s.slice_perp.iter_mut().for_each(|v| *v = Complex64::default());
        let t = recover_trace(&s).unwrap();
        assert!(t.trace.iter().all(|v| *v == 0.0));
        let known = KnownComponent { which: Component::A3, values: vec![0.0; grid().len()] };
        let r = recover_components(&s, &known, DEFAULT_SLICE_NOISE, Some(&Disk::unit())).unwrap();
        assert!(r.a1.unwrap().iter().chain(r.a2.unwrap().iter()).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn isotropic_trace() {
        let (a, s) = slices(Preset::IsotropicBump);
        let t = recover_trace(&s).unwrap();
        assert!(rel_l2(&t.trace, &a.trace()) < 0.01);
    }

    #[test]
    fn components_from_each_known_entry() {
        let (a, s) = slices(Preset::Default);
        for (which, vals) in [(Component::A3, &a.a3), (Component::A1, &a.a1), (Component::A2, &a.a2)] {
            let known = KnownComponent { which, values: vals.clone() };
            let r = recover_components(&s, &known, DEFAULT_SLICE_NOISE, Some(&Disk::unit())).unwrap();
            for (got, want) in [(r.a1.as_ref().unwrap(), &a.a1), (r.a2.as_ref().unwrap(), &a.a2), (r.a3.as_ref().unwrap(), &a.a3)] {
                let e = rel_l2(got, want);
                assert!(e < 1e-3, "{which:?}: {e}");
            }
        }
    }

    #[test]
    fn trace_is_sum_of_components() {
        let (a, s) = slices(Preset::Default);
        let t = recover_trace(&s).unwrap().trace;
        let r = recover_components(&s, &KnownComponent { which: Component::A3, values: a.a3.clone() }, DEFAULT_SLICE_NOISE, Some(&Disk::unit())).unwrap();
        let sum: Vec<f64> = r.a1.unwrap().iter().zip(r.a2.unwrap().iter()).map(|(x, y)| x + y).collect();
        assert!(rel_l2(&sum, &t) < 0.01);
    }

    #[test]
    fn wrong_known_component_is_rejected() {
        let (a, s) = slices(Preset::Default);
        let zero = KnownComponent { which: Component::A3, values: vec![0.0; a.a3.len()] };
        assert!(matches!(recover_components(&s, &zero, DEFAULT_SLICE_NOISE, Some(&Disk::unit())), Err(Error::Inconsistent(_))));
        let known = KnownComponent { which: Component::A1, values: a.a1.iter().map(|v| 0.5 * v).collect() };
        assert!(matches!(recover_components(&s, &known, DEFAULT_SLICE_NOISE, None), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn heavy_masking_is_flagged() {
        let (_, mut s) = slices(Preset::IsotropicBump);
        for i in (0..s.valid.len()).step_by(3) {
            s.valid[i] = false;
        }
        let t = recover_trace(&s).unwrap();
        assert!(t.diagnostics.zero_filled);
        assert!(t.diagnostics.masked_fraction > 0.3);
    }

    #[test]
    fn dc_matches_mean_trace() {
        let (a, s) = slices(Preset::Default);
        let t = recover_trace(&s).unwrap();
        let g = grid();
        let mean: f64 = t.trace.iter().sum::<f64>() / g.len() as f64;
        let dc = s.trace_spectrum()[0].re / (g.extent[0] * g.extent[1]);
        assert!((mean - dc).abs() <= 0.02 * dc.abs());
        let truth: f64 = a.trace().iter().sum::<f64>() * g.cell_area();
        assert!((s.trace_spectrum()[0].re - truth).abs() < 1e-3 * truth);
    }
}
