//! The anisotropic spherical Radon transform `(𝒮b)(x′, r) = ∫_{𝕊¹} b(x′ + rθ, θ) dθ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::DirectionalField;
use crate::grid::{Disk, GridSpec2D};
use crate::numerics::sum::pairwise_sum;

/// Minimum angular sampling of the strength.
pub const MIN_N_ANG: usize = 64;

/// Circle centers: a uniform grid (FFT-ready) or an arbitrary list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Centers {
    Grid(GridSpec2D),
    List(Vec<[f64; 2]>),
}

impl Centers {
    pub fn len(&self) -> usize {
        match self {
            Centers::Grid(g) => g.len(),
            Centers::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        match self {
            Centers::Grid(g) => g.node_at(i),
            Centers::List(v) => v[i],
        }
    }

    pub fn grid(&self) -> Option<&GridSpec2D> {
        match self {
            Centers::Grid(g) => Some(g),
            Centers::List(_) => None,
        }
    }
}

/// Values of `𝒮b` on centers × radii, layout `values[ir * n_centers + ic]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadonGrid {
    pub centers: Centers,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadonGrid {
    pub fn zeros(centers: Centers, radii: Vec<f64>) -> Self {
        let n = centers.len() * radii.len();
        Self { centers, radii, values: vec![0.0; n] }
    }

    pub fn at(&self, ic: usize, ir: usize) -> f64 {
        self.values[ir * self.centers.len() + ic]
    }

    /// All radii at one center.
    pub fn profile(&self, ic: usize) -> Vec<f64> {
        (0..self.radii.len()).map(|ir| self.at(ic, ir)).collect()
    }

    pub fn l2_norm(&self) -> f64 {
        crate::numerics::sum::norm(&self.values)
    }
}

/// Trapezoid rule over `θ_j = 2πj/n` with `n` a multiple of the strength's
/// angular sampling and `r Δθ ≤ h`, so sampled directions are hit exactly.
fn angular_nodes(r: f64, h: f64, n_ang: usize) -> usize {
    let need = (2.0 * PI * r / h).ceil() as usize;
    n_ang * need.div_ceil(n_ang).max(1)
}

/// Integrate over the circle of radius `r` at `c`, skipping points outside
/// the support collar of radius `a`.
fn circle_mean<F: DirectionalField>(b: &F, c: [f64; 2], r: f64, support: &Disk, a: f64, h: f64) -> f64 {
    if r == 0.0 {
        // Degenerate circle: ∫ b(c, θ) dθ.
        if support.center_distance(c) > a {
            return 0.0;
        }
        let n = b.n_ang();
        let s: Vec<f64> = (0..n).map(|j| b.eval(c, 2.0 * PI * j as f64 / n as f64)).collect();
        return 2.0 * PI * pairwise_sum(&s) / n as f64;
    }
    let n = angular_nodes(r, h, b.n_ang());
    let a2 = a * a;
    let terms: Vec<f64> = (0..n)
        .filter_map(|j| {
            let th = 2.0 * PI * j as f64 / n as f64;
            let (s, co) = th.sin_cos();
            let p = [c[0] + r * co, c[1] + r * s];
            let d = [p[0] - support.center[0], p[1] - support.center[1]];
            if d[0] * d[0] + d[1] * d[1] > a2 {
                None
            } else {
                Some(b.eval(p, th))
            }
        })
        .collect();
    2.0 * PI * pairwise_sum(&terms) / n as f64
}

/// `𝒮b` by trapezoid quadrature in the direction and bilinear interpolation in space.
pub fn radon_forward<F: DirectionalField>(b: &F, centers: &Centers, radii: &[f64]) -> Result<RadonGrid> {
    if b.n_ang() < MIN_N_ANG {
        return Err(Error::Config(format!("angular sampling {} is below {MIN_N_ANG}", b.n_ang())));
    }
    let g = b.grid();
    let h = g.min_spacing();
    if radii.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::Config("radii must be finite and non-negative".into()));
    }
    if radii.windows(2).any(|w| w[1] - w[0] > h * (1.0 + 1e-9)) {
        log::debug!("radius spacing exceeds the strength grid spacing {h}; radial profiles are undersampled");
    }
    let support = *b.support();
    let a = support.radius + 2.0 * h;
    let corners = [
        [support.center[0] - a, support.center[1] - a],
        [support.center[0] + a, support.center[1] + a],
    ];
    if !corners.iter().all(|p| g.covers(*p)) {
        return Err(Error::Domain("the strength's support collar extends beyond its grid".into()));
    }
    let nc = centers.len();
    let nr = radii.len();
    let values: Vec<f64> = (0..nr * nc)
        .into_par_iter()
        .map(|k| {
            let (ir, ic) = (k / nc, k % nc);
            let c = centers.point(ic);
            let r = radii[ir];
            let d = support.center_distance(c);
            if r < d - a || r > d + a {
                0.0
            } else {
                circle_mean(b, c, r, &support, a, h)
            }
        })
        .collect();
    Ok(RadonGrid { centers: centers.clone(), radii: radii.to_vec(), values })
}

/// Uniform radii `0, Δr, …` up to and including `r_max`, with `Δr ≤ h`.
pub fn radii_grid(r_max: f64, h: f64) -> Vec<f64> {
    let n = (r_max / h).ceil() as usize;
    (0..=n).map(|i| r_max * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::{build_quadratic_strength, AngularField, AnisotropyField, Preset};
    use crate::numerics::quad::gauss_legendre;
    use proptest::prelude::*;

    fn grid(n: usize) -> GridSpec2D {
        GridSpec2D::square([0.0, 0.0], 2.5, n).unwrap()
    }

    #[test]
    fn constant_strength_gives_two_pi() {
        let a = AnisotropyField::constant(grid(64), Disk::unit(), [0.7, 0.7, 0.0]).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        let rg = radon_forward(&b, &Centers::List(vec![[0.1, -0.2]]), &[0.0, 0.02, 0.3, 0.5]).unwrap();
        for v in &rg.values {
            assert!((v - 2.0 * PI * 0.7).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn quadratic_constant_gives_pi_trace() {
        let a = AnisotropyField::constant(grid(64), Disk::unit(), [1.3, 0.4, 0.2]).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        let rg = radon_forward(&b, &Centers::List(vec![[0.0, 0.1]]), &[0.2, 0.4, 0.6]).unwrap();
        for v in &rg.values {
            assert!((v - PI * 1.7).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn outside_support_is_zero() {
        let a = AnisotropyField::preset(grid(64), Disk::unit(), Preset::Default).unwrap();
        let b = build_quadratic_strength(&a, 0.5).unwrap();
        let rg = radon_forward(&b, &Centers::List(vec![[3.0, 0.0]]), &[0.0, 0.5, 1.0, 1.5]).unwrap();
        assert!(rg.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coarse_angles_rejected() {
        let f = AngularField::from_fn(grid(32), Disk::unit(), 32, |_, _| 1.0).unwrap();
        assert!(radon_forward(&f, &Centers::List(vec![[0.0, 0.0]]), &[0.1]).is_err());
    }

    /// Bump × cos 2θ phantom against Gauss–Legendre panels on the exact integrand.
    #[test]
    fn phantom_matches_oracle() {
        let g = grid(256);
        let sigma: f64 = 0.3;
        let phantom = |p: [f64; 2], th: f64| {
            let r2 = (p[0] - 0.1).powi(2) + (p[1] + 0.05).powi(2);
            (-r2 / (2.0 * sigma * sigma)).exp() * (1.0 + 0.8 * (2.0 * th).cos())
        };
        let f = AngularField::from_fn(g, Disk::unit(), 256, phantom).unwrap();
        let (x, w) = gauss_legendre(20);
        for (c, r) in [([1.2, 0.3], 1.0), ([0.0, 0.0], 0.4), ([-0.5, 0.8], 0.7)] {
            let rg = radon_forward(&f, &Centers::List(vec![c]), &[r]).unwrap();
            let mut oracle = 0.0;
            let panels = 64;
            for pnl in 0..panels {
                for (xi, wi) in x.iter().zip(&w) {
                    let th = 2.0 * PI * (pnl as f64 + 0.5 * (xi + 1.0)) / panels as f64;
                    let p = [c[0] + r * th.cos(), c[1] + r * th.sin()];
                    if Disk::unit().contains(p) {
                        oracle += PI / panels as f64 * wi * phantom(p, th);
                    }
                }
            }
            let v = rg.values[0];
            assert!((v / oracle - 1.0).abs() < 1e-3, "{c:?} {r}: {v} vs {oracle}");
        }
    }

    #[test]
    fn translation_covariance() {
        let g = grid(64);
        let h = g.spacing()[0];
        let shift = [3.0 * h, -2.0 * h];
        let base = |p: [f64; 2], th: f64| (1.0 - p[0] * p[0] - p[1] * p[1]).max(0.0) * (2.0 + (2.0 * th).sin());
        let f = AngularField::from_fn(g, Disk::new([0.0, 0.0], 0.8).unwrap(), 64, base).unwrap();
        let fs = AngularField::from_fn(g, Disk::new(shift, 0.8).unwrap(), 64, |p, th| base([p[0] - shift[0], p[1] - shift[1]], th)).unwrap();
        let cs = vec![[1.1, 0.2], [-0.4, 0.9]];
        let rs = radii_grid(1.5, h);
        let a = radon_forward(&f, &Centers::List(cs.clone()), &rs).unwrap();
        let b = radon_forward(&fs, &Centers::List(cs.iter().map(|c| [c[0] + shift[0], c[1] + shift[1]]).collect()), &rs).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn rotation_covariance_quarter_turn() {
        // Node set symmetric under quarter turns.
        let n = 64;
        let h = 2.5 / n as f64;
        let o = -(n as f64 - 1.0) * h / 2.0;
        let g = GridSpec2D::new([o, o], [2.5, 2.5], n, n).unwrap();
        let base = |p: [f64; 2], th: f64| (1.0 - p[0] * p[0] - 2.0 * p[1] * p[1]).max(0.0) * (1.5 + (2.0 * th).cos() + 0.3 * (2.0 * th).sin());
        let d = Disk::new([0.0, 0.0], 1.0).unwrap();
        let f = AngularField::from_fn(g, d, 64, base).unwrap();
        // b'(x, θ) = b(R₋ x, θ − π/2).
        let fr = AngularField::from_fn(g, d, 64, |p, th| base([p[1], -p[0]], th - PI / 2.0)).unwrap();
        let cs = vec![[1.3, 0.4], [-0.2, 1.5]];
        let rs = radii_grid(1.2, h);
        let a = radon_forward(&fr, &Centers::List(cs.clone()), &rs).unwrap();
        let b = radon_forward(&f, &Centers::List(cs.iter().map(|c| [c[1], -c[0]]).collect()), &rs).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn linear(s in -3.0f64..3.0, t in -3.0f64..3.0, k in 1.0f64..4.0) {
            let g = grid(32);
            let d = Disk::unit();
            let f1 = AngularField::from_fn(g, d, 64, |p, th| (k * p[0]).cos() * (1.0 + (2.0 * th).cos())).unwrap();
            let f2 = AngularField::from_fn(g, d, 64, |p, _| p[1] * p[1]).unwrap();
            let comb = f1.scale(s).add(&f2.scale(t)).unwrap();
            let cs = Centers::List(vec![[0.9, 0.3], [-1.2, 0.1]]);
            let rs = radii_grid(1.0, g.min_spacing());
            let a = radon_forward(&f1, &cs, &rs).unwrap();
            let b = radon_forward(&f2, &cs, &rs).unwrap();
            let c = radon_forward(&comb, &cs, &rs).unwrap();
            for i in 0..c.values.len() {
                let e = s * a.values[i] + t * b.values[i];
                prop_assert!((c.values[i] - e).abs() <= 1e-11 * (1.0 + e.abs()));
            }
        }
    }
}
