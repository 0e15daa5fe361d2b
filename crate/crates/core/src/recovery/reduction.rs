//! Per-center reduction of backscatter heights to a radial profile of `𝒮b`.
//!
//! In polar coordinates about `x′` the diagonal limit reads
//! `n₀(x′, x₃) = C ∫ (𝒮b)(x′, r) r^{−1−2ε} (r² + x₃²)^{ε−1} dr`,
//! a first-kind equation in `r` that is inverted here by non-negative
//! least squares on a radius grid, regularized by a second-difference penalty
//! (the profiles are smooth, and shrinking towards zero biases them).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::normalization;
use crate::error::{Error, Result};
use crate::grid::Disk;
use crate::numerics::linalg::nnls;
use crate::numerics::sum::norm;

pub const MIN_HEIGHTS: usize = 12;
pub const DEFAULT_HEIGHTS: usize = 24;
/// Height range as multiples of the distance to the support disk.
pub const HEIGHT_RANGE: (f64, f64) = (0.05, 2.0);
pub const DEFAULT_REG: f64 = 1e-6;
/// Relative misfit attributable to discretization alone.
pub const NOISE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionProblem {
    pub center: [f64; 2],
    pub heights: Vec<f64>,
    pub n0: Vec<f64>,
    pub radii: Vec<f64>,
    /// Penalty weight relative to the largest singular value.
    pub reg: f64,
    /// Relative noise level of `n0`.
    pub noise: f64,
    pub epsilon: f64,
}

/// `n` log-spaced heights over [`HEIGHT_RANGE`] times `dist(x′, D)`.
pub fn default_heights(center: [f64; 2], disk: &Disk, n: usize) -> Vec<f64> {
    let d = disk.distance(center);
    let (lo, hi) = (HEIGHT_RANGE.0 * d, HEIGHT_RANGE.1 * d);
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// `n` uniform radii over `[dist(x′, D), dist(x′, D) + diam D]`.
pub fn default_radii(center: [f64; 2], disk: &Disk, n: usize) -> Vec<f64> {
    let d = disk.distance(center);
    let w = disk.diameter();
    (0..n).map(|i| d + w * i as f64 / (n - 1) as f64).collect()
}

impl ReductionProblem {
    pub fn new(
        center: [f64; 2],
        heights: Vec<f64>,
        n0: Vec<f64>,
        radii: Vec<f64>,
        disk: &Disk,
        epsilon: f64,
    ) -> Result<Self> {
        let p = Self { center, heights, n0, radii, reg: DEFAULT_REG, noise: 0.0, epsilon };
        p.validate(disk)?;
        Ok(p)
    }

    pub fn validate(&self, disk: &Disk) -> Result<()> {
        let h = &self.heights;
        if h.len() != self.n0.len() {
            return Err(Error::Config("one n0 sample per height is required".into()));
        }
        if h.len() < MIN_HEIGHTS {
            return Err(Error::Config(format!("{} heights given, at least {MIN_HEIGHTS} needed", h.len())));
        }
        if h.iter().any(|v| !(*v > 0.0)) || h.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("heights must be positive and strictly increasing".into()));
        }
        let q = h[1] / h[0];
        if h.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-6) {
            return Err(Error::Config("heights must be log-spaced".into()));
        }
        if disk.contains(self.center) {
            return Err(Error::Config(format!("(A3) violated: center {:?} lies in the support disk", self.center)));
        }
        let d = disk.distance(self.center);
        let tol = 1e-9 * (1.0 + d + disk.diameter());
        let (r0, r1) = (self.radii.first().copied().unwrap_or(f64::NAN), self.radii.last().copied().unwrap_or(f64::NAN));
        if self.radii.len() < 2 || self.radii.windows(2).any(|w| !(w[1] > w[0])) || r0 > d + tol || r1 < d + disk.diameter() - tol {
            return Err(Error::Config("radii must increase and cover [dist(x′, D), dist(x′, D) + diam D]".into()));
        }
        if !(self.reg >= 0.0) || !(self.noise >= 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Config("regularization, noise level and ε must be non-negative (ε positive)".into()));
        }
        Ok(())
    }
}

/// Discretized forward operator: trapezoid weights in `r` times the kernel.
pub fn kernel_matrix(radii: &[f64], heights: &[f64], epsilon: f64) -> DMatrix<f64> {
    let nr = radii.len();
    let c = normalization(epsilon);
    let w: Vec<f64> = (0..nr)
        .map(|i| {
            let left = if i > 0 { radii[i] - radii[i - 1] } else { 0.0 };
            let right = if i + 1 < nr { radii[i + 1] - radii[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    DMatrix::from_fn(heights.len(), nr, |l, i| {
        let r = radii[i];
        let x3 = heights[l];
        c * w[i] * r.powf(-1.0 - 2.0 * epsilon) * (r * r + x3 * x3).powf(epsilon - 1.0)
    })
}

/// Backscatter heights produced by a radial profile (forward map).
pub fn manufacture_n0(profile: &[f64], radii: &[f64], heights: &[f64], epsilon: f64) -> Vec<f64> {
    let k = kernel_matrix(radii, heights, epsilon);
    (k * DVector::from_column_slice(profile)).iter().copied().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Root-mean-square relative misfit of the data.
    pub residual: f64,
    /// Condition number of the regularized system.
    pub cond: f64,
}

pub fn reduce_to_radon(p: &ReductionProblem) -> Result<Reduction> {
    let nr = p.radii.len();
    let scale = p.n0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(Reduction { radii: p.radii.clone(), values: vec![0.0; nr], residual: 0.0, cond: 1.0 });
    }
    if p.n0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("n0 samples must be finite".into()));
    }
    // Relative rows: the data span orders of magnitude across heights.
    let w: Vec<f64> = p.n0.iter().map(|v| 1.0 / v.abs().max(1e-12 * scale)).collect();
    let mut k = kernel_matrix(&p.radii, &p.heights, p.epsilon);
    for (l, wl) in w.iter().enumerate() {
        k.row_mut(l).scale_mut(*wl);
    }
    let smax = k.singular_values().max();
    let m = p.heights.len();
    let mut aug = DMatrix::zeros(m + nr, nr);
    aug.view_mut((0, 0), (m, nr)).copy_from(&k);
    let lam = p.reg * smax;
    for i in 0..nr {
        aug[(m + i, i)] = -2.0 * lam;
        if i > 0 {
            aug[(m + i, i - 1)] = lam;
        }
        if i + 1 < nr {
            aug[(m + i, i + 1)] = lam;
        }
    }
    let mut rhs = DVector::zeros(m + nr);
    for l in 0..m {
        rhs[l] = p.n0[l] * w[l];
    }
    let sv = aug.singular_values();
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    let x = nnls(&aug, &rhs);
    let fit = &k * &x;
    let misfit: Vec<f64> = (0..m).map(|l| fit[l] - rhs[l]).collect();
    let residual = norm(&misfit) / (m as f64).sqrt();
    let allowed = 3.0 * p.noise.max(NOISE_FLOOR);
    if residual > allowed {
        return Err(Error::ModelMismatch(format!(
            "relative misfit {residual:.3e} at center {:?} exceeds 3× the noise level ({allowed:.3e})",
            p.center
        )));
    }
    Ok(Reduction {
        radii: p.radii.clone(),
        values: x.iter().copied().collect(),
        residual,
        cond,
    })
}

/// Amplification `C` with `‖Δ out‖/‖out‖ ≤ C δ` under relative data noise of size `δ`.
pub fn stability_constant(p: &ReductionProblem, delta: f64, seed: u64) -> Result<f64> {
    let base = reduce_to_radon(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = p.clone();
    q.noise = q.noise.max(delta);
    for v in &mut q.n0 {
        *v *= 1.0 + delta * rng.gen_range(-1.0..=1.0);
    }
    let pert = reduce_to_radon(&q)?;
    let d: Vec<f64> = base.values.iter().zip(&pert.values).map(|(a, b)| a - b).collect();
    let n = norm(&base.values);
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(norm(&d) / n / delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::{build_quadratic_strength, AnisotropyField, Preset};
    use crate::grid::GridSpec2D;
    use crate::numerics::sum::rel_l2;
    use crate::sradon::{radon_forward, Centers};

    fn problem(center: [f64; 2], n0: Vec<f64>, radii: Vec<f64>) -> ReductionProblem {
        let disk = Disk::unit();
        ReductionProblem::new(center, default_heights(center, &disk, DEFAULT_HEIGHTS), n0, radii, &disk, 0.5).unwrap()
    }

    #[test]
    fn zero_data_zero_profile() {
        let c = [0.0, -1.5];
        let r = default_radii(c, &Disk::unit(), 64);
        let out = reduce_to_radon(&problem(c, vec![0.0; DEFAULT_HEIGHTS], r)).unwrap();
        assert!(out.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn validation() {
        let disk = Disk::unit();
        let c = [0.0, -1.5];
        let r = default_radii(c, &disk, 32);
        let h = default_heights(c, &disk, 8);
        assert!(ReductionProblem::new(c, h, vec![0.0; 8], r.clone(), &disk, 0.5).is_err());
        let mut h = default_heights(c, &disk, 16);
        h[3] *= 1.01;
        assert!(ReductionProblem::new(c, h, vec![0.0; 16], r.clone(), &disk, 0.5).is_err());
        let h = default_heights(c, &disk, 16);
        assert!(ReductionProblem::new(c, h.clone(), vec![0.0; 16], r[1..].to_vec(), &disk, 0.5).is_err());
        assert!(ReductionProblem::new([0.2, 0.1], h, vec![0.0; 16], r, &disk, 0.5).is_err());
    }

    /// Phantom profile at a center plus fine-grid forward data.
    fn phantom_case(center: [f64; 2]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, 128).unwrap();
        let b = build_quadratic_strength(&AnisotropyField::preset(g, Disk::unit(), Preset::Default).unwrap(), 0.5).unwrap();
        let disk = Disk::unit();
        let coarse = default_radii(center, &disk, 64);
        let fine = default_radii(center, &disk, 1024);
        let cs = Centers::List(vec![center]);
        let truth = radon_forward(&b, &cs, &coarse).unwrap().values;
        let fine_prof = radon_forward(&b, &cs, &fine).unwrap().values;
        let n0 = manufacture_n0(&fine_prof, &fine, &default_heights(center, &disk, DEFAULT_HEIGHTS), 0.5);
        (coarse, truth, n0)
    }

    #[test]
    fn phantom_round_trip() {
        for c in [[0.0, -1.5], [2.0, 0.3]] {
            let (r, truth, n0) = phantom_case(c);
            std::fs::write(format!("/tmp/red_{}.json", c[1]), serde_json::to_string(&(&r, &truth, &n0, default_heights(c, &Disk::unit(), 24))).unwrap()).unwrap();
            let out = reduce_to_radon(&problem(c, n0, r)).unwrap();
            let e = rel_l2(&out.values, &truth);
            assert!(e <= 0.05, "center {c:?}: {e}");
        }
    }

    #[test]
    fn bump_is_localized() {
        let c = [0.0, -1.8];
        let disk = Disk::unit();
        let r = default_radii(c, &disk, 64);
        let fine = default_radii(c, &disk, 2048);
        let r0 = r[25];
        let prof: Vec<f64> = fine.iter().map(|x| (-((x - r0) / 0.08).powi(2)).exp()).collect();
        let n0 = manufacture_n0(&prof, &fine, &default_heights(c, &disk, DEFAULT_HEIGHTS), 0.5);
        let out = reduce_to_radon(&problem(c, n0, r)).unwrap();
        let imax = (0..out.values.len()).max_by(|&a, &b| out.values[a].total_cmp(&out.values[b])).unwrap();
        assert!(imax.abs_diff(25) <= 2, "peak at {imax}");
    }

    #[test]
    fn mismatch_is_reported() {
        let c = [0.0, -1.5];
        let (r, _, mut n0) = phantom_case(c);
        // Negative data cannot come from a non-negative profile.
        for v in n0.iter_mut().step_by(2) {
            *v = -*v;
        }
        assert!(matches!(reduce_to_radon(&problem(c, n0, r)), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn stability_is_finite_across_regularization() {
        let c = [0.0, -1.5];
        let (r, _, n0) = phantom_case(c);
        for reg in [1e-5, 1e-6, 1e-7] {
            let mut p = problem(c, n0.clone(), r.clone());
            p.reg = reg;
            let k = stability_constant(&p, 0.01, 7).unwrap();
            assert!(k.is_finite() && k < 1e3, "reg {reg}: C = {k}");
        }
    }
}
