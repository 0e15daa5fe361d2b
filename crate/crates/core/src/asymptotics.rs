//! Diagonal high-frequency limit of the Born correlation and its Monte Carlo check.
//!
//! For backscatter the compensated correlation `k^{2+2ε+2p} E|u₁(x, x, k)|²`
//! tends to
//!
//! `R(x, x) = C ∫_D b(z, (z − x′)⁰) |z − x|^{2ε−2} |z − x′|^{−2−2ε} dz`,
//! `C = 1 / (4^{3+ε} π⁴)`,
//!
//! which follows from stationary phase with the local wave vector
//! `2k (z − x′)/|z − x|` evaluated in the symbol `b |ξ|^{−2−2ε}`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::{CovarianceModel, DirectionalField, LocalStrength};
use crate::forward::{estimate_backscatter_power, McOptions};
use crate::numerics::stats::{fit_loglog, median, LineFit};
use crate::numerics::sum::pairwise_sum;

/// Normalization `1/(4^{3+ε} π⁴)` of the diagonal limit.
pub fn normalization(epsilon: f64) -> f64 {
    1.0 / (4f64.powf(3.0 + epsilon) * PI.powi(4))
}

/// The constant `1/(4^{4+ε} π²)` in the commonly quoted form of the limit.
pub fn quoted_normalization(epsilon: f64) -> f64 {
    1.0 / (4f64.powf(4.0 + epsilon) * PI * PI)
}

/// `R(x, x)` by node quadrature over the support of `b`.
pub fn diagonal_r(strength: &LocalStrength, x: [f64; 3]) -> Result<f64> {
    let disk = strength.disk();
    let xp = [x[0], x[1]];
    if !(x[2] > 0.0) {
        return Err(Error::Domain(format!("point {x:?} must lie above the boundary")));
    }
    if disk.center_distance(xp) <= disk.radius {
        return Err(Error::Domain(format!("projection {xp:?} lies in the support disk; the kernel is singular")));
    }
    let g = strength.grid();
    let e = strength.epsilon;
    let rows: Vec<f64> = (0..g.ny)
        .into_par_iter()
        .map(|iy| {
            let terms: Vec<f64> = (0..g.nx)
                .filter_map(|ix| {
                    let z = g.node(ix, iy);
                    if !disk.contains(z) {
                        return None;
                    }
                    let d = [z[0] - xp[0], z[1] - xp[1]];
                    let rho2 = d[0] * d[0] + d[1] * d[1];
                    let b = strength.eval(z, d[1].atan2(d[0]));
                    if b == 0.0 {
                        return None;
                    }
                    let s2 = rho2 + x[2] * x[2];
                    Some(b * s2.powf(e - 1.0) * rho2.powf(-1.0 - e))
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(normalization(e) * g.cell_area() * pairwise_sum(&rows))
}

/// Limit values at a list of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalAsymptotic {
    pub points: Vec<[f64; 3]>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub normalization: f64,
}

pub fn diagonal_asymptotic(strength: &LocalStrength, points: &[[f64; 3]]) -> Result<DiagonalAsymptotic> {
    let values = points.iter().map(|x| diagonal_r(strength, *x)).collect::<Result<_>>()?;
    Ok(DiagonalAsymptotic {
        points: points.to_vec(),
        values,
        epsilon: strength.epsilon,
        normalization: normalization(strength.epsilon),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    Conclusive,
    /// Some Monte Carlo standard error exceeds a quarter of its estimate.
    Inconclusive,
}

/// Compensated correlations against the diagonal limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub x: [f64; 3],
    pub k: Vec<f64>,
    /// `k^{2+2ε+2p} · estimate of E|u₁|²`.
    pub compensated: Vec<f64>,
    pub std_error: Vec<f64>,
    pub diagonal_r: f64,
    /// Compensated value at the largest `k`.
    pub limit_estimate: f64,
    pub relative_error: f64,
    /// `|compensated − R|` per `k`.
    pub residuals: Vec<f64>,
    /// Log-log fit of residuals against `k`.
    pub residual_fit: LineFit,
    pub status: FitStatus,
    pub n_realizations: usize,
}

impl FitReport {
    /// Medians of the residuals over `n_bins` consecutive groups of wavenumbers.
    pub fn binned_residual_medians(&self, n_bins: usize) -> Vec<f64> {
        let n = self.residuals.len();
        let n_bins = n_bins.clamp(1, n.max(1));
        (0..n_bins)
            .map(|b| median(&self.residuals[b * n / n_bins..(b + 1) * n / n_bins]))
            .collect()
    }
}

/// Monte Carlo check of the diagonal law over a list of wavenumbers.
pub fn verify_asymptotic_law(model: &CovarianceModel, x: [f64; 3], ks: &[f64], n: usize, opts: McOptions) -> Result<FitReport> {
    let (lo, hi) = ks.iter().fold((f64::INFINITY, 0.0f64), |(a, b), k| (a.min(*k), b.max(*k)));
    if ks.len() < 2 || hi < 10.0 * lo {
        return Err(Error::Config("the wavenumber list must span at least one decade".into()));
    }
    let r = diagonal_r(&model.strength, x)?;
    let est = estimate_backscatter_power(model, x, ks, n, opts)?;
    let e = 2.0 + 2.0 * model.epsilon() + 2.0 * opts.p;
    let compensated: Vec<f64> = ks.iter().zip(&est).map(|(k, c)| k.powf(e) * c.value.re).collect();
    let std_error: Vec<f64> = ks.iter().zip(&est).map(|(k, c)| k.powf(e) * c.std_error).collect();
    let residuals: Vec<f64> = compensated.iter().map(|c| (c - r).abs()).collect();
    let imax = ks.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let limit = compensated[imax];
    let status = if compensated.iter().zip(&std_error).any(|(c, s)| *s > 0.25 * c.abs()) {
        FitStatus::Inconclusive
    } else {
        FitStatus::Conclusive
    };
    Ok(FitReport {
        x,
        k: ks.to_vec(),
        residual_fit: fit_loglog(ks, &residuals.iter().map(|v| v.max(f64::MIN_POSITIVE)).collect::<Vec<_>>()),
        compensated,
        std_error,
        diagonal_r: r,
        limit_estimate: limit,
        relative_error: if r > 0.0 { (limit - r).abs() / r } else { limit.abs() },
        residuals,
        status,
        n_realizations: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::{build_quadratic_strength, AnisotropyField, Preset};
    use crate::grid::{Disk, GridSpec2D};
    use crate::numerics::quad::gauss_legendre;

    fn strength(preset: Preset, n: usize) -> LocalStrength {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, n).unwrap();
        let a = AnisotropyField::preset(g, Disk::unit(), preset).unwrap();
        build_quadratic_strength(&a, 0.5).unwrap()
    }

    /// Polar Gauss–Legendre quadrature of the analytic preset, doubled until stable.
    fn oracle(preset: Preset, x: [f64; 3], eps: f64) -> f64 {
        let disk = Disk::unit();
        let integrand = |z: [f64; 2]| {
            let [a1, a2, a3] = preset.eval(&disk, z);
            let d = [z[0] - x[0], z[1] - x[1]];
            let rho2 = d[0] * d[0] + d[1] * d[1];
            let (c, s) = (d[0] / rho2.sqrt(), d[1] / rho2.sqrt());
            let b = a1 * c * c + a2 * s * s + 2.0 * a3 * c * s;
            b * (rho2 + x[2] * x[2]).powf(eps - 1.0) * rho2.powf(-1.0 - eps)
        };
        let (gx, gw) = gauss_legendre(16);
        let eval = |panels: usize| {
            let mut acc = 0.0;
            let (hr, ht) = (1.0 / panels as f64, 2.0 * PI / (4 * panels) as f64);
            for pr in 0..panels {
                for (xr, wr) in gx.iter().zip(&gw) {
                    let r = (pr as f64 + 0.5 * (xr + 1.0)) * hr;
                    for pt in 0..4 * panels {
                        for (xt, wt) in gx.iter().zip(&gw) {
                            let t = (pt as f64 + 0.5 * (xt + 1.0)) * ht;
                            acc += 0.25 * hr * ht * wr * wt * r * integrand([r * t.cos(), r * t.sin()]);
                        }
                    }
                }
            }
            acc
        };
        let mut n = 4;
        let mut prev = eval(n);
        loop {
            n *= 2;
            let cur = eval(n);
            if (cur - prev).abs() <= 1e-6 * cur.abs() || n >= 64 {
                return normalization(eps) * cur;
            }
            prev = cur;
        }
    }

    #[test]
    fn constants() {
        for e in [0.1, 0.5, 1.3] {
            assert!((4f64.powf(4.0 + e) - 2f64.powf(8.0 + 2.0 * e)).abs() <= 1e-12 * 4f64.powf(4.0 + e));
            assert!((normalization(e) / quoted_normalization(e) - 4.0 / (PI * PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_strength() {
        assert_eq!(diagonal_r(&strength(Preset::Zero, 64), [1.6, 0.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_projection_in_support() {
        assert!(matches!(diagonal_r(&strength(Preset::Default, 64), [0.5, 0.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn far_field_limit() {
        let s = strength(Preset::Identity, 256);
        let (d, x3) = (60.0, 10.0);
        let r = diagonal_r(&s, [d, 0.0, x3]).unwrap();
        let e = 0.5;
        let expect = normalization(e) * PI * (d * d + x3 * x3).powf(e - 1.0) * (d * d).powf(-1.0 - e);
        assert!((r / expect - 1.0).abs() < 0.03, "{r} vs {expect}");
    }

    #[test]
    fn matches_independent_quadrature() {
        let s = strength(Preset::Default, 256);
        for x in [[1.6, 0.0, 0.5], [0.0, 1.8, 0.8], [-1.5, -0.6, 0.4], [1.1, -1.3, 1.0], [-0.4, 2.2, 0.3]] {
            let r = diagonal_r(&s, x).unwrap();
            let o = oracle(Preset::Default, x, 0.5);
            assert!((r / o - 1.0).abs() < 5e-3, "{x:?}: {r} vs {o}");
        }
    }

    #[test]
    fn monotone_far_field_decay() {
        let s = strength(Preset::Default, 128);
        let v: Vec<f64> = (0..8).map(|i| diagonal_r(&s, [3.0 + i as f64, 0.5, 0.5]).unwrap()).collect();
        assert!(v.iter().all(|r| *r > 0.0));
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rotation_equivariance() {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, 128).unwrap();
        let disk = Disk::unit();
        let a = AnisotropyField::preset(g, disk, Preset::Default).unwrap();
        // Rotate by a quarter turn: A'(x) = R A(Rᵀx) Rᵀ.
        let rot = AnisotropyField::from_fn(g, disk, |p| {
            let [a1, a2, a3] = Preset::Default.eval(&disk, [p[1], -p[0]]);
            [a2, a1, -a3]
        })
        .unwrap();
        let s = build_quadratic_strength(&a, 0.5).unwrap();
        let sr = build_quadratic_strength(&rot, 0.5).unwrap();
        let x = [1.6, 0.3, 0.5];
        let r0 = diagonal_r(&s, x).unwrap();
        let r1 = diagonal_r(&sr, [-0.3, 1.6, 0.5]).unwrap();
        assert!((r0 - r1).abs() <= 1e-6 * r0, "{r0} vs {r1}");
    }

    #[test]
    fn law_needs_a_decade() {
        let s = strength(Preset::Default, 64);
        let m = CovarianceModel::new(s);
        let o = McOptions::for_model(&m, 0);
        assert!(verify_asymptotic_law(&m, [1.6, 0.0, 0.5], &[5.0, 20.0], 4, o).is_err());
    }
}
