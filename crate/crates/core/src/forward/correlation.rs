//! Monte Carlo correlation of Born terms at two wavenumbers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::{CovarianceModel, FieldSynthesizer};
use crate::forward::born::{born_u1_refined, RadialBorn};
use crate::forward::config::{check_point, check_segment, DEFAULT_P_OFFSET};
use crate::numerics::sum::{pairwise_sum, pairwise_sum_c};

/// Ensemble settings shared by the correlation estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub p: f64,
    /// Realization `i` uses seed `seed + i`.
    pub seed: u64,
}

impl McOptions {
    pub fn for_model(model: &CovarianceModel, seed: u64) -> Self {
        Self { p: model.epsilon() + DEFAULT_P_OFFSET, seed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub value: Complex64,
    pub std_error: f64,
    pub n: usize,
}

impl CorrelationEstimate {
    pub fn from_samples(s: &[Complex64]) -> Self {
        let n = s.len();
        let mean = pairwise_sum_c(s) / n as f64;
        let d: Vec<f64> = s.iter().map(|v| (v - mean).norm_sqr()).collect();
        let var = if n > 1 { pairwise_sum(&d) / (n as f64 - 1.0) } else { 0.0 };
        Self { value: mean, std_error: (var / n as f64).sqrt(), n }
    }
}

fn check_geometry(model: &CovarianceModel, x: [f64; 3], y: [f64; 3], n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 realizations, got {n}")));
    }
    let disk = model.strength.disk();
    check_point(&x, disk)?;
    check_point(&y, disk)?;
    check_segment(&x, &y, disk)
}

/// `I(x, y, k₁, k₂) = E[u₁(x, y, k₁) conj(u₁(x, y, k₂))]`.
pub fn estimate_correlation(
    model: &CovarianceModel,
    x: [f64; 3],
    y: [f64; 3],
    k1: f64,
    k2: f64,
    n: usize,
    opts: McOptions,
) -> Result<CorrelationEstimate> {
    check_geometry(model, x, y, n)?;
    let synth = FieldSynthesizer::new(model, model.grid())?;
    let samples: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lambda = synth.sample(opts.seed.wrapping_add(i as u64));
            if x == y {
                let rb = RadialBorn::new(&lambda, x, k1.max(k2))?;
                Ok(rb.u1(k1, opts.p) * rb.u1(k2, opts.p).conj())
            } else {
                Ok(born_u1_refined(&lambda, x, y, k1, opts.p)? * born_u1_refined(&lambda, x, y, k2, opts.p)?.conj())
            }
        })
        .collect::<Result<_>>()?;
    Ok(CorrelationEstimate::from_samples(&samples))
}

/// Backscatter powers `E|u₁(x, x, k)|²` for every `k`, sharing realizations across the list.
pub fn estimate_backscatter_power(
    model: &CovarianceModel,
    x: [f64; 3],
    ks: &[f64],
    n: usize,
    opts: McOptions,
) -> Result<Vec<CorrelationEstimate>> {
    check_geometry(model, x, x, n)?;
    let k_max = ks.iter().copied().fold(0.0, f64::max);
    let synth = FieldSynthesizer::new(model, model.grid())?;
    let per_real: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lambda = synth.sample(opts.seed.wrapping_add(i as u64));
            let rb = RadialBorn::new(&lambda, x, k_max)?;
            Ok(ks.iter().map(|k| rb.u1(*k, opts.p).norm_sqr()).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..ks.len())
        .map(|j| {
            let s: Vec<Complex64> = per_real.iter().map(|r| Complex64::new(r[j], 0.0)).collect();
            CorrelationEstimate::from_samples(&s)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::{build_quadratic_strength, AnisotropyField};
    use crate::grid::{Disk, GridSpec2D};

    fn model(m: [f64; 3]) -> CovarianceModel {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, 64).unwrap();
        let a = AnisotropyField::constant(g, Disk::unit(), m).unwrap();
        CovarianceModel::new(build_quadratic_strength(&a, 0.5).unwrap())
    }

    #[test]
    fn zero_strength_zero_correlation() {
        let m = model([0.0; 3]);
        let e = estimate_correlation(&m, [1.6, 0.0, 0.5], [1.6, 0.0, 0.5], 3.0, 4.0, 4, McOptions::for_model(&m, 1)).unwrap();
        assert_eq!(e.value, Complex64::default());
    }

    #[test]
    fn hermitian_in_wavenumbers() {
        let m = model([1.0, 0.5, 0.2]);
        let (x, y) = ([1.6, 0.0, 0.5], [1.4, 0.9, 0.7]);
        let o = McOptions::for_model(&m, 7);
        let a = estimate_correlation(&m, x, y, 3.0, 5.0, 8, o).unwrap();
        let b = estimate_correlation(&m, x, y, 5.0, 3.0, 8, o).unwrap();
        assert!((a.value - b.value.conj()).norm() <= 1e-12 * a.value.norm());
    }

    #[test]
    fn rejects_bad_geometry() {
        let m = model([1.0, 1.0, 0.0]);
        let o = McOptions::for_model(&m, 0);
        assert!(estimate_correlation(&m, [1.6, 0.0, 0.5], [-1.6, 0.0, 0.5], 3.0, 3.0, 4, o).is_err());
        assert!(estimate_correlation(&m, [1.6, 0.0, 0.5], [1.6, 0.0, 0.5], 3.0, 3.0, 1, o).is_err());
    }
}
