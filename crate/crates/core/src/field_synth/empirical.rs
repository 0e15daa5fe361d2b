//! Ensemble statistics over realizations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::sampler::FieldRealization;
use crate::grid::GridSpec2D;
use crate::numerics::fft::forward_continuum;
use crate::numerics::sum::pairwise_sum;

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(s: &[f64]) -> Self {
        let n = s.len();
        let mean = pairwise_sum(s) / n as f64;
        let var = if n > 1 {
            let d: Vec<f64> = s.iter().map(|v| (v - mean).powi(2)).collect();
            pairwise_sum(&d) / (n as f64 - 1.0)
        } else {
            0.0
        };
        Self { value: mean, std_error: (var / n as f64).sqrt(), n }
    }
}

fn check_ensemble(realizations: &[FieldRealization]) -> Result<()> {
    let Some(first) = realizations.first() else {
        return Err(Error::Config("empty realization list".into()));
    };
    for r in realizations {
        if !r.grid.same_as(&first.grid) || r.strength_ref != first.strength_ref || r.epsilon != first.epsilon {
            return Err(Error::Inconsistent("realizations come from different models or grids".into()));
        }
    }
    Ok(())
}

/// Sample mean of `λ(z1) λ(z2)` (the field has zero mean by construction).
pub fn empirical_covariance(realizations: &[FieldRealization], z1: [f64; 2], z2: [f64; 2]) -> Result<Estimate> {
    check_ensemble(realizations)?;
    let s: Vec<f64> = realizations.iter().map(|r| r.at(z1) * r.at(z2)).collect();
    Ok(Estimate::from_samples(&s))
}

/// Ensemble mean of `|ℱλ(ξ)|²` on the grid's frequency lattice.
pub fn mean_power_spectrum(realizations: &[FieldRealization]) -> Result<Vec<f64>> {
    check_ensemble(realizations)?;
    let grid = realizations[0].grid;
    let mut acc = vec![0.0; grid.len()];
    for r in realizations {
        let spec: Vec<Complex64> = forward_continuum(&grid, &r.values);
        for (a, c) in acc.iter_mut().zip(&spec) {
            *a += c.norm_sqr();
        }
    }
    let n = realizations.len() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Mean power over lattice bins with `|ξ|` in `band` and direction within
/// `half_width` of `±direction`.
pub fn wedge_average(grid: &GridSpec2D, spectrum: &[f64], direction: f64, half_width: f64, band: (f64, f64)) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, p) in spectrum.iter().enumerate() {
        let xi = grid.xi(i);
        let r = xi[0].hypot(xi[1]);
        if r < band.0 || r > band.1 {
            continue;
        }
        let d = (xi[1].atan2(xi[0]) - direction).rem_euclid(std::f64::consts::PI);
        let d = d.min(std::f64::consts::PI - d);
        if d <= half_width {
            sum += p;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean power in `n_bins` log-spaced radial bins over `band`: `(bin centre, mean)`.
pub fn radial_profile(grid: &GridSpec2D, spectrum: &[f64], n_bins: usize, band: (f64, f64)) -> Vec<(f64, f64)> {
    let (l0, l1) = (band.0.ln(), band.1.ln());
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (i, p) in spectrum.iter().enumerate() {
        let xi = grid.xi(i);
        let r = xi[0].hypot(xi[1]);
        if r < band.0 || r >= band.1 {
            continue;
        }
        let b = (((r.ln() - l0) / (l1 - l0)) * n_bins as f64) as usize;
        sums[b.min(n_bins - 1)] += p;
        counts[b.min(n_bins - 1)] += 1;
    }
    (0..n_bins)
        .filter(|&b| counts[b] > 0)
        .map(|b| ((l0 + (b as f64 + 0.5) / n_bins as f64 * (l1 - l0)).exp(), sums[b] / counts[b] as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Disk;

    fn constant(v: f64, seed: u64) -> FieldRealization {
        let g = GridSpec2D::square([0.0, 0.0], 2.5, 16).unwrap();
        let mut r = FieldRealization::zeros(g, Disk::unit(), 0.5);
        r.values.iter_mut().for_each(|x| *x = v);
        r.seed = seed;
        r
    }

    #[test]
    fn zero_realization_gives_zero() {
        let e = empirical_covariance(&[constant(0.0, 0)], [0.0, 0.0], [0.1, 0.1]).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn swap_symmetry() {
        let rs: Vec<_> = (0..5).map(|i| {
            let mut r = constant(0.0, i);
            r.values.iter_mut().enumerate().for_each(|(k, v)| *v = ((k as u64 * 31 + i) as f64).sin());
            r
        }).collect();
        let a = empirical_covariance(&rs, [0.1, 0.2], [-0.3, 0.05]).unwrap();
        let b = empirical_covariance(&rs, [-0.3, 0.05], [0.1, 0.2]).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn mixed_models_rejected() {
        let a = constant(1.0, 0);
        let mut b = constant(1.0, 1);
        b.strength_ref = "other".into();
        assert!(matches!(empirical_covariance(&[a, b], [0.0, 0.0], [0.0, 0.0]), Err(Error::Inconsistent(_))));
    }
}
