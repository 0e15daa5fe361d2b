//! Boundary integral equation `(½ − λ_k S_k) φ = λ_k u_in` and its Neumann (Born) series.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::FieldRealization;
use crate::forward::config::MeasurementConfig;
use crate::forward::green::incident;
use crate::forward::slp::{BoundaryDensity, SlpOperator};
use crate::numerics::linalg::gmres;
use crate::numerics::sum::norm_c;

pub const SOLVE_TOL: f64 = 1e-8;
const RESTART: usize = 60;
const MAX_ITER: usize = 600;

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub density: BoundaryDensity,
    /// Relative residual after each Krylov iteration.
    pub history: Vec<f64>,
}

/// `λ_k = λ / k^p` restricted to the support disk.
fn scaled_coefficient(lambda: &FieldRealization, k: f64, p: f64) -> Vec<f64> {
    let s = k.powf(-p);
    lambda
        .grid
        .nodes()
        .zip(&lambda.values)
        .map(|(z, v)| if lambda.disk.contains(z) { v * s } else { 0.0 })
        .collect()
}

/// `λ_k u_in(·; y)` on the grid.
fn rhs(lambda: &FieldRealization, lk: &[f64], y: [f64; 3], k: f64) -> Result<Vec<Complex64>> {
    lambda
        .grid
        .nodes()
        .zip(lk)
        .map(|(z, l)| if *l == 0.0 { Ok(Complex64::default()) } else { Ok(incident(z, y, k)? * *l) })
        .collect()
}

fn check_source(y: [f64; 3]) -> Result<()> {
    if !(y[2] > 0.0) {
        return Err(Error::Domain(format!("source {y:?} must lie above the boundary")));
    }
    Ok(())
}

/// Solve the boundary integral equation with restarted GMRES to relative residual 1e-8.
pub fn solve_density(lambda: &FieldRealization, y: [f64; 3], k: f64, config: &MeasurementConfig) -> Result<SolveOutcome> {
    check_source(y)?;
    let op = SlpOperator::new(&lambda.grid, &lambda.disk, k)?;
    solve_with(&op, lambda, y, k, config.p)
}

/// Same as [`solve_density`] with a prebuilt operator.
pub fn solve_with(op: &SlpOperator, lambda: &FieldRealization, y: [f64; 3], k: f64, p: f64) -> Result<SolveOutcome> {
    let lk = scaled_coefficient(lambda, k, p);
    let b = rhs(lambda, &lk, y, k)?;
    let apply = |phi: &[Complex64]| -> Vec<Complex64> {
        let s = op.apply_restricted(phi);
        phi.iter().zip(&s).zip(&lk).map(|((f, s), l)| 0.5 * f - s * *l).collect()
    };
    let out = gmres(apply, &b, SOLVE_TOL, RESTART, MAX_ITER)?;
    let mut density = BoundaryDensity { grid: lambda.grid, disk: lambda.disk, k, values: out.x };
    density.restrict();
    Ok(SolveOutcome { density, history: out.history })
}

/// Terms and partial sums of `φ = Σ φ_n`, `φ_1 = 2λ_k u_in`, `φ_{n+1} = 2λ_k S_k φ_n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BornSeries {
    pub k: f64,
    /// `‖φ_n‖` for n = 1..
    pub term_norms: Vec<f64>,
    /// `‖φ_{n+1}‖ / ‖φ_n‖`.
    pub ratios: Vec<f64>,
    /// Relative integral-equation residual of each partial sum.
    pub residuals: Vec<f64>,
    pub converged: bool,
    #[serde(skip)]
    pub partial_sum: Vec<Complex64>,
    #[serde(skip)]
    pub terms: Vec<Vec<Complex64>>,
}

/// Run `n_terms` Neumann iterations; the ratio test decides convergence.
pub fn born_series(op: &SlpOperator, lambda: &FieldRealization, y: [f64; 3], k: f64, p: f64, n_terms: usize) -> Result<BornSeries> {
    check_source(y)?;
    let lk = scaled_coefficient(lambda, k, p);
    let b = rhs(lambda, &lk, y, k)?;
    let bnorm = norm_c(&b);
    let mut term: Vec<Complex64> = b.iter().map(|v| 2.0 * v).collect();
    let mut sum = term.clone();
    let mut term_norms = vec![norm_c(&term)];
    let mut residuals = Vec::new();
    let mut terms = vec![term.clone()];
    for _ in 1..n_terms.max(1) {
        let s = op.apply_restricted(&term);
        term = s.iter().zip(&lk).map(|(s, l)| 2.0 * s * *l).collect();
        // Residual of the partial sum: (½ − λ_k S) Σ_{≤n} φ − λ_k u_in = −½ φ_{n+1}.
        residuals.push(if bnorm > 0.0 { 0.5 * norm_c(&term) / bnorm } else { 0.0 });
        term_norms.push(norm_c(&term));
        for (a, t) in sum.iter_mut().zip(&term) {
            *a += t;
        }
        terms.push(term.clone());
    }
    let ratios: Vec<f64> = term_norms.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let converged = bnorm == 0.0 || (!tail.is_empty() && tail.iter().all(|r| *r < 1.0));
    Ok(BornSeries { k, term_norms, ratios, residuals, converged, partial_sum: sum, terms })
}

/// Smallest `k` in the (ascending) list above which every tested `k` passes the ratio test.
pub fn born_threshold(lambda: &FieldRealization, y: [f64; 3], p: f64, ks: &[f64], n_terms: usize) -> Result<Option<f64>> {
    let mut ok = Vec::with_capacity(ks.len());
    for &k in ks {
        let op = SlpOperator::new(&lambda.grid, &lambda.disk, k)?;
        ok.push(born_series(&op, lambda, y, k, p, n_terms)?.converged);
    }
    let mut threshold = None;
    for i in (0..ks.len()).rev() {
        if ok[i] {
            threshold = Some(ks[i]);
        } else {
            break;
        }
    }
    Ok(threshold)
}
