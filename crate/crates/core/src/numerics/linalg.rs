//! Krylov and least-squares solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::sum::norm_c;

/// Outcome of a converged GMRES run.
#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    /// Relative residual after every inner iteration.
    pub history: Vec<f64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let prods: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x.conj() * y).collect();
    crate::numerics::sum::pairwise_sum_c(&prods)
}

/// Restarted GMRES for `A x = b` with a matrix-free operator.
///
/// Stops once `‖b − A x‖ ≤ tol ‖b‖`; exceeding `max_iter` inner iterations is
/// an error that carries the residual history.
pub fn gmres<F>(apply: F, b: &[Complex64], tol: f64, restart: usize, max_iter: usize) -> Result<GmresOutcome>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm_c(b);
    let mut x = vec![Complex64::default(); n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        history.push(0.0);
        return Ok(GmresOutcome { x, history });
    }
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm_c(&r);
        if beta <= tol * bnorm {
            history.push(beta / bnorm);
            return Ok(GmresOutcome { x, history });
        }
        let m = restart.max(1);
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut h = vec![vec![Complex64::default(); m]; m + 1];
        let mut cs = vec![Complex64::default(); m];
        let mut sn = vec![Complex64::default(); m];
        let mut g = vec![Complex64::default(); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for j in 0..m {
            let mut w = apply(&v[j]);
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(vi, &w);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let wn = norm_c(&w);
            h[j + 1][j] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i].conj() * h[i][j] + sn[i].conj() * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                cs[j] = Complex64::new(1.0, 0.0);
                sn[j] = Complex64::default();
            } else {
                cs[j] = a / den;
                sn[j] = bb / den;
            }
            h[j][j] = cs[j].conj() * a + sn[j].conj() * bb;
            h[j + 1][j] = Complex64::default();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j].conj() * g[j];
            k_used = j + 1;
            total += 1;
            let rel = g[j + 1].norm() / bnorm;
            history.push(rel);
            if rel <= tol || total >= max_iter || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|c| c / wn).collect());
        }
        let mut y = vec![Complex64::default(); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in (i + 1)..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&v[i]) {
                *xk += yi * vk;
            }
        }
        if total >= max_iter {
            let ax = apply(&x);
            let res = norm_c(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
            if res <= tol {
                history.push(res);
                return Ok(GmresOutcome { x, history });
            }
            return Err(Error::Solver { iterations: total, residual: res, history });
        }
    }
}

/// Lawson–Hanson non-negative least squares: `min ‖A x − b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    // Candidates whose unconstrained value came out non-positive; cleared once x moves.
    let mut blocked = vec![false; n];
    let col_max = a.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for _ in 0..(30 * n + 10) {
        let r = b - a * &x;
        let w = a.transpose() * &r;
        // Stop once the residual is orthogonal to every inactive column up to round-off.
        let tol = 1e-12 * col_max * r.norm();
        let cand = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(jmax) = cand else { break };
        passive[jmax] = true;
        let mut idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut z = lstsq(&a.select_columns(&idx), b);
        let pos = idx.iter().position(|&j| j == jmax).expect("just added");
        if z[pos] <= 0.0 {
            passive[jmax] = false;
            blocked[jmax] = true;
            continue;
        }
        loop {
            if z.iter().all(|&v| v > 0.0) {
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[k]));
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if z[k] <= 0.0 && x[j] <= 1e-15 * (1.0 + z[k].abs()) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            idx = (0..n).filter(|&j| passive[j]).collect();
            if idx.is_empty() {
                break;
            }
            z = lstsq(&a.select_columns(&idx), b);
        }
        x.fill(0.0);
        for (k, &j) in idx.iter().enumerate() {
            x[j] = z[k].max(0.0);
        }
        blocked.iter_mut().for_each(|v| *v = false);
    }
    x
}

/// Minimum-norm least-squares solution via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-13 * smax.max(1e-300)).expect("SVD with U and Vᵀ computed")
}

/// Ridge solution of `min ‖A x − b‖² + (ρ σ_max)² ‖x‖²` for several right-hand
/// sides at once, plus the condition number `σ_max / σ_min` of `A`.
pub fn ridge_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rho: f64) -> (DMatrix<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let u = svd.u.as_ref().expect("U");
    let vt = svd.v_t.as_ref().expect("Vᵀ");
    let lam2 = (rho * smax).powi(2);
    let utb = u.transpose() * b;
    let mut scaled = utb;
    for i in 0..s.len() {
        let f = if s[i] > 0.0 { s[i] / (s[i] * s[i] + lam2) } else { 0.0 };
        scaled.row_mut(i).scale_mut(f);
    }
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (vt.transpose() * scaled, cond)
}
