//! Joint reduction: one even-mode strength fitted to backscatter data from
//! every exterior center and height at once.
//!
//! Per-center radial inversions are severely ill-posed and only cover centers
//! outside `D`, while the slice machinery needs `𝒮b` on a full FFT grid. The
//! fit below models `b(x, θ) = c₀(x) + c₁(x) cos 2θ + s₁(x) sin 2θ` with
//! bilinear coefficient fields, matches
//! `n₀(x) = C ∫_D b(z, (z − x′)⁰) |z − x′|^{−2−2ε} (|z − x′|² + x₃²)^{ε−1} dz`
//! in relative least squares with a Laplacian smoothness penalty, and then
//! yields `𝒮b` anywhere through [`crate::sradon::radon_forward`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::normalization;
use crate::error::{Error, Result};
use crate::field_synth::{AnisotropyField, DirectionalField};
use crate::grid::{Disk, GridSpec2D};
use crate::numerics::sum::{norm, pairwise_sum};
use crate::recovery::reduction::{HEIGHT_RANGE, DEFAULT_HEIGHTS};

/// Number of modes per node: `1, cos 2θ, sin 2θ`.
const N_FIT_MODES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointFitOptions {
    /// Nodes per side of the coefficient grid (power of two).
    pub fit_nodes: usize,
    /// Quadrature points per cell side.
    pub quad_sub: usize,
    /// Smoothness weight relative to the data term.
    pub reg: f64,
}

impl Default for JointFitOptions {
    fn default() -> Self {
        Self { fit_nodes: 32, quad_sub: 4, reg: 1e-8 }
    }
}

/// Strength with the three lowest even angular modes on a coarse grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeField {
    pub grid: GridSpec2D,
    pub disk: Disk,
    /// `[c₀, c₁, s₁]` nodal values.
    pub modes: [Vec<f64>; 3],
}

impl ModeField {
    /// Coefficient grid for `disk`: `n` nodes with the support collar inside.
    pub fn grid_for(disk: &Disk, n: usize) -> Result<GridSpec2D> {
        if n < 16 {
            return Err(Error::Config(format!("fit grid needs at least 16 nodes per side, got {n}")));
        }
        // Last node at center + (n/2 − 1) h must clear radius + 2h with room to spare.
        let h = disk.radius / (n as f64 / 2.0 - 3.5);
        GridSpec2D::square(disk.center, n as f64 * h, n)
    }

    /// `A = [[c₀ + c₁, s₁], [s₁, c₀ − c₁]]` sampled on `grid`.
    pub fn anisotropy(&self, grid: GridSpec2D) -> Result<AnisotropyField> {
        let mut a = [Vec::new(), Vec::new(), Vec::new()];
        for p in grid.nodes() {
            let inside = self.disk.contains(p);
            let c = if inside { [0, 1, 2].map(|m| self.grid.interp(&self.modes[m], p)) } else { [0.0; 3] };
            a[0].push(c[0] + c[1]);
            a[1].push(c[0] - c[1]);
            a[2].push(c[2]);
        }
        let [a1, a2, a3] = a;
        AnisotropyField::new(grid, self.disk, a1, a2, a3)
    }
}

impl DirectionalField for ModeField {
    fn grid(&self) -> &GridSpec2D {
        &self.grid
    }
    fn support(&self) -> &Disk {
        &self.disk
    }
    fn n_ang(&self) -> usize {
        64
    }
    fn eval(&self, p: [f64; 2], theta: f64) -> f64 {
        if !self.disk.contains(p) {
            return 0.0;
        }
        let (s, c) = (2.0 * theta).sin_cos();
        let st = self.grid.bilinear_stencil(p);
        let mut acc = 0.0;
        for (i, w) in st {
            if i != usize::MAX {
                acc += w * (self.modes[0][i] + c * self.modes[1][i] + s * self.modes[2][i]);
            }
        }
        acc
    }
}

/// Exterior measurement points: nodes of an `n × n` center grid over `extent`
/// at distance at least `min_gap · radius` from `D`, each with log-spaced heights.
pub fn exterior_points(disk: &Disk, n: usize, extent: f64, min_gap: f64, n_heights: usize) -> Vec<[f64; 3]> {
    let h = extent / n as f64;
    let mut out = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let c = [
                disk.center[0] - extent / 2.0 + (ix as f64 + 0.5) * h,
                disk.center[1] - extent / 2.0 + (iy as f64 + 0.5) * h,
            ];
            let d = disk.distance(c);
            if d < min_gap * disk.radius {
                continue;
            }
            let (lo, hi) = (HEIGHT_RANGE.0 * d, HEIGHT_RANGE.1 * d);
            for l in 0..n_heights {
                out.push([c[0], c[1], lo * (hi / lo).powf(l as f64 / (n_heights - 1) as f64)]);
            }
        }
    }
    out
}

/// Default acquisition used by the pipeline: a 24 × 24 center grid over
/// 4.5 radii, centers at least 0.05 radii from `D`, 24 heights each.
pub fn default_exterior_points(disk: &Disk) -> Vec<[f64; 3]> {
    exterior_points(disk, 24, 4.5 * disk.radius, 0.05, DEFAULT_HEIGHTS)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointFit {
    pub field: ModeField,
    /// Root-mean-square relative data misfit.
    pub residual: f64,
    pub n_unknowns: usize,
    pub n_data: usize,
    pub options: JointFitOptions,
}

/// Quadrature point with its coefficient stencil in unknown numbering.
struct QuadPoint {
    p: [f64; 2],
    area: f64,
    stencil: [(usize, f64); 4],
}

pub fn fit_strength(points: &[[f64; 3]], n0: &[f64], disk: &Disk, epsilon: f64, opts: JointFitOptions) -> Result<JointFit> {
    if points.len() != n0.len() || points.is_empty() {
        return Err(Error::Config("one n0 value per measurement point is required".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("(A4) requires ε > 0, got {epsilon}")));
    }
    for x in points {
        crate::forward::config::check_point(x, disk)?;
    }
    if n0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("n0 values must be finite".into()));
    }
    let grid = ModeField::grid_for(disk, opts.fit_nodes)?;
    let h = grid.min_spacing();
    // Unknowns: nodes whose cells reach into D.
    let reach = disk.radius + 1.5 * h;
    let mut unknown_of = vec![usize::MAX; grid.len()];
    let mut nodes = Vec::new();
    for i in 0..grid.len() {
        if disk.center_distance(grid.node_at(i)) <= reach {
            unknown_of[i] = nodes.len();
            nodes.push(i);
        }
    }
    let nu = nodes.len();
    let nvar = N_FIT_MODES * nu;
    let empty = ModeField { grid, disk: *disk, modes: [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]] };
    let scale = n0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(JointFit { field: empty, residual: 0.0, n_unknowns: nvar, n_data: n0.len(), options: opts });
    }

    let s = opts.quad_sub.max(1);
    let hq = h / s as f64;
    let mut quad = Vec::new();
    for cell_y in 0..grid.ny - 1 {
        for cell_x in 0..grid.nx - 1 {
            let o = grid.node(cell_x, cell_y);
            for sy in 0..s {
                for sx in 0..s {
                    let p = [o[0] + (sx as f64 + 0.5) * hq, o[1] + (sy as f64 + 0.5) * hq];
                    if !disk.contains(p) {
                        continue;
                    }
                    let st = grid.bilinear_stencil(p).map(|(i, w)| (if i == usize::MAX { usize::MAX } else { unknown_of[i] }, w));
                    quad.push(QuadPoint { p, area: hq * hq, stencil: st });
                }
            }
        }
    }

    let c_norm = normalization(epsilon);
    let weights: Vec<f64> = n0.iter().map(|v| 1.0 / v.abs().max(1e-12 * scale)).collect();
    let row = |k: usize| -> Vec<f64> {
        let x = points[k];
        let mut r = vec![0.0; nvar];
        for q in &quad {
            let d = [q.p[0] - x[0], q.p[1] - x[1]];
            let rho2 = d[0] * d[0] + d[1] * d[1];
            let ker = c_norm * q.area * rho2.powf(-1.0 - epsilon) * (rho2 + x[2] * x[2]).powf(epsilon - 1.0) * weights[k];
            // cos 2φ, sin 2φ from the planar direction without trigonometry.
            let (c2, s2) = ((d[0] * d[0] - d[1] * d[1]) / rho2, 2.0 * d[0] * d[1] / rho2);
            let modes = [ker, ker * c2, ker * s2];
            for (u, w) in q.stencil {
                if u != usize::MAX {
                    for (m, v) in modes.iter().enumerate() {
                        r[m * nu + u] += w * v;
                    }
                }
            }
        }
        r
    };

    // Normal equations accumulated in fixed-size chunks (deterministic order).
    const CHUNK: usize = 256;
    let mut normal = DMatrix::<f64>::zeros(nvar, nvar);
    let mut rhs = DVector::<f64>::zeros(nvar);
    for start in (0..points.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(points.len());
        let rows: Vec<Vec<f64>> = (start..end).into_par_iter().map(row).collect();
        let block = DMatrix::from_fn(rows.len(), nvar, |i, j| rows[i][j]);
        normal.gemm_tr(1.0, &block, &block, 1.0);
        // Weighted data are all ones.
        for r in &rows {
            for (j, v) in r.iter().enumerate() {
                rhs[j] += v;
            }
        }
    }

    // Five-point Laplacian per mode with zero values beyond the unknown set.
    let mut lap = DMatrix::<f64>::zeros(nvar, nvar);
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    for (u, &i) in nodes.iter().enumerate() {
        let (ix, iy) = ((i % grid.nx) as i64, (i / grid.nx) as i64);
        let mut stencil = vec![(u, -4.0)];
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (jx, jy) = (ix + dx, iy + dy);
            if jx >= 0 && jy >= 0 && jx < nx && jy < ny {
                let v = unknown_of[(jy * nx + jx) as usize];
                if v != usize::MAX {
                    stencil.push((v, 1.0));
                }
            }
        }
        for m in 0..N_FIT_MODES {
            for &(v, w) in &stencil {
                lap[(m * nu + u, m * nu + v)] = w;
            }
        }
    }
    let ltl = lap.tr_mul(&lap);
    let tn = normal.trace();
    let scale_l = tn / ltl.trace();
    let mut sys = normal.clone();
    sys += ltl * (opts.reg * scale_l);
    for j in 0..nvar {
        sys[(j, j)] += 1e-14 * tn / nvar as f64;
    }
    let sol = match sys.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => sys.lu().solve(&rhs).ok_or_else(|| Error::Accuracy("joint fit system is singular".into()))?,
    };

    // Misfit ‖M u − 1‖² = uᵀNu − 2uᵀ(Mᵀ1) + n.
    let nd = n0.len() as f64;
    let quad_form = sol.dot(&(&normal * &sol));
    let misfit2 = (quad_form - 2.0 * sol.dot(&rhs) + nd).max(0.0);
    let residual = (misfit2 / nd).sqrt();

    let mut field = empty;
    for (u, &i) in nodes.iter().enumerate() {
        for m in 0..N_FIT_MODES {
            field.modes[m][i] = sol[m * nu + u];
        }
    }
    log::info!(
        "joint fit: {} data, {} unknowns, relative misfit {:.3e}",
        n0.len(),
        nvar,
        residual
    );
    Ok(JointFit { field, residual, n_unknowns: nvar, n_data: n0.len(), options: opts })
}

/// Relative L² distance between the fitted trace `2c₀` and a reference on the fit grid.
pub fn fit_trace_error(fit: &JointFit, reference: impl Fn([f64; 2]) -> f64) -> f64 {
    let g = fit.field.grid;
    let mut diff = Vec::new();
    let mut refv = Vec::new();
    for (i, p) in g.nodes().enumerate() {
        if fit.field.disk.contains(p) {
            diff.push(2.0 * fit.field.modes[0][i] - reference(p));
            refv.push(reference(p));
        }
    }
    norm(&diff) / norm(&refv).max(f64::MIN_POSITIVE)
}

/// Mean of `b` over the sampled directions at `p`: half the trace for quadratic forms.
pub fn angular_mean<F: DirectionalField>(b: &F, p: [f64; 2]) -> f64 {
    let n = b.n_ang();
    let v: Vec<f64> = (0..n).map(|j| b.eval(p, std::f64::consts::PI * 2.0 * j as f64 / n as f64)).collect();
    pairwise_sum(&v) / n as f64
}
