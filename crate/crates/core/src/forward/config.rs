//! Measurement geometry and the admissibility checks it must satisfy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Disk;

/// Default frequency-scaling exponent offset: `p = ε + 1`.
pub const DEFAULT_P_OFFSET: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    /// Measurement points `(x1, x2, x3)`, `x3 > 0`.
    pub points: Vec<[f64; 3]>,
    /// Upper band edge `K`; the band is `[1, K]`.
    pub k_max: f64,
    /// Gauss–Legendre nodes per unit of `k` (at least 8).
    pub band_nodes: usize,
    pub p: f64,
    pub epsilon: f64,
    pub disk: Disk,
}

impl MeasurementConfig {
    pub fn new(points: Vec<[f64; 3]>, k_max: f64, epsilon: f64, disk: Disk) -> Result<Self> {
        let c = Self { points, k_max, band_nodes: 8, p: epsilon + DEFAULT_P_OFFSET, epsilon, disk };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("(A4) violated: ε = {} must be positive", self.epsilon)));
        }
        if !(self.p > self.epsilon + 0.5) {
            return Err(Error::Config(format!(
                "(A4) violated: p ≤ ε + 1/2 (p = {}, ε = {})",
                self.p, self.epsilon
            )));
        }
        if !(self.k_max > 1.0) {
            return Err(Error::Config(format!("band upper edge K = {} must exceed 1", self.k_max)));
        }
        if self.band_nodes < 8 {
            return Err(Error::Config(format!("band quadrature needs at least 8 nodes per unit k, got {}", self.band_nodes)));
        }
        for x in &self.points {
            check_point(x, &self.disk)?;
        }
        Ok(())
    }

    pub fn contains_point(&self, x: [f64; 3]) -> bool {
        self.points.iter().any(|p| (0..3).all(|a| (p[a] - x[a]).abs() <= 1e-12 * (1.0 + x[a].abs())))
    }
}

/// A measurement point must sit above the plane with its projection outside `D̄`.
pub fn check_point(x: &[f64; 3], disk: &Disk) -> Result<()> {
    if !(x[2] > 0.0) || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Config(format!("measurement point {x:?} must have x3 > 0")));
    }
    if disk.center_distance([x[0], x[1]]) <= disk.radius {
        return Err(Error::Config(format!(
            "(A3) violated: projection ({}, {}) of a measurement point lies in the support disk",
            x[0], x[1]
        )));
    }
    Ok(())
}

/// The projected segment between two measurement points must avoid `D̄`.
pub fn check_segment(x: &[f64; 3], y: &[f64; 3], disk: &Disk) -> Result<()> {
    let (a, b) = ([x[0], x[1]], [y[0], y[1]]);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((disk.center[0] - a[0]) * d[0] + (disk.center[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    if disk.center_distance(q) <= disk.radius {
        return Err(Error::Config("segment between projected measurement points meets the support disk".into()));
    }
    Ok(())
}
