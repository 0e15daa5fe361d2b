//! Uniform planar grids and the support disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed disk in the boundary plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Config(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn unit() -> Self {
        Self { center: [0.0, 0.0], radius: 1.0 }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// Distance from `p` to the disk center.
    pub fn center_distance(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.center_distance(p) <= self.radius
    }

    /// Distance from `p` to the closed disk (zero inside).
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        (self.center_distance(p) - self.radius).max(0.0)
    }
}

/// Node-centred uniform grid: node `(ix, iy)` sits at `origin + (ix, iy) * spacing`.
///
/// Arrays over the grid are row-major with `ix` fastest: `values[iy * nx + ix]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec2D {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec2D {
    pub fn new(origin: [f64; 2], extent: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        for n in [nx, ny] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::Grid(format!("resolution {n} must be a power of two and at least 8")));
            }
        }
        if !(extent[0] > 0.0 && extent[1] > 0.0) {
            return Err(Error::Grid(format!("extent {extent:?} must be positive")));
        }
        if !origin.iter().chain(extent.iter()).all(|v| v.is_finite()) {
            return Err(Error::Grid("non-finite origin or extent".into()));
        }
        Ok(Self { origin, extent, nx, ny })
    }

    /// Square grid of side `side` centred at `center`.
    pub fn square(center: [f64; 2], side: f64, n: usize) -> Result<Self> {
        Self::new([center[0] - side / 2.0, center[1] - side / 2.0], [side, side], n, n)
    }

    pub fn spacing(&self) -> [f64; 2] {
        [self.extent[0] / self.nx as f64, self.extent[1] / self.ny as f64]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1])
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn node(&self, ix: usize, iy: usize) -> [f64; 2] {
        let h = self.spacing();
        [self.origin[0] + ix as f64 * h[0], self.origin[1] + iy as f64 * h[1]]
    }

    pub fn node_at(&self, idx: usize) -> [f64; 2] {
        self.node(idx % self.nx, idx / self.nx)
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.node_at(i))
    }

    /// Angular frequency of FFT bin `i` along an axis with `n` nodes and length `l`.
    pub fn frequency(i: usize, n: usize, l: f64) -> f64 {
        let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * std::f64::consts::PI * k / l
    }

    /// Frequency vector of FFT bin `idx` (row-major).
    pub fn xi(&self, idx: usize) -> [f64; 2] {
        [
            Self::frequency(idx % self.nx, self.nx, self.extent[0]),
            Self::frequency(idx / self.nx, self.ny, self.extent[1]),
        ]
    }

    /// Smallest Nyquist angular frequency over both axes.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()[0].max(self.spacing()[1])
    }

    /// Disk must sit strictly inside with a margin of at least two spacings.
    pub fn check_support(&self, disk: &Disk) -> Result<()> {
        let h = self.spacing();
        let lo = [disk.center[0] - disk.radius, disk.center[1] - disk.radius];
        let hi = [disk.center[0] + disk.radius, disk.center[1] + disk.radius];
        for a in 0..2 {
            let last = self.origin[a] + (if a == 0 { self.nx - 1 } else { self.ny - 1 }) as f64 * h[a];
            if lo[a] - self.origin[a] < 2.0 * h[a] || last - hi[a] < 2.0 * h[a] {
                return Err(Error::Grid(format!(
                    "support disk (center {:?}, radius {}) does not fit inside the grid with a two-cell margin",
                    disk.center, disk.radius
                )));
            }
        }
        Ok(())
    }

    /// Number of nodes across the disk diameter along the coarser axis.
    pub fn nodes_across(&self, disk: &Disk) -> f64 {
        let h = self.spacing();
        disk.diameter() / h[0].max(h[1])
    }

    /// Same physical window with `factor` times as many nodes per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self { nx: self.nx * factor, ny: self.ny * factor, ..*self }
    }

    /// True if both grids describe the same nodes.
    pub fn same_as(&self, other: &Self) -> bool {
        let tol = 1e-12 * (1.0 + self.extent[0].abs() + self.extent[1].abs());
        self.nx == other.nx
            && self.ny == other.ny
            && (0..2).all(|a| (self.origin[a] - other.origin[a]).abs() <= tol && (self.extent[a] - other.extent[a]).abs() <= tol)
    }

    /// Bilinear weights of `p`: four `(index, weight)` pairs. Nodes outside
    /// the grid are reported with index `usize::MAX`; callers treat them as zero.
    #[inline]
    pub fn bilinear_stencil(&self, p: [f64; 2]) -> [(usize, f64); 4] {
        let h = self.spacing();
        let u = (p[0] - self.origin[0]) / h[0];
        let v = (p[1] - self.origin[1]) / h[1];
        let i0 = u.floor();
        let j0 = v.floor();
        let fu = u - i0;
        let fv = v - j0;
        let (i0, j0) = (i0 as i64, j0 as i64);
        let at = |i: i64, j: i64| -> usize {
            if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                usize::MAX
            } else {
                j as usize * self.nx + i as usize
            }
        };
        [
            (at(i0, j0), (1.0 - fu) * (1.0 - fv)),
            (at(i0 + 1, j0), fu * (1.0 - fv)),
            (at(i0, j0 + 1), (1.0 - fu) * fv),
            (at(i0 + 1, j0 + 1), fu * fv),
        ]
    }

    /// Bilinear interpolation with zero extension outside the grid.
    #[inline]
    pub fn interp(&self, values: &[f64], p: [f64; 2]) -> f64 {
        let mut acc = 0.0;
        for (i, w) in self.bilinear_stencil(p) {
            if i != usize::MAX {
                acc += w * values[i];
            }
        }
        acc
    }

    /// True if `p` lies in the closed rectangle spanned by the nodes.
    pub fn covers(&self, p: [f64; 2]) -> bool {
        let h = self.spacing();
        let tol = 1e-9 * h[0].min(h[1]);
        p[0] >= self.origin[0] - tol
            && p[1] >= self.origin[1] - tol
            && p[0] <= self.origin[0] + (self.nx - 1) as f64 * h[0] + tol
            && p[1] <= self.origin[1] + (self.ny - 1) as f64 * h[1] + tol
    }
}

/// C∞ step: 1 for `t ≤ 0`, 0 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = f(1.0 - t);
    a / (a + f(t))
}

/// C∞ plateau in the radius: 1 for `r ≤ r0`, 0 for `r ≥ r1`.
pub fn plateau(r: f64, r0: f64, r1: f64) -> f64 {
    smooth_step((r - r0) / (r1 - r0))
}

/// Compactly supported bump `exp(1 - 1/(1 - s))`, `s = (r/radius)²`, equal to 1 at the centre.
pub fn bump(r: f64, radius: f64) -> f64 {
    let s = (r / radius).powi(2);
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s)).exp()
    }
}
