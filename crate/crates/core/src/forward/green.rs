//! Free-space Helmholtz kernel and the half-space incident field.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `g_k(x) = e^{ik|x|} / (4π|x|)`.
pub fn greens(x: [f64; 3], k: f64) -> Result<Complex64> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == 0.0 {
        return Err(Error::Singular("Green's function evaluated at the origin".into()));
    }
    Ok(greens_r(r, k))
}

/// Kernel as a function of the distance only (no checks).
#[inline]
pub fn greens_r(r: f64, k: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), k * r)
}

/// Direct plus image-source field `g_k(x − y) + g_k(x̃ − y)` for `x` in the upper half-space.
pub fn incident_at(x: [f64; 3], y: [f64; 3], k: f64) -> Result<Complex64> {
    if !(y[2] > 0.0) {
        return Err(Error::Domain(format!("source {y:?} must lie above the boundary")));
    }
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let di = [x[0] - y[0], x[1] - y[1], -x[2] - y[2]];
    Ok(greens(d, k)? + greens(di, k)?)
}

/// Incident field at a boundary point `z` (third coordinate 0): `2 g_k(z − y)`.
pub fn incident(z: [f64; 2], y: [f64; 3], k: f64) -> Result<Complex64> {
    if !(y[2] > 0.0) {
        return Err(Error::Domain(format!("source {y:?} must lie above the boundary")));
    }
    Ok(2.0 * greens([z[0] - y[0], z[1] - y[1], -y[2]], k)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_distance_values() {
        let g = greens([1.0, 0.0, 0.0], 0.0).unwrap();
        assert!((g.re - 0.0795775).abs() < 1e-7 && g.im == 0.0);
        let g = greens([0.0, 1.0, 0.0], PI).unwrap();
        assert!((g.re + 1.0 / (4.0 * PI)).abs() < 1e-15 && g.im.abs() < 1e-15);
        for k in [0.3, 7.0, 123.0] {
            let g = greens([0.0, 0.0, 2.0], k).unwrap();
            assert!((g.norm() - 1.0 / (8.0 * PI)).abs() < 1e-15);
        }
        assert!(matches!(greens([0.0; 3], 1.0), Err(Error::Singular(_))));
    }

    #[test]
    fn incident_is_twice_direct_on_boundary() {
        let u = incident([0.0, 0.0], [0.0, 0.0, 1.0], 0.0).unwrap();
        assert!((u.re - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let (z, y, k) = ([0.3, -0.2], [1.0, 0.5, 0.7], 4.0);
        let a = incident(z, y, k).unwrap();
        let b = incident_at([z[0], z[1], 0.0], y, k).unwrap();
        assert!((a - b).norm() < 1e-15);
        assert!(matches!(incident([0.0, 0.0], [0.0, 0.0, 0.0], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn incident_satisfies_neumann_condition() {
        let y = [0.4, -0.3, 0.8];
        let k = 6.0;
        let z = [0.1, 0.2];
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let up = incident_at([z[0], z[1], h], y, k).unwrap();
            let dn = incident_at([z[0], z[1], -h], y, k).unwrap();
            let d = ((up - dn) / (2.0 * h)).norm();
            // The image construction is even in x₃, so the centred difference vanishes identically.
            assert!(d < 1e-9 && d <= prev + 1e-12);
            prev = d;
        }
        // One-sided differences shrink like O(h²) once the O(h) term cancels by symmetry.
        let f0 = incident_at([z[0], z[1], 0.0], y, k).unwrap();
        let e1 = ((incident_at([z[0], z[1], 1e-2], y, k).unwrap() - f0) / 1e-2).norm();
        let e2 = ((incident_at([z[0], z[1], 5e-3], y, k).unwrap() - f0) / 5e-3).norm();
        assert!(e2 < 0.6 * e1);
    }
}
