//! Bessel functions of the first kind.

use std::f64::consts::PI;

/// `J₀(x)` from rational and asymptotic approximations (absolute error below 1e-8).
pub fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let a = 57568490574.0
            + y * (-13362590354.0 + y * (651619640.7 + y * (-11214424.18 + y * (77392.33017 + y * (-184.9052456)))));
        let b = 57568490411.0 + y * (1029532985.0 + y * (9494680.718 + y * (59272.64853 + y * (267.8532712 + y))));
        a / b
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 0.785398164;
        let a = 1.0 + y * (-0.1098628627e-2 + y * (0.2734510407e-4 + y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
        let b = -0.1562499995e-1 + y * (0.1430488765e-3 + y * (-0.6911147651e-5 + y * (0.7621095161e-6 - y * 0.934935152e-7)));
        (0.636619772 / ax).sqrt() * (xx.cos() * a - z * xx.sin() * b)
    }
}

/// `J₀(x), …, J_nmax(x)` by Miller's backward recurrence, normalized with
/// `J₀ + 2 Σ J₂ₖ = 1`.
pub fn jn_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = (nmax as f64).max(ax);
    let mut m = top as usize + 20 + (12.0 * top.sqrt()) as usize;
    m += m % 2;
    let mut jp = 0.0;
    let mut j = 1e-300;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let jm = 2.0 * k as f64 / ax * j - jp;
        jp = j;
        j = jm;
        // j now holds J_{k-1}
        let kk = k - 1;
        if kk <= nmax {
            out[kk] = j;
        }
        if kk > 0 && kk % 2 == 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Reference `Jₙ(x) = (2π)^{-1} ∫_0^{2π} cos(nτ − x sin τ) dτ` by the
/// periodic trapezoid rule, which converges geometrically.
pub fn jn_integral(n: i32, x: f64) -> f64 {
    let m = (x.abs() + n.unsigned_abs() as f64 + 40.0).ceil() as usize * 2;
    let h = 2.0 * PI / m as f64;
    (0..m).map(|i| {
        let t = i as f64 * h;
        (n as f64 * t - x * t.sin()).cos()
    }).sum::<f64>()
        / m as f64
}
