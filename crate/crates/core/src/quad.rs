//! Numerical integration.
//!
//! Double-exponential (tanh-sinh) quadrature tolerates integrable endpoint
//! singularities such as `x^{p-1}` near 0 for `p < 1`, which is what the
//! Matsuoka density has. Used to validate tabulated kernels and for the
//! closed-form diagnostics.

#[allow(unused_imports)] // redundant when num-traits is built with std
use num_traits::Float;

use crate::error::{Error, Result};

const MAX_LEVEL: usize = 12;
// far enough out that nodes reach ~1e-300 from the endpoints
const T_MAX: f64 = 6.5;

/// `∫_a^b f(x) dx` by tanh-sinh quadrature, refined until two consecutive
/// levels agree to `tol` (relative, with an absolute floor of `tol`).
///
/// `f` is never evaluated at the endpoints themselves.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Domain(alloc::format!("invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let pi2 = core::f64::consts::FRAC_PI_2;

    // Node t maps to x = mid + half * tanh(pi/2 sinh t). Distances to the
    // endpoints are formed directly to keep precision near a and b.
    let node = |t: f64| -> (f64, f64) {
        let u = pi2 * t.sinh();
        let cu = u.cosh();
        let w = pi2 * t.cosh() / (cu * cu);
        // 1 - tanh(|u|) = e^{-|u|} / cosh(u)
        let dist = half * (-u.abs()).exp() / cu;
        let x = if u >= 0.0 { b - dist } else { a + dist };
        (x, w * half)
    };
    let eval = |t: f64| -> f64 {
        let (x, w) = node(t);
        if x <= a || x >= b || w == 0.0 {
            0.0
        } else {
            let v = f(x) * w;
            if v.is_finite() { v } else { 0.0 }
        }
    };

    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 1..MAX_LEVEL {
        h *= 0.5;
        // new nodes are the odd multiples of h
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= tol * estimate.abs().max(1.0) {
            return Ok(estimate);
        }
    }
    Err(Error::NoConvergence {
        what: "tanh-sinh quadrature",
        iterations: MAX_LEVEL,
    })
}

/// `∫_a^∞ f(x) dx` via the substitution `x = a + s / (1 - s)`.
pub fn tanh_sinh_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<f64> {
    tanh_sinh(
        |s| {
            let one_minus = 1.0 - s;
            f(a + s / one_minus) / (one_minus * one_minus)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Trapezoid-rule weights for `n` equally spaced points with spacing `step`.
pub fn trapezoid_weights(n: usize, step: f64) -> alloc::vec::Vec<f64> {
    let mut w = alloc::vec![step; n];
    if n > 0 {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = tanh_sinh(|x| 3.0 * x * x, 0.0, 2.0, 1e-14).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn algebraic_singularity() {
        // ∫_0^1 x^{-0.9} dx = 10
        let v = tanh_sinh(|x| x.powf(-0.9), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 10.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn semi_infinite() {
        let v = tanh_sinh_to_infinity(|x| (-x).exp(), 0.0, 1e-14).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }
}
