//! Gamma and incomplete gamma functions.
//!
//! `γ(k, x)` is evaluated by its power series for `x < k + 1` and `Γ(k, x)`
//! by a Lentz continued fraction otherwise; the other function of the pair
//! is obtained from `γ + Γ = Γ(k)`. All tolerances are compile-time
//! constants.

use alloc::format;
#[allow(unused_imports)] // redundant when num-traits is built with std
use num_traits::Float;

use crate::error::{Error, Result};

pub const SQRT_PI: f64 = 1.772_453_850_905_516;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const SERIES_EPS: f64 = 1e-17;
const CF_EPS: f64 = 1e-16;
const MAX_EXPANSION_TERMS: usize = 100_000;
const FPMIN: f64 = 1e-300;

/// Newton/bisection budget for [`inv_upper_inc_gamma`].
pub const INVERSE_MAX_ITER: usize = 200;
/// Absolute residual accepted by [`inv_upper_inc_gamma`], relative to `Γ(k)`.
pub const INVERSE_TOL: f64 = 1e-12;

// Lanczos approximation, g = 607/128, 15 terms (Godfrey).
const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_8e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_6e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];

/// Validated argument pair of the incomplete gamma functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncGammaArgs {
    shape: f64,
    threshold: f64,
}

impl IncGammaArgs {
    pub fn new(shape: f64, threshold: f64) -> Result<Self> {
        if !shape.is_finite() || shape <= 0.0 {
            return Err(Error::domain(format!("shape must be finite and > 0, got {shape}")));
        }
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(Error::domain(format!(
                "threshold must be finite and >= 0, got {threshold}"
            )));
        }
        Ok(Self { shape, threshold })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = core::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

/// `Γ(x)` for `x > 0`.
pub fn gamma(x: f64) -> f64 {
    if x == 0.5 {
        return SQRT_PI;
    }
    if x == 1.5 {
        return 0.5 * SQRT_PI;
    }
    if x < 0.5 {
        let pi = core::f64::consts::PI;
        return pi / ((pi * x).sin() * gamma(1.0 - x));
    }
    let x1 = x - 1.0;
    let mut a = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x1 + k as f64);
    }
    let t = x1 + LANCZOS_G + 0.5;
    if x < 140.0 {
        (2.0 * core::f64::consts::PI).sqrt() * t.powf(x1 + 0.5) * (-t).exp() * a
    } else {
        ln_gamma(x).exp()
    }
}

/// `x^k e^{-x}`, evaluated in log space.
fn prefactor(shape: f64, x: f64) -> f64 {
    (shape * x.ln() - x).exp()
}

/// Power series of `γ(k, x) / (x^k e^{-x})`.
fn lower_series(shape: f64, x: f64) -> Result<f64> {
    let mut ap = shape;
    let mut del = 1.0 / shape;
    let mut sum = del;
    for _ in 0..MAX_EXPANSION_TERMS {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * SERIES_EPS {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        what: "incomplete gamma series",
        iterations: MAX_EXPANSION_TERMS,
    })
}

/// Continued fraction of `Γ(k, x) / (x^k e^{-x})` (modified Lentz).
fn upper_fraction(shape: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - shape;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_EXPANSION_TERMS {
        let an = -(i as f64) * (i as f64 - shape);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        what: "incomplete gamma continued fraction",
        iterations: MAX_EXPANSION_TERMS,
    })
}

/// Returns `(γ(k, x), Γ(k, x))`, unregularized.
fn inc_gamma_pair(args: IncGammaArgs) -> Result<(f64, f64)> {
    let (k, x) = (args.shape, args.threshold);
    let total = gamma(k);
    if x == 0.0 {
        return Ok((0.0, total));
    }
    if x < k + 1.0 {
        let lower = prefactor(k, x) * lower_series(k, x)?;
        Ok((lower, (total - lower).max(0.0)))
    } else {
        let upper = prefactor(k, x) * upper_fraction(k, x)?;
        Ok(((total - upper).max(0.0), upper))
    }
}

/// Returns `(P(k, x), Q(k, x))`, the regularized pair, each computed from its
/// own expansion where that one is the accurate one.
fn regularized_pair(args: IncGammaArgs) -> Result<(f64, f64)> {
    let (k, x) = (args.shape, args.threshold);
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    let log_pre = k * x.ln() - x - ln_gamma(k);
    if x < k + 1.0 {
        let p = (log_pre.exp() * lower_series(k, x)?).min(1.0);
        Ok((p, 1.0 - p))
    } else {
        let q = (log_pre.exp() * upper_fraction(k, x)?).min(1.0);
        Ok((1.0 - q, q))
    }
}

/// Upper incomplete gamma function `Γ(k, x) = ∫_x^∞ z^{k-1} e^{-z} dz`.
pub fn upper_inc_gamma(shape: f64, x: f64) -> Result<f64> {
    inc_gamma_pair(IncGammaArgs::new(shape, x)?).map(|(_, u)| u)
}

/// Lower incomplete gamma function `γ(k, x) = ∫_0^x z^{k-1} e^{-z} dz`.
pub fn lower_inc_gamma(shape: f64, x: f64) -> Result<f64> {
    inc_gamma_pair(IncGammaArgs::new(shape, x)?).map(|(l, _)| l)
}

/// Regularized lower incomplete gamma `P(k, x) = γ(k, x) / Γ(k)`.
pub fn regularized_lower(shape: f64, x: f64) -> Result<f64> {
    regularized_pair(IncGammaArgs::new(shape, x)?).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma `Q(k, x) = Γ(k, x) / Γ(k)`.
pub fn regularized_upper(shape: f64, x: f64) -> Result<f64> {
    regularized_pair(IncGammaArgs::new(shape, x)?).map(|(_, q)| q)
}

/// Inverse of `x ↦ Γ(k, x)`: the `x > 0` with `Γ(k, x) = y`.
///
/// Safeguarded Newton iteration on `ln Γ(k, x) - ln y` inside a bracket that
/// is shrunk on every step; a step leaving the bracket is replaced by
/// bisection.
pub fn inv_upper_inc_gamma(shape: f64, y: f64) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::domain(format!("shape must be finite and > 0, got {shape}")));
    }
    let total = gamma(shape);
    if !y.is_finite() || y <= 0.0 || y >= total {
        return Err(Error::domain(format!(
            "y must lie in (0, Γ({shape}) = {total}), got {y}"
        )));
    }
    let target = y.ln();
    let upper = |x: f64| -> Result<f64> { upper_inc_gamma(shape, x) };

    // Γ(k, ·) is decreasing: residual > 0 left of the root.
    let mut lo = 0.0_f64;
    let mut hi = shape.max(1.0);
    let mut guard = 0;
    while upper(hi)? > y {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::NoConvergence {
                what: "inverse incomplete gamma bracketing",
                iterations: guard,
            });
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..INVERSE_MAX_ITER {
        let value = upper(x)?;
        let residual = if value > 0.0 { value.ln() - target } else { f64::NEG_INFINITY };
        if residual.abs() <= 1e-15 {
            return Ok(x);
        }
        if residual > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(x);
        }
        // d/dx ln Γ(k, x) = -x^{k-1} e^{-x} / Γ(k, x)
        let slope = if value > 0.0 {
            -((shape - 1.0) * x.ln() - x - value.ln()).exp()
        } else {
            0.0
        };
        let mut next = if residual.is_finite() && slope < 0.0 {
            x - residual / slope
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 2.0 * f64::EPSILON * x {
            let value = upper(next)?;
            if (value - y).abs() <= INVERSE_TOL * total {
                return Ok(next);
            }
        }
        x = next;
    }
    let value = upper(x)?;
    if (value - y).abs() <= INVERSE_TOL * total {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            what: "inverse incomplete gamma",
            iterations: INVERSE_MAX_ITER,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma(0.5), SQRT_PI) < 1e-15);
        assert!(rel(gamma(1.5), SQRT_PI / 2.0) < 1e-15);
        assert!(rel(gamma(5.0), 24.0) < 1e-14);
        assert!(rel(gamma(10.0), 362_880.0) < 1e-14);
        assert!(rel(gamma(2.5), 0.75 * SQRT_PI) < 1e-14);
        assert!(rel(gamma(0.1), 9.513_507_698_668_732) < 1e-13);
        assert!(rel(ln_gamma(100.0), 359.134_205_369_575_4) < 1e-14);
    }

    #[test]
    fn upper_at_zero_is_complete_gamma() {
        let v = upper_inc_gamma(1.5, 0.0).unwrap();
        assert!(rel(v, 0.886_226_925_452_758) < 1e-14);
        assert_eq!(lower_inc_gamma(1.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn upper_tail_vanishes() {
        assert!(upper_inc_gamma(1.5, 800.0).unwrap() < 1e-300);
        let lower = lower_inc_gamma(1.5, 700.0).unwrap();
        assert!(rel(lower, gamma(1.5)) < 1e-12);
    }

    #[test]
    fn upper_matches_quadrature() {
        let oracle = quad::tanh_sinh_to_infinity(|z| z.sqrt() * (-z).exp(), 1.0, 1e-14).unwrap();
        let v = upper_inc_gamma(1.5, 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn lower_complement() {
        let v = lower_inc_gamma(1.5, 2.0).unwrap();
        let oracle = gamma(1.5) - upper_inc_gamma(1.5, 2.0).unwrap();
        assert!(rel(v, oracle) < 1e-14);
        let quad = quad::tanh_sinh(|z| z.sqrt() * (-z).exp(), 0.0, 2.0, 1e-14).unwrap();
        assert!(rel(v, quad) < 1e-12);
    }

    #[test]
    fn complementary_identity_grid() {
        for &k in &[0.5, 1.0, 1.5, 3.0, 10.0] {
            let total = gamma(k);
            for i in 0..=100 {
                let x = 10f64.powf(-8.0 + (i as f64) * (50f64.log10() + 8.0) / 100.0);
                let l = lower_inc_gamma(k, x).unwrap();
                let u = upper_inc_gamma(k, x).unwrap();
                assert!(rel(l + u, total) <= 1e-12, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn monotone_on_grid() {
        for &k in &[0.5, 1.5, 3.0] {
            let mut prev_u = f64::INFINITY;
            let mut prev_l = -1.0;
            for i in 0..400 {
                let x = 0.001 + i as f64 * 0.05;
                let u = upper_inc_gamma(k, x).unwrap();
                let l = lower_inc_gamma(k, x).unwrap();
                assert!(u < prev_u && l > prev_l, "k={k} x={x}");
                prev_u = u;
                prev_l = l;
            }
        }
    }

    #[test]
    fn exponential_case_closed_form() {
        for &x in &[0.1, 1.0, 3.0, 20.0] {
            assert!(rel(upper_inc_gamma(1.0, x).unwrap(), (-x).exp()) < 1e-13);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(upper_inc_gamma(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(upper_inc_gamma(1.5, -1.0), Err(Error::Domain(_))));
        assert!(matches!(lower_inc_gamma(f64::NAN, 1.0), Err(Error::Domain(_))));
        assert!(matches!(upper_inc_gamma(1.5, f64::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(inv_upper_inc_gamma(1.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(inv_upper_inc_gamma(1.5, gamma(1.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_round_trip_at_one() {
        let y = upper_inc_gamma(1.5, 1.0).unwrap();
        let x = inv_upper_inc_gamma(1.5, y).unwrap();
        assert!((x - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_near_complete_gamma_is_near_zero() {
        let x = inv_upper_inc_gamma(1.5, gamma(1.5) * (1.0 - 1e-9)).unwrap();
        assert!(x > 0.0 && x < 1e-4, "{x}");
    }

    #[test]
    fn inverse_median_matches_bisection() {
        let y = 0.5 * SQRT_PI / 2.0;
        // independent bisection on the forward map
        let (mut lo, mut hi) = (0.0_f64, 50.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if upper_inc_gamma(1.5, mid).unwrap() > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = inv_upper_inc_gamma(1.5, y).unwrap();
        assert!((x - 0.5 * (lo + hi)).abs() < 1e-10);
        assert!((upper_inc_gamma(1.5, x).unwrap() - y).abs() <= 1e-12 * gamma(1.5));
    }
}
