//! Univariate local linear regression.
//!
//! At an evaluation point `z` with offsets `d_k = X_k - z` and weights
//! `K_k = K(d_k / h)`, the fit is the intercept of a weighted least-squares
//! line: `ĝ(z) = (s₂t₀ - s₁t₁) / (s₀s₂ - s₁²)` with `s_r = Σ K_k d_kʳ` and
//! `t_r = Σ K_k d_kʳ Z_k`. The `1/h` factor of `K_h` cancels and is omitted.

use alloc::vec::Vec;
use core::ops::Range;

use super::{check_finite, range, Diagnostics, Evaluator, Kernel, Method, SmootherFit};
use crate::error::{Error, Result};
use crate::smoothers::Bandwidths;

/// Relative determinant threshold below which the local design is singular.
pub const DET_TOL: f64 = 1e-12;

/// Covariate values sorted ascending, with their original indices.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SortedDesign {
    x: Vec<f64>,
    order: Vec<usize>,
}

impl SortedDesign {
    pub(crate) fn new(x: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        Self {
            x: order.iter().map(|&i| x[i]).collect(),
            order,
        }
    }

    /// Sorted positions whose covariate lies within `reach` of `z`.
    pub(crate) fn window(&self, z: f64, reach: f64) -> Range<usize> {
        if !reach.is_finite() {
            return 0..self.x.len();
        }
        let lo = self.x.partition_point(|&v| v < z - reach);
        let hi = self.x.partition_point(|&v| v <= z + reach);
        lo..hi.max(lo)
    }

    /// `(original index, covariate)` pairs within `reach` of `z`.
    pub(crate) fn neighbours(&self, z: f64, reach: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.window(z, reach).map(move |k| (self.order[k], self.x[k]))
    }
}

pub(crate) fn reach(kernel: &Kernel, h: f64) -> f64 {
    kernel.radius().map_or(f64::INFINITY, |r| r * h)
}

/// Weighted sums of the local design at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Moments {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Moments {
    pub(crate) fn det(&self) -> f64 {
        self.s0 * self.s2 - self.s1 * self.s1
    }

    pub(crate) fn is_singular(&self) -> bool {
        !(self.s0 > 0.0 && self.det() > DET_TOL * self.s0 * self.s2)
    }

    pub(crate) fn estimate(&self, point: f64) -> Result<f64> {
        if self.is_singular() {
            return Err(Error::SingularDesign { point });
        }
        Ok((self.s2 * self.t0 - self.s1 * self.t1) / self.det())
    }
}

/// Local sums at `z` with responses `z_values`, leaving out observation `skip`.
pub(crate) fn moments(
    design: &SortedDesign,
    kernel: &Kernel,
    h: f64,
    z: f64,
    z_values: &[f64],
    skip: Option<usize>,
) -> Moments {
    let mut m = Moments::default();
    for (i, x) in design.neighbours(z, reach(kernel, h)) {
        if Some(i) == skip {
            continue;
        }
        let d = x - z;
        let k = kernel.eval(d / h);
        if k == 0.0 {
            continue;
        }
        let kd = k * d;
        m.s0 += k;
        m.s1 += kd;
        m.s2 += kd * d;
        m.t0 += k * z_values[i];
        m.t1 += kd * z_values[i];
    }
    m
}

pub(crate) fn check_inputs(x: &[f64], z: &[f64], h: f64, min_n: usize) -> Result<()> {
    if x.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    if x.len() < min_n {
        return Err(Error::domain(alloc::format!("need at least {min_n} observations, got {}", x.len())));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::domain(alloc::format!("bandwidth must be finite and > 0, got {h}")));
    }
    check_finite("covariate", x.iter())?;
    check_finite("response", z.iter())
}

/// Local linear estimates `ĝ(e)` for every `e` in `eval_points`.
pub fn local_linear(x: &[f64], z: &[f64], kernel: &Kernel, h: f64, eval_points: &[f64]) -> Result<Vec<f64>> {
    check_inputs(x, z, h, 3)?;
    let design = SortedDesign::new(x);
    eval_points
        .iter()
        .map(|&e| moments(&design, kernel, h, e, z, None).estimate(e))
        .collect()
}

/// Equivalent-kernel weights `w` with `ĝ(point) = wᵀZ` for any response `Z`.
pub fn equivalent_kernel(x: &[f64], kernel: &Kernel, h: f64, point: f64) -> Result<Vec<f64>> {
    let zeros = alloc::vec![0.0; x.len()];
    check_inputs(x, &zeros, h, 3)?;
    let design = SortedDesign::new(x);
    let m = moments(&design, kernel, h, point, &zeros, None);
    if m.is_singular() {
        return Err(Error::SingularDesign { point });
    }
    let det = m.det();
    Ok(x.iter()
        .map(|&xi| {
            let d = xi - point;
            kernel.eval(d / h) * (m.s2 - d * m.s1) / det
        })
        .collect())
}

/// Leave-one-out residuals `Z_i - ĝ₋ᵢ(X_i)`.
///
/// Dropping observation `i` from the fit at its own covariate only removes the
/// `d = 0` term, so each residual costs one pass over the kernel window.
pub fn loo_residuals(x: &[f64], z: &[f64], kernel: &Kernel, h: f64) -> Result<Vec<f64>> {
    check_inputs(x, z, h, 3)?;
    let design = SortedDesign::new(x);
    (0..x.len())
        .map(|i| Ok(z[i] - moments(&design, kernel, h, x[i], z, Some(i)).estimate(x[i])?))
        .collect()
}

/// Local linear fit evaluated at the observations.
pub fn fit_local_linear(x: &[f64], z: &[f64], kernel: &Kernel, h: f64) -> Result<SmootherFit> {
    check_inputs(x, z, h, 3)?;
    let design = SortedDesign::new(x);
    let fitted = x
        .iter()
        .map(|&e| moments(&design, kernel, h, e, z, None).estimate(e))
        .collect::<Result<Vec<_>>>()?;
    Ok(SmootherFit {
        method: Method::Loclin,
        kernel: kernel.clone(),
        bandwidths: Bandwidths::single(h)?,
        components: alloc::vec![fitted.clone()],
        fitted,
        intercept: 0.0,
        ranges: alloc::vec![range(x)],
        diagnostics: Diagnostics::default(),
        evaluator: Evaluator::LocalLinear {
            design,
            z: z.to_vec(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use alloc::vec;

    #[test]
    fn normal_equation_oracle() {
        let x = [0.1, 0.35, 0.5, 0.8, 1.0];
        let z = [1.0, -0.4, 2.2, 0.7, 1.5];
        let h = 0.5;
        for &e in &[0.2, 0.5, 0.75] {
            // (AᵀDA)⁻¹AᵀDZ by an explicit 2×2 solve
            let mut ata = Matrix::zeros(2, 2);
            let mut atz = [0.0; 2];
            for i in 0..5 {
                let d = x[i] - e;
                let w = Kernel::Epanechnikov.eval(d / h) / h;
                ata[(0, 0)] += w;
                ata[(0, 1)] += w * d;
                ata[(1, 0)] += w * d;
                ata[(1, 1)] += w * d * d;
                atz[0] += w * z[i];
                atz[1] += w * d * z[i];
            }
            let beta = ata.lu().unwrap().solve(&atz);
            let got = local_linear(&x, &z, &Kernel::Epanechnikov, h, &[e]).unwrap()[0];
            assert!((got - beta[0]).abs() < 1e-12, "{got} vs {}", beta[0]);
        }
    }

    #[test]
    fn reproduces_constants_and_lines() {
        let x: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let c = vec![3.25; 20];
        let line: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        for k in [Kernel::Epanechnikov, Kernel::Gaussian] {
            let e = [1.1, 1.5, 1.9];
            let gc = local_linear(&x, &c, &k, 0.4, &e).unwrap();
            let gl = local_linear(&x, &line, &k, 0.4, &e).unwrap();
            for (i, &p) in e.iter().enumerate() {
                assert!((gc[i] - 3.25).abs() < 1e-12);
                assert!((gl[i] - (2.0 + 3.0 * p)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn equivalent_kernel_reproducing_conditions() {
        let x = [0.0, 0.2, 0.3, 0.55, 0.9, 1.0];
        let w = equivalent_kernel(&x, &Kernel::Epanechnikov, 0.4, 0.5).unwrap();
        let s: f64 = w.iter().sum();
        let s1: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - 0.5)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(s1.abs() < 1e-12);
    }

    #[test]
    fn singular_design_names_point() {
        let x = [0.0, 0.1, 0.2, 5.0];
        let z = [1.0, 2.0, 3.0, 4.0];
        let err = local_linear(&x, &z, &Kernel::Epanechnikov, 0.3, &[5.0]).unwrap_err();
        assert_eq!(err, Error::SingularDesign { point: 5.0 });
    }

    #[test]
    fn loo_matches_refits() {
        let x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.618).fract() + 1.0).collect();
        let z: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v + 0.1 * (i as f64).cos()).collect();
        let r = loo_residuals(&x, &z, &Kernel::Epanechnikov, 0.5).unwrap();
        for i in 0..x.len() {
            let xs: Vec<f64> = (0..x.len()).filter(|&j| j != i).map(|j| x[j]).collect();
            let zs: Vec<f64> = (0..x.len()).filter(|&j| j != i).map(|j| z[j]).collect();
            let g = local_linear(&xs, &zs, &Kernel::Epanechnikov, 0.5, &[x[i]]).unwrap()[0];
            assert!((r[i] - (z[i] - g)).abs() < 1e-12);
        }
    }
}
