//! Classical backfitting of two local linear smoothers.
//!
//! With centred smoothers `S_j* = (I - 11ᵀ/n) S_j` the component estimates
//! solve `g₁ = S₁*(Z* - g₂)`, `g₂ = S₂*(Z* - g₁)` where `Z* = Z - Z̄`. The
//! solution is reached either by sweeping (Gauss-Seidel) or through the
//! closed form `W₁ = I - (I - S₁*S₂*)⁻¹(I - S₁*)` and its mirror image.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::local_linear::{check_inputs, reach, SortedDesign};
use super::{range, Bandwidths, Diagnostics, Evaluator, Kernel, Method, SmootherFit};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Matrix};

pub const MAX_SWEEPS: usize = 500;
/// Sup-norm of the component update at which sweeping stops.
pub const TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CbsMode {
    Iterative,
    Explicit,
}

/// Local linear smoother evaluated at the observations, stored as sparse
/// kernel rows so that one observation can be dropped cheaply.
#[derive(Debug, Clone)]
pub(crate) struct Operator {
    x: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    kv: Vec<f64>,
    dv: Vec<f64>,
}

impl Operator {
    pub(crate) fn new(x: &[f64], kernel: &Kernel, h: f64) -> Self {
        let design = SortedDesign::new(x);
        let reach = reach(kernel, h);
        let mut offsets = Vec::with_capacity(x.len() + 1);
        let (mut cols, mut kv, mut dv) = (Vec::new(), Vec::new(), Vec::new());
        offsets.push(0);
        for &xr in x {
            let mut row: Vec<(usize, f64)> = design.neighbours(xr, reach).collect();
            row.sort_unstable_by_key(|&(i, _)| i);
            for (i, xi) in row {
                let d = xi - xr;
                let k = kernel.eval(d / h);
                if k > 0.0 {
                    cols.push(i);
                    kv.push(k);
                    dv.push(d);
                }
            }
            offsets.push(cols.len());
        }
        Self {
            x: x.to_vec(),
            offsets,
            cols,
            kv,
            dv,
        }
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    /// `(s₂/det, s₁/det)` per row, leaving out observation `skip`.
    pub(crate) fn coefficients(&self, skip: Option<usize>) -> Result<Vec<(f64, f64)>> {
        (0..self.n())
            .map(|r| {
                let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for e in self.offsets[r]..self.offsets[r + 1] {
                    if Some(self.cols[e]) == skip {
                        continue;
                    }
                    let (k, d) = (self.kv[e], self.dv[e]);
                    s0 += k;
                    s1 += k * d;
                    s2 += k * d * d;
                }
                let det = s0 * s2 - s1 * s1;
                if !(s0 > 0.0 && det > super::local_linear::DET_TOL * s0 * s2) {
                    return Err(Error::SingularDesign { point: self.x[r] });
                }
                Ok((s2 / det, s1 / det))
            })
            .collect()
    }

    /// `out = S v`. Entries of `v` at a skipped observation must be zero.
    pub(crate) fn apply(&self, coef: &[(f64, f64)], v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (mut t0, mut t1) = (0.0, 0.0);
            for e in self.offsets[r]..self.offsets[r + 1] {
                let kv = self.kv[e] * v[self.cols[e]];
                t0 += kv;
                t1 += kv * self.dv[e];
            }
            *o = coef[r].0 * t0 - coef[r].1 * t1;
        }
    }

    fn dense(&self, coef: &[(f64, f64)]) -> Matrix {
        let mut s = Matrix::zeros(self.n(), self.n());
        for (r, &(a, b)) in coef.iter().enumerate() {
            for e in self.offsets[r]..self.offsets[r + 1] {
                s[(r, self.cols[e])] = self.kv[e] * (a - self.dv[e] * b);
            }
        }
        s
    }
}

/// `(I - 11ᵀ/n) S`.
fn centred(s: &Matrix) -> Matrix {
    let n = s.rows();
    let mut out = s.clone();
    for c in 0..n {
        let m = (0..n).map(|r| s[(r, c)]).sum::<f64>() / n as f64;
        for r in 0..n {
            out[(r, c)] -= m;
        }
    }
    out
}

pub(crate) struct Solution {
    pub g: [Vec<f64>; 2],
    pub partial: [Vec<f64>; 2],
    pub offset: [f64; 2],
    pub sweeps: usize,
    pub update_norm: f64,
    /// `ĝ₁ + ĝ₂` at the skipped observation.
    pub at_skip: f64,
}

fn mean_active(v: &[f64], skip: Option<usize>) -> f64 {
    let (sum, count) = v
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != skip)
        .fold((0.0, 0usize), |(s, c), (_, x)| (s + x, c + 1));
    sum / count as f64
}

/// Centred smoothing of `zstar - other`, returning the full smooth and its mean.
fn smooth_partial(
    op: &Operator,
    coef: &[(f64, f64)],
    zstar: &[f64],
    other: &[f64],
    skip: Option<usize>,
    partial: &mut [f64],
    out: &mut [f64],
) -> f64 {
    for (k, p) in partial.iter_mut().enumerate() {
        *p = if Some(k) == skip { 0.0 } else { zstar[k] - other[k] };
    }
    op.apply(coef, partial, out);
    mean_active(out, skip)
}

fn finish(
    ops: &[Operator; 2],
    coefs: &[Vec<(f64, f64)>; 2],
    zstar: &[f64],
    skip: Option<usize>,
    g: [Vec<f64>; 2],
    sweeps: usize,
    update_norm: f64,
) -> Solution {
    let n = zstar.len();
    let mut partial = [vec![0.0; n], vec![0.0; n]];
    let mut smooth = vec![0.0; n];
    let mut offset = [0.0; 2];
    let mut at_skip = 0.0;
    for j in 0..2 {
        offset[j] = smooth_partial(&ops[j], &coefs[j], zstar, &g[1 - j], skip, &mut partial[j], &mut smooth);
        if let Some(i) = skip {
            at_skip += smooth[i] - offset[j];
        }
    }
    Solution {
        g,
        partial,
        offset,
        sweeps,
        update_norm,
        at_skip,
    }
}

pub(crate) fn backfit(
    ops: &[Operator; 2],
    coefs: &[Vec<(f64, f64)>; 2],
    zstar: &[f64],
    skip: Option<usize>,
    init: [Vec<f64>; 2],
) -> Result<Solution> {
    let n = zstar.len();
    let mut g = init;
    let mut partial = vec![0.0; n];
    let mut smooth = vec![0.0; n];
    for sweep in 1..=MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for j in 0..2 {
            let (gj, other) = if j == 0 {
                let (a, b) = g.split_at_mut(1);
                (&mut a[0], &b[0])
            } else {
                let (a, b) = g.split_at_mut(1);
                (&mut b[0], &a[0])
            };
            let c = smooth_partial(&ops[j], &coefs[j], zstar, other, skip, &mut partial, &mut smooth);
            for k in 0..n {
                let next = if Some(k) == skip { 0.0 } else { smooth[k] - c };
                delta = delta.max((next - gj[k]).abs());
                gj[k] = next;
            }
        }
        if delta < TOL {
            return Ok(finish(ops, coefs, zstar, skip, g, sweep, delta));
        }
    }
    Err(Error::NoConvergence {
        what: "classical backfitting",
        iterations: MAX_SWEEPS,
    })
}

fn explicit(ops: &[Operator; 2], coefs: &[Vec<(f64, f64)>; 2], zstar: &[f64]) -> Result<(Solution, f64)> {
    let n = zstar.len();
    let s1 = centred(&ops[0].dense(&coefs[0]));
    let s2 = centred(&ops[1].dense(&coefs[1]));
    let p12 = s1.matmul(&s2);
    let norm = spectral_norm(&p12, 1000, 1e-12);
    if !(norm < 1.0) {
        return Err(Error::domain(alloc::format!(
            "explicit backfitting needs ‖S1*S2*‖ < 1, estimated {norm}"
        )));
    }
    let eye = Matrix::identity(n);
    let w1 = eye.sub(&eye.sub(&p12).lu()?.solve_matrix(&eye.sub(&s1)));
    let w2 = eye.sub(&eye.sub(&s2.matmul(&s1)).lu()?.solve_matrix(&eye.sub(&s2)));
    let g = [w1.mul_vec(zstar), w2.mul_vec(zstar)];
    Ok((finish(ops, coefs, zstar, None, g, 0, 0.0), norm))
}

/// Spectral norm estimate of `S₁*S₂*`, the contraction factor of backfitting.
pub fn contraction_norm(x1: &[f64], x2: &[f64], kernel: &Kernel, h: &Bandwidths) -> Result<f64> {
    let ops = [Operator::new(x1, kernel, h.as_slice()[0]), Operator::new(x2, kernel, h.as_slice()[1])];
    let s1 = centred(&ops[0].dense(&ops[0].coefficients(None)?));
    let s2 = centred(&ops[1].dense(&ops[1].coefficients(None)?));
    Ok(spectral_norm(&s1.matmul(&s2), 1000, 1e-12))
}

fn check(x1: &[f64], x2: &[f64], z: &[f64], h: &Bandwidths) -> Result<()> {
    if h.len() != 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            got: h.len(),
        });
    }
    check_inputs(x1, z, h.as_slice()[0], 5)?;
    check_inputs(x2, z, h.as_slice()[1], 5)
}

/// Classical backfitting fit at the observations.
pub fn cbs_fit(
    x1: &[f64],
    x2: &[f64],
    z: &[f64],
    kernel: &Kernel,
    h: &Bandwidths,
    mode: CbsMode,
) -> Result<SmootherFit> {
    check(x1, x2, z, h)?;
    let n = z.len();
    let ops = [Operator::new(x1, kernel, h.as_slice()[0]), Operator::new(x2, kernel, h.as_slice()[1])];
    let coefs = [ops[0].coefficients(None)?, ops[1].coefficients(None)?];
    let zbar = super::mean(z);
    let zstar: Vec<f64> = z.iter().map(|v| v - zbar).collect();
    let (sol, spectral) = match mode {
        CbsMode::Iterative => (backfit(&ops, &coefs, &zstar, None, [vec![0.0; n], vec![0.0; n]])?, None),
        CbsMode::Explicit => {
            let (s, norm) = explicit(&ops, &coefs, &zstar)?;
            (s, Some(norm))
        }
    };
    let fitted = (0..n).map(|i| zbar + sol.g[0][i] + sol.g[1][i]).collect();
    Ok(SmootherFit {
        method: Method::Cbs,
        kernel: kernel.clone(),
        bandwidths: h.clone(),
        fitted,
        components: vec![sol.g[0].clone(), sol.g[1].clone()],
        intercept: zbar,
        ranges: vec![range(x1), range(x2)],
        diagnostics: Diagnostics {
            iterations: sol.sweeps,
            update_norm: sol.update_norm,
            spectral_norm: spectral,
        },
        evaluator: Evaluator::Cbs {
            designs: [SortedDesign::new(x1), SortedDesign::new(x2)],
            partial: sol.partial,
            offset: sol.offset,
        },
    })
}

/// Leave-one-out residuals `Z_i - ĝ₋ᵢ(X_i)`, each from an exact refit on the
/// other `n - 1` observations, warm-started at the full-sample solution.
pub fn loo_residuals(x1: &[f64], x2: &[f64], z: &[f64], kernel: &Kernel, h: &Bandwidths) -> Result<Vec<f64>> {
    check(x1, x2, z, h)?;
    let n = z.len();
    let ops = [Operator::new(x1, kernel, h.as_slice()[0]), Operator::new(x2, kernel, h.as_slice()[1])];
    let coefs = [ops[0].coefficients(None)?, ops[1].coefficients(None)?];
    let total: f64 = z.iter().sum();
    let zbar = total / n as f64;
    let zstar: Vec<f64> = z.iter().map(|v| v - zbar).collect();
    let full = backfit(&ops, &coefs, &zstar, None, [vec![0.0; n], vec![0.0; n]])?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let coefs_i = [ops[0].coefficients(Some(i))?, ops[1].coefficients(Some(i))?];
        let zbar_i = (total - z[i]) / (n - 1) as f64;
        let zstar_i: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(k, v)| if k == i { 0.0 } else { v - zbar_i })
            .collect();
        let mut init = [full.g[0].clone(), full.g[1].clone()];
        init[0][i] = 0.0;
        init[1][i] = 0.0;
        let sol = backfit(&ops, &coefs_i, &zstar_i, Some(i), init)?;
        out.push(z[i] - (zbar_i + sol.at_skip));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
        let z = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| a * a - 0.5 * b.ln() + 0.3 * (rng.random::<f64>() - 0.5))
            .collect();
        (x1, x2, z)
    }

    #[test]
    fn constant_response() {
        let (x1, x2, _) = data(40, 1);
        let z = vec![2.5; 40];
        let h = Bandwidths::new(vec![0.3, 0.3]).unwrap();
        let fit = cbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, CbsMode::Iterative).unwrap();
        assert!(fit.fitted.iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert!(fit.components.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn explicit_matches_iterative() {
        let (x1, x2, z) = data(60, 2);
        let h = Bandwidths::new(vec![0.3, 0.4]).unwrap();
        let a = cbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, CbsMode::Iterative).unwrap();
        let b = cbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, CbsMode::Explicit).unwrap();
        for (u, v) in a.fitted.iter().zip(&b.fitted) {
            assert!((u - v).abs() < 1e-8);
        }
        assert!(b.diagnostics.spectral_norm.unwrap() < 1.0);
        let mean1: f64 = a.components[0].iter().sum::<f64>() / 60.0;
        assert!(mean1.abs() < 1e-8);
    }

    #[test]
    fn evaluator_reproduces_fitted_values() {
        let (x1, x2, z) = data(50, 3);
        let h = Bandwidths::new(vec![0.35, 0.35]).unwrap();
        let fit = cbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, CbsMode::Iterative).unwrap();
        for i in 0..50 {
            let g = fit.predict(&[x1[i], x2[i]]).unwrap();
            assert!((g - fit.fitted[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn loo_matches_naive_refits() {
        let (x1, x2, z) = data(30, 4);
        let h = Bandwidths::new(vec![0.45, 0.5]).unwrap();
        let fast = loo_residuals(&x1, &x2, &z, &Kernel::Epanechnikov, &h).unwrap();
        for i in 0..30 {
            let keep = |v: &Vec<f64>| -> Vec<f64> { (0..30).filter(|&k| k != i).map(|k| v[k]).collect() };
            let fit = cbs_fit(&keep(&x1), &keep(&x2), &keep(&z), &Kernel::Epanechnikov, &h, CbsMode::Iterative)
                .unwrap();
            // X_i may fall outside the reduced sample's range, so evaluate the components directly
            let mut g = fit.intercept;
            if let Evaluator::Cbs { designs, partial, offset } = &fit.evaluator {
                for (j, x) in [x1[i], x2[i]].into_iter().enumerate() {
                    let m = super::super::local_linear::moments(&designs[j], &Kernel::Epanechnikov, h.as_slice()[j], x, &partial[j], None);
                    g += m.estimate(x).unwrap() - offset[j];
                }
            }
            assert!((fast[i] - (z[i] - g)).abs() < 1e-8, "i={i}: {} vs {}", fast[i], z[i] - g);
        }
    }
}
