//! Nadaraya-Watson smooth backfitting for two covariates.
//!
//! Covariates are mapped affinely onto [0, 1] and every function is carried
//! on a uniform grid of that interval, with integrals done by the trapezoid
//! rule. The boundary-normalised kernel is
//! `κ_j(x, X_ij) = K_h(x - X_ij) / ∫_0^1 K_h(x - w) dw`.
//!
//! Each sweep sets
//! `ĝ_j(x) = g̃_j(x) - ∫ ĝ_k(v) f̂(x, v) / f̂_j(x) dv - Z̄`
//! with `g̃_j` the marginal Nadaraya-Watson smoother, then subtracts the
//! `f̂_j`-weighted mean so that `∫ ĝ_j f̂_j = 0`.

use alloc::vec;
use alloc::vec::Vec;

use super::local_linear::check_inputs;
use super::{range, Bandwidths, Diagnostics, Evaluator, Kernel, Method, SmootherFit};
use crate::error::{Error, Result};
use crate::quad::trapezoid_weights;

pub const MAX_SWEEPS: usize = 500;
/// Sup-norm of the grid update at which sweeping stops.
pub const TOL: f64 = 1e-8;
pub const DENSITY_FLOOR: f64 = 1e-12;
pub const DEFAULT_GRID: usize = 101;
pub const DEFAULT_CV_GRID: usize = 51;
pub const MIN_GRID: usize = 32;

/// Kernel weights of every observation at every grid point.
pub(crate) struct Kernels {
    g: usize,
    n: usize,
    omega: Vec<f64>,
    /// `kappa[j][a * n + i] = κ_j(u_a, U_ij)`.
    kappa: [Vec<f64>; 2],
    u: [Vec<f64>; 2],
    z: Vec<f64>,
}

/// Sums over the active observations. Dividing by `count` gives the density
/// estimates; `count` cancels in every ratio used by a sweep.
#[derive(Clone)]
pub(crate) struct Sums {
    count: f64,
    zsum: f64,
    dens: [Vec<f64>; 2],
    num: [Vec<f64>; 2],
    /// `joint[a * g + b] = Σ κ₁(u_a, ·) κ₂(u_b, ·)`.
    joint: Vec<f64>,
}

pub(crate) fn grid_point(a: usize, g: usize) -> f64 {
    if a + 1 == g {
        1.0
    } else {
        a as f64 / (g - 1) as f64
    }
}

/// Linear interpolation of grid values at `u ∈ [0, 1]`.
pub(crate) fn interpolate(values: &[f64], u: f64) -> f64 {
    let g = values.len();
    let pos = (u * (g - 1) as f64).clamp(0.0, (g - 1) as f64);
    let k = (pos as usize).min(g - 2);
    let t = pos - k as f64;
    values[k] + t * (values[k + 1] - values[k])
}

impl Kernels {
    /// `u` are the covariates already on [0, 1] and `h` the matching bandwidths.
    pub(crate) fn new(u: [&[f64]; 2], z: &[f64], kernel: &Kernel, h: [f64; 2], g: usize) -> Result<Self> {
        let n = z.len();
        let mut kappa = [vec![0.0; g * n], vec![0.0; g * n]];
        for j in 0..2 {
            let hj = h[j];
            for a in 0..g {
                let x = grid_point(a, g);
                let mass = kernel.integral((x - 1.0) / hj, x / hj);
                if !(mass > 0.0) {
                    return Err(Error::DegenerateDensity {
                        axis: j,
                        point: x,
                        value: 0.0,
                    });
                }
                for i in 0..n {
                    kappa[j][a * n + i] = kernel.eval((x - u[j][i]) / hj) / (hj * mass);
                }
            }
        }
        Ok(Self {
            g,
            n,
            omega: trapezoid_weights(g, 1.0 / (g - 1) as f64),
            kappa,
            u: [u[0].to_vec(), u[1].to_vec()],
            z: z.to_vec(),
        })
    }

    pub(crate) fn sums(&self) -> Sums {
        let (g, n) = (self.g, self.n);
        let mut dens = [vec![0.0; g], vec![0.0; g]];
        let mut num = [vec![0.0; g], vec![0.0; g]];
        for j in 0..2 {
            for a in 0..g {
                let row = &self.kappa[j][a * n..(a + 1) * n];
                dens[j][a] = row.iter().sum();
                num[j][a] = row.iter().zip(&self.z).map(|(k, z)| k * z).sum();
            }
        }
        let mut joint = vec![0.0; g * g];
        let mut nz1 = Vec::with_capacity(g);
        let mut nz2 = Vec::with_capacity(g);
        for i in 0..n {
            self.nonzero(0, i, &mut nz1);
            self.nonzero(1, i, &mut nz2);
            for &(a, k1) in &nz1 {
                let row = &mut joint[a * g..(a + 1) * g];
                for &(b, k2) in &nz2 {
                    row[b] += k1 * k2;
                }
            }
        }
        Sums {
            count: n as f64,
            zsum: self.z.iter().sum(),
            dens,
            num,
            joint,
        }
    }

    fn nonzero(&self, j: usize, i: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        for a in 0..self.g {
            let k = self.kappa[j][a * self.n + i];
            if k != 0.0 {
                out.push((a, k));
            }
        }
    }

    /// Sums with observation `i` removed.
    pub(crate) fn leave_out(&self, full: &Sums, i: usize) -> Sums {
        let (g, n) = (self.g, self.n);
        let mut s = full.clone();
        s.count -= 1.0;
        s.zsum -= self.z[i];
        for j in 0..2 {
            for a in 0..g {
                let k = self.kappa[j][a * n + i];
                s.dens[j][a] -= k;
                s.num[j][a] -= k * self.z[i];
            }
        }
        let mut nz1 = Vec::new();
        let mut nz2 = Vec::new();
        self.nonzero(0, i, &mut nz1);
        self.nonzero(1, i, &mut nz2);
        for &(a, k1) in &nz1 {
            for &(b, k2) in &nz2 {
                s.joint[a * g + b] -= k1 * k2;
            }
        }
        s
    }

    /// Fails if either marginal density estimate drops below the floor.
    pub(crate) fn check_density(&self, s: &Sums) -> Result<()> {
        for j in 0..2 {
            for a in 0..self.g {
                let value = s.dens[j][a] / s.count;
                if !(value >= DENSITY_FLOOR) {
                    return Err(Error::DegenerateDensity {
                        axis: j,
                        point: grid_point(a, self.g),
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    fn recentre(&self, values: &mut [f64], dens: &[f64]) {
        let (mut num, mut den) = (0.0, 0.0);
        for a in 0..self.g {
            num += self.omega[a] * values[a] * dens[a];
            den += self.omega[a] * dens[a];
        }
        let c = num / den;
        values.iter_mut().for_each(|v| *v -= c);
    }

    /// One backfitting sweep (component 1, then 2); returns the sup-norm update.
    pub(crate) fn sweep(&self, s: &Sums, comps: &mut [Vec<f64>; 2]) -> f64 {
        let g = self.g;
        let zbar = s.zsum / s.count;
        let mut next = vec![0.0; g];
        let mut delta: f64 = 0.0;

        for a in 0..g {
            let row = &s.joint[a * g..(a + 1) * g];
            let cross: f64 = (0..g).map(|b| self.omega[b] * comps[1][b] * row[b]).sum();
            next[a] = (s.num[0][a] - cross) / s.dens[0][a] - zbar;
        }
        self.recentre(&mut next, &s.dens[0]);
        for (old, new) in comps[0].iter_mut().zip(&next) {
            delta = delta.max((new - *old).abs());
            *old = *new;
        }

        let mut cross = vec![0.0; g];
        for a in 0..g {
            let w = self.omega[a] * comps[0][a];
            let row = &s.joint[a * g..(a + 1) * g];
            for (c, j) in cross.iter_mut().zip(row) {
                *c += w * j;
            }
        }
        for b in 0..g {
            next[b] = (s.num[1][b] - cross[b]) / s.dens[1][b] - zbar;
        }
        self.recentre(&mut next, &s.dens[1]);
        for (old, new) in comps[1].iter_mut().zip(&next) {
            delta = delta.max((new - *old).abs());
            *old = *new;
        }
        delta
    }

    pub(crate) fn solve(&self, s: &Sums, init: [Vec<f64>; 2]) -> Result<([Vec<f64>; 2], usize, f64)> {
        let mut comps = init;
        for sweep in 1..=MAX_SWEEPS {
            let delta = self.sweep(s, &mut comps);
            if delta < TOL {
                return Ok((comps, sweep, delta));
            }
        }
        Err(Error::NoConvergence {
            what: "smooth backfitting",
            iterations: MAX_SWEEPS,
        })
    }

    fn zeros(&self) -> [Vec<f64>; 2] {
        [vec![0.0; self.g], vec![0.0; self.g]]
    }
}

struct Scaled {
    u: [Vec<f64>; 2],
    h: [f64; 2],
    ranges: [(f64, f64); 2],
}

fn rescale(x1: &[f64], x2: &[f64], z: &[f64], h: &Bandwidths, grid_size: usize) -> Result<Scaled> {
    if h.len() != 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            got: h.len(),
        });
    }
    check_inputs(x1, z, h.as_slice()[0], 5)?;
    check_inputs(x2, z, h.as_slice()[1], 5)?;
    if grid_size < MIN_GRID {
        return Err(Error::domain(alloc::format!("grid size must be at least {MIN_GRID}, got {grid_size}")));
    }
    let ranges = [range(x1), range(x2)];
    let mut u = [Vec::new(), Vec::new()];
    let mut hs = [0.0; 2];
    for (j, x) in [x1, x2].into_iter().enumerate() {
        let (lo, hi) = ranges[j];
        if !(hi > lo) {
            return Err(Error::domain(alloc::format!("covariate {j} is constant")));
        }
        u[j] = x.iter().map(|v| (v - lo) / (hi - lo)).collect();
        hs[j] = h.as_slice()[j] / (hi - lo);
    }
    Ok(Scaled { u, h: hs, ranges })
}

fn on_original_scale(err: Error, ranges: &[(f64, f64); 2]) -> Error {
    match err {
        Error::DegenerateDensity { axis, point, value } => {
            let (lo, hi) = ranges[axis];
            Error::DegenerateDensity {
                axis,
                point: lo + (hi - lo) * point,
                value,
            }
        }
        e => e,
    }
}

/// Smooth backfitting fit on a `grid_size` grid per axis.
pub fn sbs_fit(
    x1: &[f64],
    x2: &[f64],
    z: &[f64],
    kernel: &Kernel,
    h: &Bandwidths,
    grid_size: usize,
) -> Result<SmootherFit> {
    let sc = rescale(x1, x2, z, h, grid_size)?;
    let run = || -> Result<_> {
        let k = Kernels::new([&sc.u[0], &sc.u[1]], z, kernel, sc.h, grid_size)?;
        let sums = k.sums();
        k.check_density(&sums)?;
        let (comps, sweeps, delta) = k.solve(&sums, k.zeros())?;
        Ok((sums.zsum / sums.count, comps, sweeps, delta))
    };
    let (zbar, grids, sweeps, delta) = run().map_err(|e| on_original_scale(e, &sc.ranges))?;
    let components: Vec<Vec<f64>> = (0..2)
        .map(|j| sc.u[j].iter().map(|&u| interpolate(&grids[j], u)).collect())
        .collect();
    let fitted = (0..z.len()).map(|i| zbar + components[0][i] + components[1][i]).collect();
    Ok(SmootherFit {
        method: Method::Sbs,
        kernel: kernel.clone(),
        bandwidths: h.clone(),
        fitted,
        components,
        intercept: zbar,
        ranges: sc.ranges.to_vec(),
        diagnostics: Diagnostics {
            iterations: sweeps,
            update_norm: delta,
            spectral_norm: None,
        },
        evaluator: Evaluator::Sbs { grids },
    })
}

/// Leave-one-out residuals. The affine map to [0, 1] and the grid stay those
/// of the full sample; each refit downdates the kernel sums and warm-starts
/// from the full-sample solution.
pub fn loo_residuals(
    x1: &[f64],
    x2: &[f64],
    z: &[f64],
    kernel: &Kernel,
    h: &Bandwidths,
    grid_size: usize,
) -> Result<Vec<f64>> {
    let sc = rescale(x1, x2, z, h, grid_size)?;
    let run = || -> Result<Vec<f64>> {
        let k = Kernels::new([&sc.u[0], &sc.u[1]], z, kernel, sc.h, grid_size)?;
        let full = k.sums();
        k.check_density(&full)?;
        let (start, _, _) = k.solve(&full, k.zeros())?;
        (0..z.len())
            .map(|i| {
                let s = k.leave_out(&full, i);
                k.check_density(&s)?;
                let (c, _, _) = k.solve(&s, start.clone())?;
                let pred = s.zsum / s.count + interpolate(&c[0], k.u[0][i]) + interpolate(&c[1], k.u[1][i]);
                Ok(z[i] - pred)
            })
            .collect()
    };
    run().map_err(|e| on_original_scale(e, &sc.ranges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let z = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| (3.0 * a).sin() + b * b + 0.2 * (rng.random::<f64>() - 0.5))
            .collect();
        (x1, x2, z)
    }

    #[test]
    fn one_sweep_matches_hand_computation() {
        let u1 = [0.1, 0.4, 0.5, 0.9];
        let u2 = [0.7, 0.2, 0.6, 0.3];
        let z = [1.0, 2.0, -1.0, 0.5];
        let h = [0.6, 0.8];
        let kern = Kernel::Epanechnikov;
        let k = Kernels::new([&u1, &u2], &z, &kern, h, 3).unwrap();
        let s = k.sums();
        let mut comps = k.zeros();
        k.sweep(&s, &mut comps);

        let grid = [0.0, 0.5, 1.0];
        let omega = [0.25, 0.5, 0.25];
        let kap = |j: usize, x: f64, u: f64| {
            let hj: f64 = h[j];
            // boundary mass by quadrature
            let (a, b) = ((x - hj).max(0.0), (x + hj).min(1.0));
            let mass = crate::quad::tanh_sinh(|w| kern.eval((x - w) / hj) / hj, a, b, 1e-14).unwrap();
            kern.eval((x - u) / hj) / hj / mass
        };
        let us = [&u1, &u2];
        let zbar = 2.5 / 4.0;
        let f = |j: usize, x: f64| (0..4).map(|i| kap(j, x, us[j][i])).sum::<f64>() / 4.0;
        let nw = |j: usize, x: f64| (0..4).map(|i| kap(j, x, us[j][i]) * z[i]).sum::<f64>() / (4.0 * f(j, x));
        let joint = |x: f64, y: f64| (0..4).map(|i| kap(0, x, u1[i]) * kap(1, y, u2[i])).sum::<f64>() / 4.0;

        let mut g1: Vec<f64> = grid.iter().map(|&x| nw(0, x) - zbar).collect();
        let c1 = (0..3).map(|a| omega[a] * g1[a] * f(0, grid[a])).sum::<f64>()
            / (0..3).map(|a| omega[a] * f(0, grid[a])).sum::<f64>();
        g1.iter_mut().for_each(|v| *v -= c1);
        let mut g2: Vec<f64> = grid
            .iter()
            .map(|&y| {
                let cross: f64 = (0..3).map(|a| omega[a] * g1[a] * joint(grid[a], y)).sum();
                nw(1, y) - cross / f(1, y) - zbar
            })
            .collect();
        let c2 = (0..3).map(|a| omega[a] * g2[a] * f(1, grid[a])).sum::<f64>()
            / (0..3).map(|a| omega[a] * f(1, grid[a])).sum::<f64>();
        g2.iter_mut().for_each(|v| *v -= c2);

        for a in 0..3 {
            assert!((comps[0][a] - g1[a]).abs() < 1e-12, "g1[{a}]");
            assert!((comps[1][a] - g2[a]).abs() < 1e-12, "g2[{a}]");
        }
    }

    #[test]
    fn constant_response_projects_to_intercept() {
        let (x1, x2, _) = data(60, 5);
        let z = vec![-1.25; 60];
        let h = Bandwidths::new(vec![0.3, 0.3]).unwrap();
        let fit = sbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, 41).unwrap();
        assert!((fit.intercept + 1.25).abs() < 1e-12);
        assert!(fit.fitted.iter().all(|v| (v + 1.25).abs() < 1e-8));
    }

    #[test]
    fn components_are_centred() {
        let (x1, x2, z) = data(80, 6);
        let kern = Kernel::Epanechnikov;
        let sc = rescale(&x1, &x2, &z, &Bandwidths::new(vec![0.25, 0.3]).unwrap(), 51).unwrap();
        let k = Kernels::new([&sc.u[0], &sc.u[1]], &z, &kern, sc.h, 51).unwrap();
        let s = k.sums();
        let (c, _, _) = k.solve(&s, k.zeros()).unwrap();
        for j in 0..2 {
            let integral: f64 = (0..51).map(|a| k.omega[a] * c[j][a] * s.dens[j][a] / s.count).sum();
            assert!(integral.abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_density_detected() {
        let x1 = [0.0, 0.01, 0.02, 0.03, 1.0, 0.5];
        let x2 = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let z = [1.0; 6];
        let h = Bandwidths::new(vec![0.05, 0.5]).unwrap();
        let err = sbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, 51).unwrap_err();
        assert!(matches!(err, Error::DegenerateDensity { axis: 0, .. }));
    }

    #[test]
    fn loo_matches_naive_refits() {
        let (x1, x2, z) = data(25, 7);
        let kern = Kernel::Epanechnikov;
        let h = Bandwidths::new(vec![0.4, 0.45]).unwrap();
        let fast = loo_residuals(&x1, &x2, &z, &kern, &h, 41).unwrap();
        let sc = rescale(&x1, &x2, &z, &h, 41).unwrap();
        for i in 0..25 {
            let keep = |v: &[f64]| -> Vec<f64> { (0..25).filter(|&k| k != i).map(|k| v[k]).collect() };
            let (u1, u2, zs) = (keep(&sc.u[0]), keep(&sc.u[1]), keep(&z));
            let k = Kernels::new([&u1, &u2], &zs, &kern, sc.h, 41).unwrap();
            let s = k.sums();
            let (c, _, _) = k.solve(&s, k.zeros()).unwrap();
            let pred = s.zsum / s.count + interpolate(&c[0], sc.u[0][i]) + interpolate(&c[1], sc.u[1][i]);
            assert!((fast[i] - (z[i] - pred)).abs() < 1e-7, "i={i}");
        }
    }
}
