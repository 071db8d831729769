//! Leave-one-out bandwidth selection.

use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when num-traits is built with std
use num_traits::Float;

use super::{cbs, check_shape, local_linear, sbs, Bandwidths, Method, SmootherSettings};
use crate::error::{Error, Result};

/// Candidates in the default one-covariate search grid.
pub const GRID_POINTS_1D: usize = 20;
/// Candidates per axis in the default two-covariate search grid.
pub const GRID_POINTS_2D: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CvCandidate {
    pub bandwidths: Bandwidths,
    /// `CV(h)`, or `None` if some leave-one-out fit failed.
    pub score: Option<f64>,
    pub error: Option<Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: Bandwidths,
    pub best_score: f64,
    pub candidates: Vec<CvCandidate>,
}

impl CvOutcome {
    pub fn failures(&self) -> usize {
        self.candidates.iter().filter(|c| c.score.is_none()).count()
    }
}

/// `CV(h) = n⁻¹ Σ (Z_i - ĝ₋ᵢ(X_i))²`, accumulated in index order.
pub fn cv_score(columns: &[&[f64]], z: &[f64], settings: &SmootherSettings, h: &Bandwidths) -> Result<f64> {
    check_shape(columns, z, settings.method, h)?;
    let k = &settings.kernel;
    let resid = match settings.method {
        Method::Loclin => local_linear::loo_residuals(columns[0], z, k, h.as_slice()[0])?,
        Method::Cbs => cbs::loo_residuals(columns[0], columns[1], z, k, h)?,
        Method::Sbs => sbs::loo_residuals(columns[0], columns[1], z, k, h, settings.sbs_cv_grid)?,
    };
    Ok(resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64)
}

/// Minimises [`cv_score`] over `grid`. Failing candidates are recorded and
/// skipped; exact ties go to the larger bandwidth sum.
pub fn cv_bandwidth(
    columns: &[&[f64]],
    z: &[f64],
    settings: &SmootherSettings,
    grid: &[Bandwidths],
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::domain("bandwidth search grid is empty"));
    }
    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, h) in grid.iter().enumerate() {
        if h.len() != settings.method.dimension() {
            return Err(Error::LengthMismatch {
                expected: settings.method.dimension(),
                got: h.len(),
            });
        }
        match cv_score(columns, z, settings, h) {
            Ok(score) if score.is_finite() => {
                let better = match best {
                    None => true,
                    Some((b, s)) => score < s || (score == s && h.sum() > grid[b].sum()),
                };
                if better {
                    best = Some((idx, score));
                }
                candidates.push(CvCandidate {
                    bandwidths: h.clone(),
                    score: Some(score),
                    error: None,
                });
            }
            Ok(_) => candidates.push(CvCandidate {
                bandwidths: h.clone(),
                score: None,
                error: Some(Error::Singular("non-finite cross-validation score")),
            }),
            Err(e) if e.is_numerical() => candidates.push(CvCandidate {
                bandwidths: h.clone(),
                score: None,
                error: Some(e),
            }),
            Err(e) => return Err(e),
        }
    }
    let (b, best_score) = best.ok_or(Error::AllCandidatesFailed)?;
    Ok(CvOutcome {
        best: grid[b].clone(),
        best_score,
        candidates,
    })
}

/// `k` values spaced evenly in log scale from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| {
            if i + 1 == k {
                hi
            } else {
                (a + (b - a) * i as f64 / (k - 1) as f64).exp()
            }
        })
        .collect()
}

fn sd(x: &[f64]) -> f64 {
    let m = super::mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Default search grid.
///
/// One covariate: [`GRID_POINTS_1D`] log-spaced values on
/// `[0.1 σ n^{-1/5}, 2 range]`. Two covariates: the cartesian product of
/// [`GRID_POINTS_2D`] log-spaced values per axis on `[0.5 σ_j n^{-1/5}, 2 range_j]`.
pub fn default_search_grid(columns: &[&[f64]]) -> Vec<Bandwidths> {
    let axis = |x: &[f64], lo_factor: f64, k: usize| {
        let n = x.len() as f64;
        let (lo, hi) = super::range(x);
        log_grid(lo_factor * sd(x) * n.powf(-0.2), 2.0 * (hi - lo), k)
    };
    match columns {
        [x] => axis(x, 0.1, GRID_POINTS_1D)
            .into_iter()
            .filter_map(|h| Bandwidths::single(h).ok())
            .collect(),
        _ => {
            let a1 = axis(columns[0], 0.5, GRID_POINTS_2D);
            let a2 = axis(columns[1], 0.5, GRID_POINTS_2D);
            let mut out = Vec::with_capacity(a1.len() * a2.len());
            for &h1 in &a1 {
                for &h2 in &a2 {
                    if let Ok(b) = Bandwidths::new(alloc::vec![h1, h2]) {
                        out.push(b);
                    }
                }
            }
            out
        }
    }
}
