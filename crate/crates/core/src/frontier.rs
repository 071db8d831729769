//! Frontier estimation for `Y = f(X) R`, `R ~ M(p)`.
//!
//! Taking logs gives `Z = -ln Y = g(X) + ε` with `g = 3/(2p) - ln f` and
//! centred errors of variance `3/(2p²)`. The steps are:
//!
//! 1. fit `g` nonparametrically;
//! 2. `p̂ = sqrt(3n / (2 Σ ε̂²))` from the residuals;
//! 3. `f̂(x) = exp(3/(2p̂) - ĝ(x))`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when num-traits is built with std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothers::{
    self, cv_bandwidth, default_search_grid, sbs, Bandwidths, CvOutcome, Kernel, Method,
    SmootherFit, SmootherSettings,
};

pub const MIN_OBSERVATIONS: usize = 10;
/// Points per axis of the component grids in a [`ModelSnapshot`].
pub const SNAPSHOT_GRID: usize = 101;
pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;
/// Residual RMS, relative to `max(1, max |Z|)`, treated as an exact fit.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-12;

/// Outputs `Y > 0`, inputs `X` stored by column, and `Z = -ln Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    z: Vec<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if y.len() < MIN_OBSERVATIONS {
            return Err(Error::domain(format!(
                "need at least {MIN_OBSERVATIONS} observations, got {}",
                y.len()
            )));
        }
        if !(1..=2).contains(&columns.len()) {
            return Err(Error::domain(format!("need 1 or 2 input columns, got {}", columns.len())));
        }
        for c in &columns {
            if c.len() != y.len() {
                return Err(Error::LengthMismatch {
                    expected: y.len(),
                    got: c.len(),
                });
            }
            if let Some((i, v)) = c.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::domain(format!("input value {v} at observation {i} is not finite")));
            }
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("output must be finite and > 0, got {v} at observation {i}")));
        }
        let z = y.iter().map(|v| -v.ln()).collect();
        Ok(Self { y, x: columns, z })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j]
    }

    pub fn columns(&self) -> Vec<&[f64]> {
        self.x.iter().map(Vec::as_slice).collect()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.x.iter().map(|c| c[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    /// Leave-one-out cross-validation over `grid`, or the default grid.
    Cv { grid: Option<Vec<Bandwidths>> },
    Fixed(Bandwidths),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierConfig {
    pub smoother: SmootherSettings,
    pub bandwidth: BandwidthChoice,
}

impl FrontierConfig {
    pub fn new(method: Method, kernel: Kernel, bandwidth: BandwidthChoice) -> Self {
        Self {
            smoother: SmootherSettings::new(method, kernel),
            bandwidth,
        }
    }

    pub fn method(&self) -> Method {
        self.smoother.method
    }
}

/// A fitted frontier with the artifacts of all three steps.
#[derive(Debug, Clone)]
pub struct FrontierModel {
    pub fit: SmootherFit,
    pub cv: Option<CvOutcome>,
    pub p_hat: f64,
    /// `ε̂_i = Z_i - ĝ(X_i)`.
    pub residuals: Vec<f64>,
    /// `f̂(X_i)`.
    pub frontier_at_obs: Vec<f64>,
    /// `Y_i / f̂(X_i)`.
    pub scores: Vec<f64>,
}

/// Efficiency scores with the number exceeding 1, which are kept as is.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub scores: Vec<f64>,
    pub above_one: usize,
}

/// `sqrt(3n / (2 Σ e²))`: the infeasible `p̃` when given the true errors and
/// `p̂` when given residuals.
pub fn fit_p_oracle(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::domain("no residuals"));
    }
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    if !ss.is_finite() {
        return Err(Error::domain("residuals must be finite"));
    }
    if ss == 0.0 {
        return Err(Error::ZeroResiduals);
    }
    Ok((3.0 * residuals.len() as f64 / (2.0 * ss)).sqrt())
}

/// `exp(3/(2p̂) - g)`.
pub fn plug_in(p_hat: f64, g: f64) -> f64 {
    (1.5 / p_hat - g).exp()
}

pub fn fit_frontier(data: &Dataset, config: &FrontierConfig) -> Result<FrontierModel> {
    let method = config.method();
    if data.dimension() != method.dimension() {
        return Err(Error::domain(format!(
            "method {} needs {} input column(s), the data has {}",
            method.name(),
            method.dimension(),
            data.dimension()
        )));
    }
    let columns = data.columns();
    let (h, cv) = match &config.bandwidth {
        BandwidthChoice::Fixed(h) => (h.clone(), None),
        BandwidthChoice::Cv { grid } => {
            let default;
            let grid = match grid {
                Some(g) => g.as_slice(),
                None => {
                    default = default_search_grid(&columns);
                    default.as_slice()
                }
            };
            let out = cv_bandwidth(&columns, data.z(), &config.smoother, grid)?;
            (out.best.clone(), Some(out))
        }
    };
    let fit = smoothers::fit(&columns, data.z(), &config.smoother, &h)?;
    let residuals: Vec<f64> = data.z().iter().zip(&fit.fitted).map(|(z, g)| z - g).collect();
    // a perfect fit leaves only rounding noise in the residuals
    let scale = data.z().iter().fold(1.0_f64, |m, z| m.max(z.abs()));
    let rms = (residuals.iter().map(|e| e * e).sum::<f64>() / residuals.len() as f64).sqrt();
    if rms <= ZERO_RESIDUAL_TOL * scale {
        return Err(Error::ZeroResiduals);
    }
    let p_hat = fit_p_oracle(&residuals)?;
    let frontier_at_obs: Vec<f64> = fit.fitted.iter().map(|&g| plug_in(p_hat, g)).collect();
    let scores = data.y().iter().zip(&frontier_at_obs).map(|(y, f)| y / f).collect();
    Ok(FrontierModel {
        fit,
        cv,
        p_hat,
        residuals,
        frontier_at_obs,
        scores,
    })
}

pub fn efficiency_scores(model: &FrontierModel) -> EfficiencyReport {
    EfficiencyReport {
        scores: model.scores.clone(),
        above_one: model.scores.iter().filter(|&&s| s > 1.0).count(),
    }
}

impl FrontierModel {
    /// `3/(2p̂)`, the estimated intercept of `g`.
    pub fn g0(&self) -> f64 {
        1.5 / self.p_hat
    }

    pub fn g(&self, x: &[f64]) -> Result<f64> {
        self.fit.predict(x)
    }

    /// `f̂(x)`; `x` must lie within the training ranges.
    pub fn frontier(&self, x: &[f64]) -> Result<f64> {
        Ok(plug_in(self.p_hat, self.fit.predict(x)?))
    }

    pub fn bandwidths(&self) -> &Bandwidths {
        &self.fit.bandwidths
    }

    /// Grid representation sufficient to re-evaluate `f̂` without refitting.
    pub fn snapshot(&self) -> Result<ModelSnapshot> {
        let components = (0..self.fit.dimension())
            .map(|j| {
                let (x, g) = self.fit.component_grid(j, SNAPSHOT_GRID)?;
                Ok(ComponentGrid { x, g })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            method: self.fit.method,
            kernel: self.fit.kernel.clone(),
            bandwidths: self.fit.bandwidths.clone(),
            p_hat: self.p_hat,
            intercept: self.fit.intercept,
            ranges: self.fit.ranges.clone(),
            components,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentGrid {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

/// Serializable frontier: `ĝ(x) = intercept + Σ_j ĝ_j(x_j)` with each
/// component interpolated linearly on its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub schema_version: u32,
    pub method: Method,
    pub kernel: Kernel,
    pub bandwidths: Bandwidths,
    pub p_hat: f64,
    pub intercept: f64,
    pub ranges: Vec<(f64, f64)>,
    pub components: Vec<ComponentGrid>,
}

impl ModelSnapshot {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(Error::domain(format!(
                "unsupported schema_version {}, expected {SNAPSHOT_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.components.len() != self.ranges.len() || self.components.len() != self.method.dimension() {
            return Err(Error::domain("component count does not match the method"));
        }
        for c in &self.components {
            if c.x.len() != c.g.len() || c.x.len() < 2 {
                return Err(Error::domain("malformed component grid"));
            }
        }
        if !(self.p_hat.is_finite() && self.p_hat > 0.0) {
            return Err(Error::domain("p_hat must be finite and > 0"));
        }
        Ok(())
    }

    pub fn g(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.components.len() {
            return Err(Error::LengthMismatch {
                expected: self.components.len(),
                got: x.len(),
            });
        }
        let mut total = self.intercept;
        for (axis, (&v, c)) in x.iter().zip(&self.components).enumerate() {
            let (lo, hi) = self.ranges[axis];
            if !(v >= lo && v <= hi) {
                return Err(Error::OutOfDomain { axis, value: v, lo, hi });
            }
            total += sbs::interpolate(&c.g, (v - lo) / (hi - lo));
        }
        Ok(total)
    }

    pub fn frontier(&self, x: &[f64]) -> Result<f64> {
        Ok(plug_in(self.p_hat, self.g(x)?))
    }
}

/// Summary label of a fitted model's smoother, e.g. for reports.
pub fn describe(model: &FrontierModel) -> String {
    format!(
        "{} {} h={:?} p_hat={}",
        model.fit.method.name(),
        model.fit.kernel.name(),
        model.fit.bandwidths.as_slice(),
        model.p_hat
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn p_oracle_arithmetic() {
        assert!((fit_p_oracle(&[1.0; 7]).unwrap() - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((fit_p_oracle(&[1.0, 1.0, 2.0]).unwrap() - 0.75f64.sqrt()).abs() < 1e-15);
        let e = [0.3, -0.2, 0.5, 0.1];
        let scaled: Vec<f64> = e.iter().map(|v| v * 4.0).collect();
        assert!((fit_p_oracle(&scaled).unwrap() - fit_p_oracle(&e).unwrap() / 4.0).abs() < 1e-14);
        assert_eq!(fit_p_oracle(&[0.0, 0.0]).unwrap_err(), Error::ZeroResiduals);
    }

    #[test]
    fn plug_in_vanishing_exponent() {
        assert_eq!(plug_in(2.0, 0.75), 1.0);
    }

    #[test]
    fn dataset_validation() {
        let x = vec![(0..10).map(|i| i as f64).collect::<Vec<_>>()];
        assert!(Dataset::new(vec![1.0; 9], vec![vec![0.0; 9]]).is_err());
        let mut y = vec![1.0; 10];
        y[3] = 0.0;
        assert!(Dataset::new(y, x.clone()).is_err());
        let d = Dataset::new(vec![2.0; 10], x).unwrap();
        assert_eq!(d.z()[0], -(2.0f64.ln()));
    }

    #[test]
    fn constant_output_gives_zero_residuals() {
        let x: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 / 19.0).collect();
        let d = Dataset::new(vec![0.7; 20], vec![x]).unwrap();
        let cfg = FrontierConfig::new(
            Method::Loclin,
            Kernel::Epanechnikov,
            BandwidthChoice::Fixed(Bandwidths::single(0.3).unwrap()),
        );
        let err = fit_frontier(&d, &cfg).unwrap_err();
        assert_eq!(err, Error::ZeroResiduals);
    }
}
