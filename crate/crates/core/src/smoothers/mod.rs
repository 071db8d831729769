//! Kernel regression for the first estimation step.
//!
//! One covariate is handled by the local linear smoother. Two covariates use
//! an additive model fitted either by classical backfitting of local linear
//! smoothers ([`cbs`]) or by Nadaraya-Watson smooth backfitting on a grid
//! ([`sbs`]). Bandwidths are picked by leave-one-out cross-validation ([`cv`]).

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when num-traits is built with std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod cbs;
pub mod cv;
pub mod local_linear;
pub mod sbs;

pub use cbs::{cbs_fit, CbsMode};
pub use cv::{cv_bandwidth, cv_score, default_search_grid, CvCandidate, CvOutcome};
pub use local_linear::{equivalent_kernel, fit_local_linear, local_linear};
pub use sbs::sbs_fit;

/// Tolerance on `∫K = 1` for tabulated kernels.
pub const KERNEL_MASS_TOL: f64 = 1e-6;

/// A symmetric kernel with unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `3/4 (1 - u²)` on [-1, 1].
    Epanechnikov,
    /// Standard normal density.
    Gaussian,
    Tabulated(TabulatedKernel),
}

/// A kernel given by its values on `[0, radius]` at equally spaced nodes,
/// interpolated linearly and mirrored to negative arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct TabulatedKernel {
    radius: f64,
    values: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTable {
    radius: f64,
    values: Vec<f64>,
}

impl TryFrom<RawTable> for TabulatedKernel {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        TabulatedKernel::new(raw.radius, raw.values)
    }
}

impl TabulatedKernel {
    /// `values[k] = K(k · radius / (len - 1))`. Rejects tables whose mass
    /// (checked by quadrature) differs from 1 by more than [`KERNEL_MASS_TOL`].
    pub fn new(radius: f64, values: Vec<f64>) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::domain(format!("kernel radius must be finite and > 0, got {radius}")));
        }
        if values.len() < 2 {
            return Err(Error::domain("kernel table needs at least 2 values"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("kernel table values must be finite and non-negative"));
        }
        let step = radius / (values.len() - 1) as f64;
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * step * (w[0] + w[1]);
            cumulative.push(acc);
        }
        let kernel = Self {
            radius,
            values,
            cumulative,
        };
        // the table is only piecewise smooth, so integrate panel by panel
        let mut mass = 0.0;
        for k in 0..kernel.values.len() - 1 {
            let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
            mass += crate::quad::tanh_sinh(|u| kernel.eval(u), a, b, 1e-12)?;
        }
        let mass = 2.0 * mass;
        if (mass - 1.0).abs() > KERNEL_MASS_TOL {
            return Err(Error::domain(format!("kernel table integrates to {mass}, not 1")));
        }
        Ok(kernel)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn step(&self) -> f64 {
        self.radius / (self.values.len() - 1) as f64
    }

    fn eval(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= self.radius {
            return 0.0;
        }
        let pos = a / self.step();
        let k = (pos as usize).min(self.values.len() - 2);
        let t = pos - k as f64;
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// `∫_0^a K` for `0 <= a`.
    fn half_integral(&self, a: f64) -> f64 {
        let a = a.min(self.radius);
        let step = self.step();
        let pos = a / step;
        let k = (pos as usize).min(self.values.len() - 2);
        let t = pos - k as f64;
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        // exact integral of the linear piece over [k step, a]
        self.cumulative[k] + step * t * (v0 + 0.5 * t * (v1 - v0))
    }
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * core::f64::consts::PI).sqrt(),
            Kernel::Tabulated(t) => t.eval(u),
        }
    }

    /// Half-width of the support, `None` for unbounded support.
    pub fn radius(&self) -> Option<f64> {
        match self {
            Kernel::Epanechnikov => Some(1.0),
            Kernel::Gaussian => None,
            Kernel::Tabulated(t) => Some(t.radius),
        }
    }

    /// `∫_{-∞}^u K`.
    pub fn cdf(&self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                let v = u.clamp(-1.0, 1.0);
                0.5 + 0.75 * (v - v * v * v / 3.0)
            }
            Kernel::Gaussian => 0.5 * (1.0 + libm::erf(u / core::f64::consts::SQRT_2)),
            Kernel::Tabulated(t) => {
                let half = t.half_integral(u.abs());
                if u >= 0.0 {
                    0.5 + half
                } else {
                    0.5 - half
                }
            }
        }
    }

    /// `∫_a^b K`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
            Kernel::Tabulated(_) => "tabulated",
        }
    }
}

/// One positive bandwidth per covariate, in covariate units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Bandwidths(Vec<f64>);

impl TryFrom<Vec<f64>> for Bandwidths {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Bandwidths::new(v)
    }
}

impl From<Bandwidths> for Vec<f64> {
    fn from(b: Bandwidths) -> Self {
        b.0
    }
}

impl Bandwidths {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::domain("at least one bandwidth is required"));
        }
        if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("bandwidths must be finite and > 0, got {bad}")));
        }
        Ok(Self(h))
    }

    pub fn single(h: f64) -> Result<Self> {
        Self::new(alloc::vec![h])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Local linear smoother, one covariate.
    Loclin,
    /// Classical backfitting of local linear smoothers, two covariates.
    Cbs,
    /// Nadaraya-Watson smooth backfitting, two covariates.
    Sbs,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Loclin => "loclin",
            Method::Cbs => "cbs",
            Method::Sbs => "sbs",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Method::Loclin => 1,
            Method::Cbs | Method::Sbs => 2,
        }
    }
}

/// Everything besides the data and bandwidths that determines a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherSettings {
    pub method: Method,
    pub kernel: Kernel,
    pub cbs_mode: CbsMode,
    /// Grid points per axis of the smooth backfitting solve.
    pub sbs_grid: usize,
    /// Grid points per axis used inside cross-validation for smooth backfitting.
    pub sbs_cv_grid: usize,
}

impl SmootherSettings {
    pub fn new(method: Method, kernel: Kernel) -> Self {
        Self {
            method,
            kernel,
            cbs_mode: CbsMode::Iterative,
            sbs_grid: sbs::DEFAULT_GRID,
            sbs_cv_grid: sbs::DEFAULT_CV_GRID,
        }
    }
}

/// Iteration record of a backfitting solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub update_norm: f64,
    /// Spectral norm estimate of `S₁*S₂*` (explicit classical backfitting only).
    pub spectral_norm: Option<f64>,
}

/// A fitted first-step regression.
#[derive(Debug, Clone)]
pub struct SmootherFit {
    pub method: Method,
    pub kernel: Kernel,
    pub bandwidths: Bandwidths,
    /// `ĝ(X_i)` at the observations.
    pub fitted: Vec<f64>,
    /// `ĝ_j(X_ij)` per covariate. For one covariate this repeats `fitted`.
    pub components: Vec<Vec<f64>>,
    /// `Z̄` for additive fits, 0 for the local linear smoother.
    pub intercept: f64,
    /// `[min, max]` of each training covariate.
    pub ranges: Vec<(f64, f64)>,
    pub diagnostics: Diagnostics,
    pub(crate) evaluator: Evaluator,
}

#[derive(Debug, Clone)]
pub(crate) enum Evaluator {
    LocalLinear {
        design: local_linear::SortedDesign,
        z: Vec<f64>,
    },
    /// `ĝ_j(x) = w_j(x)ᵀ partial_j - offset_j`.
    Cbs {
        designs: [local_linear::SortedDesign; 2],
        partial: [Vec<f64>; 2],
        offset: [f64; 2],
    },
    /// Component values on the uniform grid of the rescaled unit square.
    Sbs { grids: [Vec<f64>; 2] },
}

impl SmootherFit {
    pub fn dimension(&self) -> usize {
        self.ranges.len()
    }

    pub(crate) fn check_domain(&self, axis: usize, value: f64) -> Result<()> {
        let (lo, hi) = self.ranges[axis];
        if !(value >= lo && value <= hi) {
            return Err(Error::OutOfDomain { axis, value, lo, hi });
        }
        Ok(())
    }

    /// `ĝ_j(x)` for covariate `axis` at `value`, which must lie in the training range.
    pub fn component(&self, axis: usize, value: f64) -> Result<f64> {
        if axis >= self.dimension() {
            return Err(Error::domain(format!("axis {axis} out of range for a {}-covariate fit", self.dimension())));
        }
        self.check_domain(axis, value)?;
        let h = self.bandwidths.as_slice()[axis];
        match &self.evaluator {
            Evaluator::LocalLinear { design, z } => {
                local_linear::moments(design, &self.kernel, h, value, z, None).estimate(value)
            }
            Evaluator::Cbs {
                designs,
                partial,
                offset,
            } => Ok(local_linear::moments(&designs[axis], &self.kernel, h, value, &partial[axis], None)
                .estimate(value)?
                - offset[axis]),
            Evaluator::Sbs { grids } => {
                let (lo, hi) = self.ranges[axis];
                Ok(sbs::interpolate(&grids[axis], (value - lo) / (hi - lo)))
            }
        }
    }

    /// `ĝ(x)` at a new covariate vector inside the training ranges.
    pub fn predict(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dimension() {
            return Err(Error::LengthMismatch {
                expected: self.dimension(),
                got: point.len(),
            });
        }
        let mut total = self.intercept;
        for (axis, &v) in point.iter().enumerate() {
            total += self.component(axis, v)?;
        }
        Ok(total)
    }

    /// `ĝ_j` on `points` equally spaced values spanning the training range.
    pub fn component_grid(&self, axis: usize, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if points < 2 {
            return Err(Error::domain("a component grid needs at least 2 points"));
        }
        let (lo, hi) = self.ranges[axis];
        let xs: Vec<f64> = (0..points)
            .map(|k| {
                if k + 1 == points {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (points - 1) as f64
                }
            })
            .collect();
        let gs = xs.iter().map(|&x| self.component(axis, x)).collect::<Result<Vec<_>>>()?;
        Ok((xs, gs))
    }
}

/// Fits `method` with fixed bandwidths. `columns` holds one slice per covariate.
pub fn fit(columns: &[&[f64]], z: &[f64], settings: &SmootherSettings, h: &Bandwidths) -> Result<SmootherFit> {
    check_shape(columns, z, settings.method, h)?;
    match settings.method {
        Method::Loclin => fit_local_linear(columns[0], z, &settings.kernel, h.as_slice()[0]),
        Method::Cbs => cbs_fit(columns[0], columns[1], z, &settings.kernel, h, settings.cbs_mode),
        Method::Sbs => sbs_fit(columns[0], columns[1], z, &settings.kernel, h, settings.sbs_grid),
    }
}

pub(crate) fn check_shape(columns: &[&[f64]], z: &[f64], method: Method, h: &Bandwidths) -> Result<()> {
    let m = method.dimension();
    if columns.len() != m {
        return Err(Error::domain(format!(
            "method {} needs {m} covariate(s), got {}",
            method.name(),
            columns.len()
        )));
    }
    if h.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: h.len(),
        });
    }
    for c in columns {
        if c.len() != z.len() {
            return Err(Error::LengthMismatch {
                expected: z.len(),
                got: c.len(),
            });
        }
    }
    check_finite("covariate", columns.iter().flat_map(|c| c.iter()))?;
    check_finite("response", z.iter())
}

pub(crate) fn check_finite<'a>(what: &str, mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if let Some(v) = values.find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{what} values must be finite, found {v}")));
    }
    Ok(())
}

pub(crate) fn range(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
