use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    /// The local weighted design `A'DA` is singular at `point`: fewer than two
    /// distinct covariate values lie within kernel reach.
    #[error("singular local design at evaluation point {point}")]
    SingularDesign { point: f64 },

    #[error("numerically singular system: {0}")]
    Singular(&'static str),

    #[error("estimated density of covariate {axis} is {value:e} at grid point {point}")]
    DegenerateDensity { axis: usize, point: f64, value: f64 },

    #[error("sum of squared residuals is zero")]
    ZeroResiduals,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("covariate {axis} value {value} outside training range [{lo}, {hi}]")]
    OutOfDomain {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("every bandwidth candidate failed")]
    AllCandidatesFailed,

    #[error("{failed} of {total} replicas failed")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SingularDesign { .. }
                | Error::Singular(_)
                | Error::DegenerateDensity { .. }
                | Error::ZeroResiduals
                | Error::AllCandidatesFailed
                | Error::TooManyFailures { .. }
        )
    }
}
