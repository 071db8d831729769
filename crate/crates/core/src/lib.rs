//! The Matsuoka distribution on (0, 1) and multiplicative frontier models `Y = f(X) R` built on it.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`special_fn`]: gamma, incomplete gamma functions and the inverse of the
//!   upper incomplete gamma function.
//! - [`matsuoka`]: the M(p) distribution on (0, 1), its closed forms and the
//!   MLE/UMVUE estimators of `p`.
//! - [`smoothers`]: kernels, the local linear smoother, classical and smooth
//!   backfitting for two covariates and leave-one-out bandwidth selection.
//! - [`frontier`]: the log-linearised frontier model `Y = f(X) R`, the
//!   method-of-moments estimate of `p` and the plug-in frontier.
//! - [`simlab`]: data-generating processes and Monte Carlo bookkeeping.
//!
//! File formats, the command line and parallel execution live in the
//! `frontier-lab` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod frontier;
pub mod linalg;
pub mod matsuoka;
pub mod quad;
pub mod simlab;
pub mod smoothers;
pub mod special_fn;

pub use error::{Error, Result};
pub use frontier::{fit_frontier, Dataset, FrontierConfig, FrontierModel};
pub use matsuoka::MatsuokaParams;
pub use smoothers::{Bandwidths, Kernel, Method, SmootherFit};

/// Library version, embedded in every artifact written by the CLI.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
