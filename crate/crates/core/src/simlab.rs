//! Data-generating processes and Monte Carlo bookkeeping.
//!
//! Two designs with `X ~ U(1, 2)` and `R ~ M(p)`:
//!
//! - `dgp_i`: `Y = (-X² + 4X) R`;
//! - `dgp_ii`: `Y = exp(-f₁(X₁) - f₂(X₂)) R` with `f₁(x) = -1.5x² + 3x - 1`
//!   and `f₂(x) = -(ln x + 1)/2 + ln 2`.
//!
//! Both `f₁` and `f₂` integrate to zero over (1, 2), so they are the centred
//! additive components of `g` and `g₀ = 3/(2p)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when num-traits is built with std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontier::{fit_frontier, Dataset, FrontierConfig};
use crate::matsuoka::MatsuokaParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpKind {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    Ii,
}

impl DgpKind {
    pub fn name(&self) -> &'static str {
        match self {
            DgpKind::I => "i",
            DgpKind::Ii => "ii",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DgpKind::I => 1,
            DgpKind::Ii => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub p: f64,
    pub n: usize,
    pub seed: u64,
}

/// `f₁(x) = -1.5x² + 3x - 1`.
pub fn f1(x: f64) -> f64 {
    -1.5 * x * x + 3.0 * x - 1.0
}

/// `f₂(x) = -(ln x + 1)/2 + ln 2`.
pub fn f2(x: f64) -> f64 {
    -(x.ln() + 1.0) / 2.0 + core::f64::consts::LN_2
}

/// True frontier of `kind` at `x`.
pub fn frontier_fn(kind: DgpKind, x: &[f64]) -> f64 {
    match kind {
        DgpKind::I => -x[0] * x[0] + 4.0 * x[0],
        DgpKind::Ii => (-f1(x[0]) - f2(x[1])).exp(),
    }
}

/// A simulated sample with its latent truth.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    /// `f(X_i)`.
    pub f: Vec<f64>,
    /// `g(X_i) = 3/(2p) - ln f(X_i)`.
    pub g: Vec<f64>,
    /// Centred components `g_j(X_ij)` (only for two covariates).
    pub components: Vec<Vec<f64>>,
    /// `ε_i = Z_i - g(X_i)`.
    pub eps: Vec<f64>,
}

/// SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica` in cell `cell` of a study seeded with `base`.
pub fn derive_seed(base: u64, cell: usize, replica: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ cell as u64) ^ replica as u64)
}

const X_STREAM: u64 = 0x5851_F42D_4C95_7F2D;
const R_STREAM: u64 = 0x1405_7B7E_F767_814F;

pub fn generate(spec: &DgpSpec) -> Result<Simulated> {
    let dist = MatsuokaParams::new(spec.p)?;
    if spec.n < crate::frontier::MIN_OBSERVATIONS {
        return Err(Error::domain(format!(
            "n must be at least {}, got {}",
            crate::frontier::MIN_OBSERVATIONS,
            spec.n
        )));
    }
    let m = spec.kind.dimension();
    let mut xrng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ X_STREAM));
    let mut columns: Vec<Vec<f64>> = (0..m).map(|_| Vec::with_capacity(spec.n)).collect();
    for _ in 0..spec.n {
        for c in columns.iter_mut() {
            c.push(xrng.random_range(1.0..2.0));
        }
    }
    let r = dist.sample(spec.n, splitmix64(spec.seed ^ R_STREAM));
    let g0 = 1.5 / spec.p;
    let mut y = Vec::with_capacity(spec.n);
    let mut f = Vec::with_capacity(spec.n);
    let mut g = Vec::with_capacity(spec.n);
    let mut eps = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let x: Vec<f64> = columns.iter().map(|c| c[i]).collect();
        let fi = frontier_fn(spec.kind, &x);
        let yi = fi * r[i];
        y.push(yi);
        f.push(fi);
        let gi = g0 - fi.ln();
        g.push(gi);
        eps.push(-yi.ln() - gi);
    }
    let components = match spec.kind {
        DgpKind::I => Vec::new(),
        DgpKind::Ii => alloc::vec![
            columns[0].iter().map(|&x| f1(x)).collect(),
            columns[1].iter().map(|&x| f2(x)).collect(),
        ],
    };
    Ok(Simulated {
        data: Dataset::new(y, columns)?,
        f,
        g,
        components,
        eps,
    })
}

/// Average squared error `n⁻¹ Σ (estimate_i - truth_i)²`.
pub fn ase(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::domain("ase of empty vectors"));
    }
    Ok(estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum::<f64>() / truth.len() as f64)
}

/// Type 7 sample quantile (linear interpolation between order statistics).
pub fn quantile_type7(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level must lie in [0, 1], got {q}")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// One simulation cell: a DGP at fixed `p` and `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub kind: DgpKind,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: usize,
    pub seed: u64,
    pub ase_g: f64,
    pub ase_f: f64,
    pub ase_g1: Option<f64>,
    pub ase_g2: Option<f64>,
    pub p_hat: f64,
    /// `max_i |f̂(X_i) - f(X_i)|`.
    pub max_abs_f: f64,
    pub bandwidths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub replica: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replicas: usize,
    pub failures: usize,
    pub l_f: f64,
    pub l_g: f64,
    pub l_g1: Option<f64>,
    pub l_g2: Option<f64>,
    pub mean_p: f64,
    /// Sample variance (denominator `N - 1`; 0 for a single replica).
    pub var_p: f64,
    pub q05_p: f64,
    pub q95_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub cell: Cell,
    pub records: Vec<ReplicaRecord>,
    pub failures: Vec<ReplicaFailure>,
    pub aggregate: Aggregate,
}

/// Generates, fits and scores replica `replica` of `cell`.
pub fn run_replica(
    cell: &Cell,
    cell_index: usize,
    replica: usize,
    base_seed: u64,
    config: &FrontierConfig,
) -> core::result::Result<ReplicaRecord, ReplicaFailure> {
    let seed = derive_seed(base_seed, cell_index, replica);
    let fail = |e: Error| ReplicaFailure {
        replica,
        seed,
        error: format!("{e}"),
    };
    let sim = generate(&DgpSpec {
        kind: cell.kind,
        p: cell.p,
        n: cell.n,
        seed,
    })
    .map_err(fail)?;
    let model = fit_frontier(&sim.data, config).map_err(fail)?;
    let ase_g = ase(&model.fit.fitted, &sim.g).map_err(fail)?;
    let ase_f = ase(&model.frontier_at_obs, &sim.f).map_err(fail)?;
    let (ase_g1, ase_g2) = if sim.components.len() == 2 {
        (
            Some(ase(&model.fit.components[0], &sim.components[0]).map_err(fail)?),
            Some(ase(&model.fit.components[1], &sim.components[1]).map_err(fail)?),
        )
    } else {
        (None, None)
    };
    let max_abs_f = model
        .frontier_at_obs
        .iter()
        .zip(&sim.f)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(ReplicaRecord {
        replica,
        seed,
        ase_g,
        ase_f,
        ase_g1,
        ase_g2,
        p_hat: model.p_hat,
        max_abs_f,
        bandwidths: model.bandwidths().as_slice().to_vec(),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Aggregates replica outcomes, which must be ordered by replica index.
/// More than 1% failures fails the cell.
pub fn aggregate(
    cell: Cell,
    outcomes: Vec<core::result::Result<ReplicaRecord, ReplicaFailure>>,
) -> Result<SimReport> {
    let total = outcomes.len();
    if total == 0 {
        return Err(Error::domain("at least one replica is required"));
    }
    let mut records = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    if failures.len() * 100 > total || records.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }
    let col = |f: fn(&ReplicaRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    let p = col(|r| r.p_hat);
    let mean_p = mean(&p);
    let var_p = if p.len() > 1 {
        p.iter().map(|v| (v - mean_p) * (v - mean_p)).sum::<f64>() / (p.len() - 1) as f64
    } else {
        0.0
    };
    let opt_mean = |f: fn(&ReplicaRecord) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = records.iter().map(f).collect();
        v.map(|v| mean(&v))
    };
    let aggregate = Aggregate {
        replicas: records.len(),
        failures: failures.len(),
        l_f: mean(&col(|r| r.ase_f)),
        l_g: mean(&col(|r| r.ase_g)),
        l_g1: opt_mean(|r| r.ase_g1),
        l_g2: opt_mean(|r| r.ase_g2),
        mean_p,
        var_p,
        q05_p: quantile_type7(&p, 0.05)?,
        q95_p: quantile_type7(&p, 0.95)?,
    };
    Ok(SimReport {
        cell,
        records,
        failures,
        aggregate,
    })
}

/// Runs every cell sequentially; replica `r` of cell `c` uses
/// `derive_seed(base_seed, c, r)`.
pub fn run_study(cells: &[Cell], replicas: usize, config: &FrontierConfig, base_seed: u64) -> Result<Vec<SimReport>> {
    if replicas == 0 {
        return Err(Error::domain("at least one replica is required"));
    }
    cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let outcomes = (0..replicas).map(|r| run_replica(cell, c, r, base_seed, config)).collect();
            aggregate(*cell, outcomes)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::tanh_sinh;

    #[test]
    fn dgp_ii_components_are_centred() {
        assert!(tanh_sinh(f1, 1.0, 2.0, 1e-14).unwrap().abs() < 1e-14);
        assert!(tanh_sinh(f2, 1.0, 2.0, 1e-14).unwrap().abs() < 1e-14);
        assert!((f1(1.0) - 0.5).abs() < 1e-15);
        assert!((f2(1.0) - (core::f64::consts::LN_2 - 0.5)).abs() < 1e-15);
        assert!((frontier_fn(DgpKind::Ii, &[1.0, 1.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn generate_is_deterministic_and_consistent() {
        let spec = DgpSpec {
            kind: DgpKind::Ii,
            p: 2.0,
            n: 50,
            seed: 9,
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.data, b.data);
        for i in 0..50 {
            let z = a.data.z()[i];
            assert!((z - a.g[i] - a.eps[i]).abs() < 1e-12);
            assert!(a.data.y()[i] < a.f[i]);
        }
    }

    #[test]
    fn ase_and_quantiles() {
        assert_eq!(ase(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((ase(&[1.5, 2.5], &[1.0, 2.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!(ase(&[1.0], &[1.0, 2.0]).is_err());
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile_type7(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile_type7(&v, 1.0).unwrap(), 4.0);
        assert!((quantile_type7(&v, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((quantile_type7(&v, 0.05).unwrap() - 1.15).abs() < 1e-12);
    }

    #[test]
    fn seeds_differ_across_cells_and_replicas() {
        let s = derive_seed(42, 0, 0);
        assert_ne!(s, derive_seed(42, 0, 1));
        assert_ne!(s, derive_seed(42, 1, 0));
        assert_ne!(s, derive_seed(43, 0, 0));
        assert_eq!(s, derive_seed(42, 0, 0));
    }

    #[test]
    fn failure_threshold() {
        let cell = Cell {
            kind: DgpKind::I,
            p: 2.0,
            n: 10,
        };
        let ok = |r| {
            Ok(ReplicaRecord {
                replica: r,
                seed: 0,
                ase_g: 1.0,
                ase_f: 1.0,
                ase_g1: None,
                ase_g2: None,
                p_hat: 2.0,
                max_abs_f: 0.0,
                bandwidths: alloc::vec![0.1],
            })
        };
        let bad = |r| {
            Err(ReplicaFailure {
                replica: r,
                seed: 0,
                error: String::from("x"),
            })
        };
        let mut v: Vec<_> = (0..100).map(ok).collect();
        v[5] = bad(5);
        assert_eq!(aggregate(cell, v.clone()).unwrap().aggregate.failures, 1);
        v[6] = bad(6);
        assert!(matches!(aggregate(cell, v), Err(Error::TooManyFailures { failed: 2, total: 100 })));
    }
}
