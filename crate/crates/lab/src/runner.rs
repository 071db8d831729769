//! Parallel replica execution with results identical to the sequential run.

use frontier_core::frontier::FrontierConfig;
use frontier_core::simlab::{aggregate, run_replica, Cell, SimReport};
use rayon::prelude::*;

use crate::error::{LabError, Result};

pub const THREADS_ENV: &str = "FRONTIER_LAB_THREADS";

/// Runs `replicas` replicas of every cell on at most `threads` workers (all
/// cores when `None`). Replica `r` of cell `c` is seeded by
/// `derive_seed(base_seed, c, r)` and outcomes are aggregated in replica
/// order, so the schedule never shows in the reports.
pub fn run_study(
    cells: &[Cell],
    replicas: usize,
    config: &FrontierConfig,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<SimReport>> {
    if replicas == 0 {
        return Err(LabError::Usage("--replicas must be at least 1".into()));
    }
    if threads == Some(0) {
        return Err(LabError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| LabError::Usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| {
        cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let outcomes = (0..replicas)
                    .into_par_iter()
                    .map(|r| run_replica(cell, c, r, base_seed, config))
                    .collect();
                Ok(aggregate(*cell, outcomes)?)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use frontier_core::frontier::BandwidthChoice;
    use frontier_core::simlab::DgpKind;
    use frontier_core::{Bandwidths, Kernel, Method};

    #[test]
    fn parallel_equals_sequential() {
        let cells = [Cell { kind: DgpKind::I, p: 2.0, n: 80 }];
        let config = FrontierConfig::new(
            Method::Loclin,
            Kernel::Epanechnikov,
            BandwidthChoice::Fixed(Bandwidths::single(0.3).unwrap()),
        );
        let seq = frontier_core::simlab::run_study(&cells, 40, &config, 5).unwrap();
        for threads in [Some(1), Some(3), None] {
            assert_eq!(run_study(&cells, 40, &config, 5, threads).unwrap(), seq);
        }
    }
}
