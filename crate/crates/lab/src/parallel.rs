//! Block-parallel execution.
//!
//! Work is cut into the fixed blocks of `simplemax_core::seeding::blocks`; each
//! block owns its random stream and results come back in block order, so the
//! merged value does not depend on the worker count.

use rayon::prelude::*;
use simplemax_core::seeding::blocks;

use crate::LabError;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SIMPLEMAX_WORKERS";

/// Worker count from the flag, then the environment, then the machine.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Evaluate `f(block, count)` for every block of `trials` on `workers` threads.
pub fn map_blocks<T, F>(trials: u64, workers: usize, f: F) -> Result<Vec<T>, LabError>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T, LabError> + Sync,
{
    let work: Vec<(u64, u64)> = blocks(trials).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::Io(format!("thread pool: {e}")))?;
    pool.install(|| work.par_iter().map(|&(b, c)| f(b, c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_block_order() {
        let out = map_blocks(5 * 4096 + 7, 3, |b, c| Ok((b, c))).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().enumerate().all(|(i, &(b, _))| b == i as u64));
        assert_eq!(out.iter().map(|x| x.1).sum::<u64>(), 5 * 4096 + 7);
    }

    #[test]
    fn flag_wins() {
        assert_eq!(resolve_workers(Some(3)), 3);
        assert!(resolve_workers(None) >= 1);
    }
}
