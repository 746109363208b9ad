//! Deterministic seed streams.
//!
//! Stochastic work is cut into fixed-size blocks. Block `b` of a run seeded
//! with `s` draws from `ChaCha8Rng::seed_from_u64(s)` on stream `b`, so a block
//! produces the same numbers whichever worker runs it, and merging block
//! results in block order reproduces a sequential run bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trials per block for every blocked estimator in the crate.
pub const BLOCK_TRIALS: u64 = 4096;

/// Generator for block `block` of the run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// `(block index, trials in block)` pairs covering `trials`.
pub fn blocks(trials: u64) -> impl Iterator<Item = (u64, u64)> + Clone {
    let full = trials / BLOCK_TRIALS;
    let rest = trials % BLOCK_TRIALS;
    (0..full)
        .map(|b| (b, BLOCK_TRIALS))
        .chain((rest > 0).then_some((full, rest)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use rand::Rng;

    #[test]
    fn blocks_cover_trials() {
        let b: Vec<_> = blocks(2 * BLOCK_TRIALS + 5).collect();
        assert_eq!(b, [(0, BLOCK_TRIALS), (1, BLOCK_TRIALS), (2, 5)]);
        assert_eq!(blocks(0).count(), 0);
        assert_eq!(blocks(BLOCK_TRIALS).count(), 1);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = block_rng(7, 0).random();
        let b: u64 = block_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, block_rng(7, 0).random::<u64>());
    }
}
