//! Deterministic seed derivation.
//!
//! Every randomized stage of the pipeline draws from its own
//! [`ChaCha8Rng`] seeded through [`derive_seed`], so stages never share
//! or race on RNG state and re-running a config reproduces every draw.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; the standard 64-bit avalanche mix.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of components.
///
/// The derivation is `fold(splitmix64, base, parts)` with each part mixed
/// in before hashing, so `derive_seed(s, &[a, b])` differs from
/// `derive_seed(s, &[b, a])` and from `derive_seed(s, &[a])`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(base ^ 0x6d69_612d_6c61_62u64); // "mia-lab"
    for &p in parts {
        state = splitmix64(state ^ p.wrapping_mul(0x2545_f491_4f6c_dd1d));
    }
    state
}

/// A ChaCha8 stream for a derived seed path.
pub fn rng_for(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn derived_seeds_are_pairwise_distinct_over_a_grid() {
        let mut seen = HashSet::new();
        for base in [0u64, 1, 42, u64::MAX] {
            for axis in 0..10u64 {
                for rep in 0..50u64 {
                    assert!(seen.insert(derive_seed(base, &[axis, rep])));
                }
            }
        }
    }

    #[test]
    fn order_of_parts_matters() {
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(7, &[1, 0]));
    }
}
