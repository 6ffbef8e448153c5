//! Counter-based seed derivation.
//!
//! `derive_seed(seed, index) = mix(seed ⊕ mix(index + 0x9E3779B97F4A7C15))`
//! where `mix` is the SplitMix64 finaliser. Per-trial generators are
//! `ChaCha8Rng::seed_from_u64(derive_seed(seed, trial))`. This mapping is
//! part of the reproducibility contract of every seeded report; changing it
//! changes published results.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index.wrapping_add(GAMMA)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_values() {
        // Frozen: reports depend on these.
        assert_eq!(mix(0), 0);
        assert_eq!(derive_seed(0, 0), mix(mix(GAMMA)));
        assert_ne!(derive_seed(1, 0), derive_seed(0, 1));
    }

    #[test]
    fn distinct_indices_distinct_seeds() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000 {
            assert!(seen.insert(derive_seed(42, i)));
        }
    }
}
