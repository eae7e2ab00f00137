//! Seed derivation. Every random draw in the crate comes from a stream keyed by
//! `(seed, realization, block)`, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one (realization, block) pair under a master seed.
pub fn stream(seed: u64, realization: u64, block: u64) -> Stream {
    let key = splitmix64(seed ^ splitmix64(realization.wrapping_add(0x5851_F42D_4C95_7F2D)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(block);
    rng
}

/// Derives a sub-seed from a master seed and a label (experiment name, role).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the master seed.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(master ^ h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = stream(7, 3, 1).random_iter().take(4).collect();
        let b: Vec<u64> = stream(7, 3, 1).random_iter().take(4).collect();
        let c: Vec<u64> = stream(7, 3, 2).random_iter().take(4).collect();
        let e: Vec<u64> = stream(7, 4, 1).random_iter().take(4).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, e);
    }

    #[test]
    fn derived_seeds_depend_on_label() {
        assert_ne!(derive_seed(1, "decay"), derive_seed(1, "msd"));
        assert_eq!(derive_seed(1, "decay"), derive_seed(1, "decay"));
    }
}
