//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by `(master seed, index path, stage tag)`,
//! so adding a stage never shifts the randomness of an existing one.

/// SplitMix64 finalizer.
pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64], tag: &str) -> u64 {
    // FNV-1a over the tag bytes.
    let tag_hash = tag
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    let mut h = mix(master ^ tag_hash);
    for &p in path {
        h = mix(h ^ mix(p));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_distinct() {
        assert_eq!(derive_seed(7, &[1, 2], "model"), derive_seed(7, &[1, 2], "model"));
        assert_ne!(derive_seed(7, &[1, 2], "model"), derive_seed(7, &[2, 1], "model"));
        assert_ne!(derive_seed(7, &[1, 2], "model"), derive_seed(7, &[1, 2], "tune"));
        assert_ne!(derive_seed(7, &[1], "model"), derive_seed(8, &[1], "model"));
    }
}
