//! Seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus a label
//! path such as `["cfs", "rf", "fold3", "adasyn"]`. The label bytes are
//! folded with FNV-1a and mixed into the master seed with SplitMix64, one
//! round per label, so a stream depends only on its own path. Adding a new
//! matrix cell never shifts the seeds of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Derives a child seed from `master` and a label path.
pub fn derive<S: AsRef<str>>(master: u64, path: &[S]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, label| {
        splitmix64(acc ^ fnv1a(label.as_ref()))
    })
}

/// Child seed for the `index`-th member of a family (trees, restarts).
pub fn child(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_independent() {
        let a = derive(42, &["cfs", "rf", "fold0"]);
        assert_eq!(a, derive(42, &["cfs", "rf", "fold0"]));
        assert_ne!(a, derive(42, &["cfs", "rf", "fold1"]));
        assert_ne!(a, derive(43, &["cfs", "rf", "fold0"]));
        assert_ne!(child(a, 0), child(a, 1));
    }
}
