//! One root seed, many labelled substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Seed of the substream `label` under `root`.
pub fn substream_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

pub fn substream(root: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(substream_seed(root, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn labels_separate_streams() {
        assert_ne!(substream_seed(7, "noise"), substream_seed(7, "sampling"));
        assert_ne!(substream_seed(7, "noise"), substream_seed(8, "noise"));
        let a: Vec<u32> = substream(7, "noise").random_iter().take(5).collect();
        let b: Vec<u32> = substream(7, "noise").random_iter().take(5).collect();
        assert_eq!(a, b);
    }
}
