//! Order-independent seed derivation for parallel experiment fan-out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a run seed from a master seed and a path of labels.
///
/// The digest covers the master seed and every label, each length-prefixed,
/// so `["a", "bc"]` and `["ab", "c"]` differ.
pub fn derive_seed<I, S>(master: u64, labels: I) -> u64
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut hasher = Sha256::new();
    hasher.update(b"mg-seed/v1");
    hasher.update(master.to_le_bytes());
    for label in labels {
        let bytes = label.as_ref().as_bytes();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
