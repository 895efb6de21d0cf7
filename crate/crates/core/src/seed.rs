//! Named seed derivation.
//!
//! Every random stream in a run is derived from one root seed and a path of
//! labels, e.g. `("simulate", "euthanasia")`. Streams are independent of the
//! order in which work units execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derive a child seed from `root` and a label path.
pub fn derive(root: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Derive a child seed for the `index`-th unit under `label`.
pub fn derive_indexed(root: u64, label: &str, index: usize) -> u64 {
    derive(root, &[label, &index.to_string()])
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex digest (first 16 hex chars of SHA-256) of a serializable value's canonical JSON.
pub fn config_hash<T: serde::Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config values are always serializable");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}
