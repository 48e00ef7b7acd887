//! Content hashes for configs and artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical JSON form of `v`.
pub fn hash_json<T: Serialize>(v: &T) -> String {
    let s = serde_json::to_vec(v).expect("serializable value");
    sha256_hex(&s)
}

/// Hash of a float slice by bit pattern.
pub fn hash_f64s(v: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in v {
        h.update(x.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
