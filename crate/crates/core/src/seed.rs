//! Seed derivation.
//!
//! Every stage draws from `derive(global, label)`: the first eight bytes
//! (little-endian) of `SHA-256("warmstop:" || label || ":" || global)`. Labels
//! are stage names such as `"kernels"` or `"bootstrap"`, optionally extended
//! with a per-item suffix like a benchmark id.

use sha2::{Digest, Sha256};

pub fn derive(global: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"warmstop:");
    hasher.update(label.as_bytes());
    hasher.update(b":");
    hasher.update(global.to_string().as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Seed for one item within a stage, e.g. one series in the RCIW bootstrap.
pub fn derive_for(global: u64, stage: &str, item: &impl std::fmt::Display) -> u64 {
    derive(global, &format!("{stage}/{item}"))
}

pub mod stages {
    pub const SYNTH: &str = "synth";
    pub const FOLDS: &str = "folds";
    pub const KERNELS: &str = "kernels";
    pub const RCIW: &str = "rciw";
    pub const BOOTSTRAP: &str = "bootstrap";
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_distinct() {
        assert_eq!(derive(0, "kernels"), derive(0, "kernels"));
        assert_ne!(derive(0, "kernels"), derive(1, "kernels"));
        assert_ne!(derive(0, "kernels"), derive(0, "folds"));
        assert_ne!(derive_for(0, "rciw", &"a"), derive_for(0, "rciw", &"b"));
    }

    #[test]
    fn pinned_value() {
        // pins the derivation so recorded seeds stay meaningful across releases
        let digest = Sha256::digest(b"warmstop:kernels:42");
        let expect = u64::from_le_bytes(digest[..8].try_into().unwrap());
        assert_eq!(derive(42, "kernels"), expect);
    }
}
