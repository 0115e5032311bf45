//! Seed fan-out: one global seed, stable per-stage derived seeds.

/// FNV-1a over a byte string; also used for vocabulary fingerprints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derive a stage seed from the global seed and a stable tag.
pub fn stage_seed(global: u64, tag: &str) -> u64 {
    global ^ fnv1a64(tag.as_bytes())
}

/// Derive a per-item seed (e.g. one letter's attribution job) so that
/// results do not depend on iteration order.
pub fn item_seed(global: u64, tag: &str, item: &str) -> u64 {
    let mut bytes = Vec::with_capacity(tag.len() + item.len() + 1);
    bytes.extend_from_slice(tag.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(item.as_bytes());
    global ^ fnv1a64(&bytes)
}
