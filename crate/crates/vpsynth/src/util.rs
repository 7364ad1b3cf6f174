//! Small deterministic helpers shared across modules: stable hashing, seed
//! derivation, and newline normalization.
//!
//! Everything here must be stable across runs, platforms, and compiler
//! versions; none of it may depend on `std`'s randomized hashers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_extend(FNV_OFFSET, bytes)
}

/// Continue an FNV-1a hash with more bytes.
pub fn fnv1a_extend(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash a sequence of labeled parts into one stable 64-bit value.
///
/// Parts are length-prefixed so `["ab","c"]` and `["a","bc"]` differ.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        h = fnv1a_extend(h, &(part.len() as u64).to_le_bytes());
        h = fnv1a_extend(h, part);
    }
    h
}

/// Derive a child seed from a parent seed and a list of string labels.
pub fn derive_seed(parent: u64, labels: &[&str]) -> u64 {
    let mut h = fnv1a_extend(FNV_OFFSET, &parent.to_le_bytes());
    for label in labels {
        h = fnv1a_extend(h, &(label.len() as u64).to_le_bytes());
        h = fnv1a_extend(h, label.as_bytes());
    }
    h
}

/// Deterministic RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Map a 64-bit hash to a uniform float in `[0, 1)`.
pub fn unit_float(h: u64) -> f64 {
    // 53 mantissa bits give the usual uniform grid on [0,1).
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Normalize CRLF / lone CR to LF so prompts and exports are byte-stable.
pub fn normalize_newlines(s: &str) -> String {
    s.replace("\r\n", "\n").replace('\r', "\n")
}

/// Fixed-width lowercase hex for 64-bit hashes as printed in reports.
pub fn hex64(h: u64) -> String {
    format!("{h:016x}")
}

/// Counting semaphore bounding in-flight remote requests from a worker pool.
pub struct Semaphore {
    state: std::sync::Mutex<usize>,
    cv: std::sync::Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Semaphore {
        Semaphore { state: std::sync::Mutex::new(permits.max(1)), cv: std::sync::Condvar::new() }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut available = self.state.lock().unwrap();
        while *available == 0 {
            available = self.cv.wait(available).unwrap();
        }
        *available -= 1;
        SemaphoreGuard { sem: self }
    }
}

pub struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut available = self.sem.state.lock().unwrap();
        *available += 1;
        self.sem.cv.notify_one();
    }
}
