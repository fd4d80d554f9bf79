//! Keyed deterministic random streams.
//!
//! Every random decision in the toolkit draws from a ChaCha8 stream whose
//! key is derived by hashing (domain, seed, key material). ChaCha is a
//! counter-based generator, so a (seed, epoch, index) key yields an
//! independent, reproducible stream per work item with no shared state.
//! All sampling primitives live here so that outputs depend only on the
//! ChaCha stream, never on RNG-library internals.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// Derive an independent ChaCha8 stream for (seed, domain, key).
///
/// `domain` separates unrelated uses of the same user seed (masking vs.
/// splitting vs. code-mixing); `key` carries per-item material such as
/// epoch/index counters or a document id.
pub fn keyed_rng(seed: u64, domain: &str, key: &[u8]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    hasher.update(key);
    let digest = hasher.finalize();
    let mut chacha_seed = [0u8; 32];
    chacha_seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(chacha_seed)
}

/// Little-endian concatenation of counters, for use as a `keyed_rng` key.
pub fn counter_key(parts: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(parts.len() * 8);
    for part in parts {
        out.extend_from_slice(&part.to_le_bytes());
    }
    out
}

/// Uniform f64 in [0, 1) from the top 53 bits of one u64 draw.
pub fn uniform_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in [0, bound). Single modulo draw; the bias is below
/// 2^-40 for every pool size this crate uses (all far under 2^24).
pub fn uniform_index(rng: &mut impl RngCore, bound: usize) -> usize {
    debug_assert!(bound > 0);
    (rng.next_u64() % bound as u64) as usize
}

/// In-place Fisher-Yates shuffle, high index down.
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_index(rng, i + 1);
        items.swap(i, j);
    }
}

/// Sample `k` distinct indices from `0..n`, returned ascending.
///
/// Draw protocol: each draw picks the j-th remaining index in ascending
/// order and removes it. The protocol (not just the result) is part of
/// the contract so an independent re-implementation reproduces it.
pub fn sample_indices(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} of {n}");
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let j = uniform_index(rng, remaining.len());
        picked.push(remaining.remove(j));
    }
    picked.sort_unstable();
    picked
}
