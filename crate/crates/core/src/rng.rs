//! Deterministic seed derivation.
//!
//! Every stochastic component draws from a ChaCha8 stream whose seed is
//! derived from (root seed, stream id) with splitmix64, so independent
//! workers (folds, permutations, channels) get decorrelated streams while
//! the whole pipeline stays reproducible from a single root seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 step; advances `state` and returns the next output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a stream index.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut state = root;
    let a = splitmix64(&mut state);
    let mut state = a ^ stream;
    splitmix64(&mut state)
}

/// Deterministic RNG for the given (root, stream) pair.
pub fn stream_rng(root: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream))
}
