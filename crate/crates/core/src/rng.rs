//! Deterministic random streams.
//!
//! A stream is identified by `(seed, domain, index)`. The key is derived from
//! `seed` and `domain` with SplitMix64; `index` selects one of the 2^64 ChaCha
//! streams under that key. Draw `t` of a posterior bootstrap always sees the
//! same stream no matter which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Posterior bootstrap draws, indexed by draw number.
pub const DOMAIN_BOOTSTRAP: u64 = 0;
/// Base-measure samples used for the sandwich's `J₂`, `I₂` terms.
pub const DOMAIN_BASE_SAMPLE: u64 = 1;
/// Empirical resamples in coverage calibration.
pub const DOMAIN_RESAMPLE: u64 = 2;
/// Free for callers (subsampling, synthetic data).
pub const DOMAIN_USER: u64 = 16;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut state = seed ^ domain.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
