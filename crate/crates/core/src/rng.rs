//! Counter-based random streams.
//!
//! Every consumer of randomness asks for a generator keyed by
//! `(seed, domain, key)`. ChaCha is a counter-mode cipher, so the stream for a
//! key is fixed regardless of which thread pulls it or in what order keys are
//! visited. Replications, resamples and importance-sampling chunks each get
//! their own key.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Separates the key spaces of independent consumers sharing one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Noise,
    MonteCarlo,
    Importance,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Noise => 0x006e_6f69_7365,
            Domain::MonteCarlo => 0x006d_6372_6570,
            Domain::Importance => 0x6973_6472_6177,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for stream `key` of `domain` under `seed`.
pub fn stream_rng(seed: u64, domain: Domain, key: u64) -> StreamRng {
    let mut state = seed ^ domain.tag().rotate_left(17);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(bytes);
    rng.set_stream(key);
    rng
}

/// Packs a replication index and a resample attempt into one stream key.
pub fn replication_key(rep_index: u64, attempt: u32) -> u64 {
    debug_assert!(rep_index < 1 << 48);
    rep_index | (u64::from(attempt) << 48)
}
