//! Seeded, stream-addressable random number generation.
//!
//! Every stochastic component in the crate draws from a [`RngStream`]: a
//! `(seed, stream_id)` pair that deterministically keys a ChaCha8 generator.
//! Identical pairs produce identical sample sequences regardless of which
//! thread consumes them, so Monte-Carlo trials can run in parallel while the
//! aggregate result stays byte-reproducible. The training loop derives one
//! stream per `(trial, round, lane)` triple; see [`RngStream::for_round`].

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Noise lanes consumed inside a single communication round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// Per-agent channel fading draws.
    Fading = 0,
    /// The alpha-stable interference vector.
    Interference = 1,
}

/// A reproducible random stream address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Stream for one `(trial, round, lane)` cell of a Monte-Carlo run.
    ///
    /// The packing is collision-free for `round < 2^32` and `trial < 2^30`,
    /// far beyond any configuration the trainer accepts.
    pub fn for_round(seed: u64, trial: u64, round: usize, lane: Lane) -> Self {
        assert!(trial < 1 << 30, "trial id out of range");
        assert!(round < 1 << 32, "round out of range");
        let id = (trial << 34) | ((round as u64) << 2) | lane as u64;
        RngStream::new(seed, id)
    }

    /// Instantiate the generator this stream addresses.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed;
        // Fold the stream id into the splitmix walk before squeezing the key.
        let mut sid = self.stream_id ^ GOLDEN;
        state ^= splitmix64(&mut sid);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 step: advances `state` and returns a well-mixed word.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
