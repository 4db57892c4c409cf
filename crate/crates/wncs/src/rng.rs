//! Seeded RNG streams for reproducible simulation.
//!
//! Every source of randomness in the crate draws from a [`ChaCha8Rng`] derived
//! from a master seed and a stream id. Distinct stream ids yield statistically
//! independent sequences from the same seed, which lets the environment keep
//! channel fading, plant noise, measurement noise and packet outcomes on
//! separate streams: consuming more draws on one stream never shifts another.
//! That separation is what makes common-random-number comparisons across
//! policies exact.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-episode stream ids; episode `e` uses ids `e * PER_EPISODE + k`.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const CHANNEL: u64 = 1;
    pub const PLANT: u64 = 2;
    pub const MEASUREMENT: u64 = 3;
    pub const OUTCOME: u64 = 4;
    pub const POLICY: u64 = 5;
    pub const EXPLORATION: u64 = 6;
    pub const PER_EPISODE: u64 = 8;
}

/// Global (episode-independent) stream ids, placed at the top of the id
/// space so they can never collide with per-episode streams.
pub mod stream_global {
    pub const TRAINING: u64 = u64::MAX - 1;
    pub const ACTOR_INIT: u64 = u64::MAX - 2;
    pub const CRITIC1_INIT: u64 = u64::MAX - 3;
    pub const CRITIC2_INIT: u64 = u64::MAX - 4;
    pub const WARMUP: u64 = u64::MAX - 5;
}

/// RNG for `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// RNG for environment stream `kind` of episode `episode`.
pub fn episode_rng(seed: u64, episode: u64, kind: u64) -> ChaCha8Rng {
    stream_rng(seed, episode * stream::PER_EPISODE + kind)
}

/// Snapshot of a ChaCha stream position, sufficient to resume a generator
/// bit-exactly. Stored in checkpoints.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RngCursor {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngCursor {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngCursor {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
