use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Named random streams used during training. Each is an independent ChaCha
/// stream of the same seed, so runs are reproducible and a checkpoint can
/// restore every stream at its exact position.
#[derive(Debug, Clone, PartialEq)]
pub struct RngStreams {
    pub dropout_g: ChaCha8Rng,
    pub dropout_d: ChaCha8Rng,
    pub latent: ChaCha8Rng,
    pub batches: ChaCha8Rng,
}

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub const STREAM_INIT_G: u64 = 1;
pub const STREAM_INIT_D: u64 = 2;
const STREAM_DROPOUT_G: u64 = 3;
const STREAM_DROPOUT_D: u64 = 4;
const STREAM_LATENT: u64 = 5;
const STREAM_BATCHES: u64 = 6;

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            dropout_g: stream(seed, STREAM_DROPOUT_G),
            dropout_d: stream(seed, STREAM_DROPOUT_D),
            latent: stream(seed, STREAM_LATENT),
            batches: stream(seed, STREAM_BATCHES),
        }
    }

    pub fn snapshot(&self) -> [RngState; 4] {
        [
            RngState::of(&self.dropout_g),
            RngState::of(&self.dropout_d),
            RngState::of(&self.latent),
            RngState::of(&self.batches),
        ]
    }

    pub fn restore(states: &[RngState; 4]) -> Self {
        Self {
            dropout_g: states[0].rng(),
            dropout_d: states[1].rng(),
            latent: states[2].rng(),
            batches: states[3].rng(),
        }
    }
}

/// Exact position of a ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn of(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::from_seed(self.seed);
        r.set_stream(self.stream);
        r.set_word_pos(self.word_pos);
        r
    }
}
