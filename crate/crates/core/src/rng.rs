//! Deterministic random streams.
//!
//! A stream is addressed by `(master_seed, stream_index)`. The master seed is
//! expanded into a ChaCha20 key and the stream index selects the ChaCha
//! stream (nonce), so distinct indices give independent sequences and the
//! output does not depend on platform, thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Address of one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Same master seed, different index.
    pub fn with_index(&self, stream_index: u64) -> Self {
        Self::new(self.master_seed, stream_index)
    }
}
