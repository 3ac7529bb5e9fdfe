//! Counter-based random substreams.
//!
//! Every trial owns a ChaCha8 stream selected by its index, so a trial's draws
//! depend only on `(master_seed, trial_index)` and never on how trials are
//! partitioned across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the simulator.
pub type Stream = ChaCha8Rng;

/// Factory for per-trial substreams derived from one master seed.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    key: <ChaCha8Rng as SeedableRng>::Seed,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..16].copy_from_slice(b"pdc-qkd\0");
        Self { key }
    }

    /// Independent stream for trial `index`.
    pub fn stream(&self, index: u64) -> Stream {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}
