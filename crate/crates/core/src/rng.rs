//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`Stream`] obtained through
//! [`derive_stream`]. A stream is a ChaCha8 generator keyed by the
//! `(root_seed, stream_id)` pair and positioned on a ChaCha stream selected
//! by the task index, so the stream handed to task `k` depends only on
//! `(seed, k)` and never on which thread runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The random generator type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Root of a family of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub const fn new(root_seed: u64) -> Self {
        Self {
            root_seed,
            stream_id: 0,
        }
    }

    pub const fn with_stream(root_seed: u64, stream_id: u64) -> Self {
        Self {
            root_seed,
            stream_id,
        }
    }

    /// A child seed for a sub-pipeline, e.g. one per coverage point.
    pub fn child(&self, stream_id: u64) -> Self {
        Self {
            root_seed: self.root_seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(stream_id.wrapping_add(0x5851_f42d))),
        }
    }
}

/// Returns the stream for `task_index` under `seed`.
pub fn derive_stream(seed: SeedSpec, task_index: u64) -> Stream {
    let mut key = [0u8; 32];
    let mut state = seed.root_seed ^ 0x243f_6a88_85a3_08d3;
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state ^ seed.stream_id.rotate_left(17 * i as u32 + 1));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(task_index);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
