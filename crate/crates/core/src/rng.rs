// SPDX-License-Identifier: Apache-2.0

//! Named random sub-streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    GridDirections,
    ScenarioData,
    DualSample,
    Tau,
    Audit,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::GridDirections => 0x6772_6964,
            Stream::ScenarioData => 0x7363_656e,
            Stream::DualSample => 0x6475_616c,
            Stream::Tau => 0x0074_6175,
            Stream::Audit => 0x6175_6474,
        }
    }
}

/// Generator for `(seed, stream, index)`; distinct indices give independent
/// ChaCha streams, so replications can run in any order.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.tag().rotate_left(32));
    rng.set_stream(index);
    rng
}

/// Plain seed for a sub-stream, for APIs that take a `u64`.
pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed ^ stream.tag();
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
