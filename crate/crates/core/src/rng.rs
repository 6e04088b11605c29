//! Named random substreams derived from a single user seed.
//!
//! Every consumer of randomness gets its own ChaCha stream so that, for
//! example, the data split is identical across ablation variants whose
//! training consumes different amounts of randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generator,
    Split,
    Init,
    /// Neighbor/negative sampling for one epoch.
    Sampling(u32),
    Uniformity(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Generator => 1,
            Stream::Split => 2,
            Stream::Init => 3,
            Stream::Sampling(e) => (4 << 32) | u64::from(e),
            Stream::Uniformity(e) => (5 << 32) | u64::from(e),
        }
    }
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
