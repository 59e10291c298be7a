//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, domain, stream id)`. Edge states use the unordered site pair as the
//! stream id and walks use the caller's path id, so results never depend on
//! iteration order or on how work is split between threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Separates the streams of unrelated consumers sharing one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Edges,
    Walk,
    Trials,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Edges => 0x6564_6765_735f_7263,
            Domain::Walk => 0x7761_6c6b_5f72_636d,
            Domain::Trials => 0x7472_6961_6c73_5f72,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StreamFactory {
    key: [u8; 32],
}

impl StreamFactory {
    pub fn new(seed: u64, domain: Domain) -> Self {
        let key = ChaCha8Rng::seed_from_u64(seed ^ domain.tag()).get_seed();
        StreamFactory { key }
    }

    pub fn stream(&self, id: u64) -> Stream {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        Stream(rng)
    }
}

/// One independent random stream.
#[derive(Clone, Debug)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    /// Rewinds to the start of stream `id` under the same key.
    pub fn reset(&mut self, id: u64) {
        self.0.set_stream(id);
        self.0.set_word_pos(0);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_pos(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential with the given rate; never exactly 0.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.uniform_open()) / rate
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let i = (self.uniform() * n as f64) as usize;
        i.min(n - 1)
    }
}
