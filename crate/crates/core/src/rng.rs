//! Addressable random streams.
//!
//! Every stochastic draw in a simulation is made from a stream keyed by
//! `(seed, purpose, round, client, step)`. Streams are independent of the
//! order in which they are created, so clients can run on any thread and
//! still produce the same trajectory as a sequential run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to objectives and samplers.
pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Server-side client sampling, keyed by round.
    Sample,
    /// Local SGD draws, keyed by (round, client, step).
    Local,
    /// Stochastic gradients that initialize Scaffold-P control variates.
    ControlInit,
    /// Synthetic instance generation.
    Synth,
    /// Dataset shuffling.
    Partition,
    /// Probe points for constant estimation.
    Probe,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Sample => 0x5341_4d50,
            Purpose::Local => 0x4c4f_4341,
            Purpose::ControlInit => 0x4356_494e,
            Purpose::Synth => 0x5359_4e54,
            Purpose::Partition => 0x5041_5254,
            Purpose::Probe => 0x5052_4f42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub round: u64,
    pub client: u64,
    pub step: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        StreamKey {
            seed,
            purpose,
            round: 0,
            client: 0,
            step: 0,
        }
    }

    pub fn round(mut self, t: usize) -> Self {
        self.round = t as u64;
        self
    }

    pub fn client(mut self, i: usize) -> Self {
        self.client = i as u64;
        self
    }

    pub fn step(mut self, k: usize) -> Self {
        self.step = k as u64;
        self
    }

    pub fn rng(&self) -> SimRng {
        let mut state = self.seed;
        let mut seed = [0u8; 32];
        let words = [self.purpose.tag(), self.round, self.client, self.step];
        for (chunk, word) in seed.chunks_exact_mut(8).zip(words) {
            state = splitmix64(state ^ splitmix64(word));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
