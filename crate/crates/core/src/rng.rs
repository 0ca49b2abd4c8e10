//! Counter-based derivation of independent random streams.
//!
//! Every random quantity in a campaign is drawn from a ChaCha stream keyed by
//! `(master seed, trial, user, purpose, slot)`. Streams never share state, so
//! adding a scheme or reordering work cannot perturb the channel draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Each purpose gets a disjoint key space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    UserPlacement = 1,
    FadingPhases = 2,
    ShadowFading = 3,
    LosState = 4,
    PredictionError = 5,
}

/// Root of a stream hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Child tree for one Monte Carlo trial.
    pub fn trial(&self, trial: u64) -> SeedTree {
        SeedTree {
            master: splitmix64(self.master ^ splitmix64(trial.wrapping_add(0xA5A5_0000))),
        }
    }

    /// Stream for `(user, purpose, slot)` under this tree.
    pub fn stream(&self, user: u64, purpose: Purpose, slot: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let words = [
            splitmix64(self.master),
            splitmix64(self.master ^ splitmix64(user ^ 0x1000_0000_0000)),
            splitmix64(self.master ^ splitmix64((purpose as u64) << 48)),
            splitmix64(self.master ^ splitmix64(slot ^ 0x2000_0000_0000_0000)),
        ];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
