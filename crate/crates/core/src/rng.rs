//! Reproducible random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by a
//! `(key, path index)` pair, so a result depends only on the master seed and
//! never on how paths are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        Self {
            seed: splitmix64(master_seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child key for a named purpose.
    pub fn fork(&self, label: &str) -> Self {
        // FNV-1a over the label, then mixed with the parent seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Self {
            seed: splitmix64(self.seed ^ h.rotate_left(17)),
        }
    }

    pub fn fork_index(&self, index: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    /// Generator for one path.
    pub fn path(&self, index: u64) -> PathRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
