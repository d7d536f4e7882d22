//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a master seed and positioned on
//! its own stream index, so replication `i` draws the same numbers regardless
//! of how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Draws `count` independent standard normals from `rng`.
pub fn standard_normal_draws<T: Real, R: rand::Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<T> {
    (0..count)
        .map(|_| T::lit(StandardNormal.sample(rng)))
        .collect()
}

/// One standard normal.
#[inline]
pub fn standard_normal<T: Real, R: rand::Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}
