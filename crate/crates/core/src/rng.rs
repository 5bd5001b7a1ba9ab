//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! run seed, so enabling one feature (dropout, sampling, ...) never shifts
//! the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags for independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Sampling = 3,
    Folds = 4,
    Split = 5,
    Labels = 6,
    Classifier = 7,
    Bench = 8,
    Synthetic = 9,
}

/// A generator for `(seed, purpose)`; `sub` further separates e.g. tensors.
pub fn stream(seed: u64, purpose: Stream, sub: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | (sub & 0xffff_ffff));
    rng
}
