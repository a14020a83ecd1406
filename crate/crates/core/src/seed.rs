//! Seed fan-out.
//!
//! A single `u64` base seed drives every random draw. Each purpose gets its
//! own ChaCha stream id, so adding a new kind of draw never shifts the values
//! an existing purpose sees. Per-run and per-trial generators further mix an
//! index into the seed with SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids. These are part of the reproducibility contract; never renumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    GraphEdges = 1,
    Features = 2,
    GaussianNoise = 3,
    FlipNoise = 4,
    Split = 5,
    Init = 6,
    Dropout = 7,
    Attack = 8,
    MonteCarlo = 9,
    Labels = 10,
    Verify = 11,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

/// Generator for item `index` (a trial, an epoch) within a stream.
pub fn rng_indexed(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64(index.wrapping_add(0x5EED)));
    rng(mixed, stream)
}
