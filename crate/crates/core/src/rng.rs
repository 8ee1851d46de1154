//! Seed derivation for reproducible sampling.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from
//! `(seed, epoch, a, b)` through [`stream_seed`]. The serial sweeper uses
//! coordinates `(0, 0)`, copy/merge worker `p` uses `(p, 0)`, and block
//! `(row, col)` of the block scheduler uses `(row, col)`. Epoch is the
//! zero-based sweep index; initialization uses [`INIT_EPOCH`]. Because the
//! stream only depends on these values, a run resumed at sweep `t` draws the
//! same numbers as an uninterrupted one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LdaRng = ChaCha8Rng;

/// Epoch tag reserved for topic initialization.
pub const INIT_EPOCH: u64 = u64::MAX;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn stream_seed(seed: u64, epoch: u64, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed);
    for v in [epoch, a, b] {
        h = splitmix64(h ^ v);
    }
    h
}

pub fn stream(seed: u64, epoch: u64, a: u64, b: u64) -> LdaRng {
    LdaRng::seed_from_u64(stream_seed(seed, epoch, a, b))
}
