//! Seeding conventions.
//!
//! Every stochastic component draws from [`SimRng`], a PCG-XSL-RR 128/64
//! generator (`rand_pcg::Pcg64`). Child seeds are derived with a SplitMix64
//! finalizer so that streams for different purposes never share state.

use rand::SeedableRng;

pub type SimRng = rand_pcg::Pcg64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream label.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
