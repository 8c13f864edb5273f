//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream keyed by
//! `(seed, tag, index)`, so draws for one purpose never shift when another
//! purpose consumes more or fewer numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cplx::C64;

pub mod tags {
    pub const DISTANCES: u64 = 1;
    pub const CHANNELS: u64 = 2;
    pub const ESTIMATE_ERROR: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const INIT: u64 = 5;
    pub const DATA: u64 = 6;
    pub const INJECTED: u64 = 7;
    pub const MONTE_CARLO: u64 = 8;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a child purpose, e.g. the noise of round `index`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

/// Independent stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let sd = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(sd * re, sd * im)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, var: f64) -> Vec<C64> {
    (0..len).map(|_| complex_gaussian(rng, var)).collect()
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
