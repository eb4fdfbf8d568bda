//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the master
//! seed and selected by a `(domain, index)` pair, so a trial's draws do not
//! depend on which worker runs it or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMat, C64};

pub type SimRng = ChaCha8Rng;

/// Stream domains. Distinct domains never share a ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Scenario = 1,
    Trial = 2,
    Oracle = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix64((domain as u64) << 56 ^ index));
    rng
}

/// One ZMCSCG sample with the given variance: two real Gaussians scaled by
/// `sqrt(variance / 2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Matrix of i.i.d. ZMCSCG entries, filled column-major.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng, variance);
        }
    }
    m
}

/// Uniform phase on `[0, 2π)`.
pub fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    C64::from_polar(1.0, phi)
}
