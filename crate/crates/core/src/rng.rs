//! Seeded, independently derived random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by
//! `(seed, domain, index)`, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Randomness consumers, one stream family each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    DriftSignal = 1,
    DriftIdler = 2,
    Counts = 3,
}

/// SplitMix64 finalizer, used to decorrelate nearby seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a secondary seed into a primary one.
pub fn combine(seed: u64, salt: u64) -> u64 {
    mix(seed ^ mix(salt))
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(mix(seed ^ mix(domain as u64)));
    rng.set_stream(index);
    rng
}
