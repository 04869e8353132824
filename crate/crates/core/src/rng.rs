//! Deterministic, splittable random streams.
//!
//! Every random decision in the laboratory is drawn from a stream keyed by
//! `(master seed, domain, trial, unit)`. A stream is a ChaCha generator whose
//! 256-bit key is exactly that tuple, so any trial can be regenerated in
//! isolation: results are independent of execution order and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tag for fault-pattern sampling.
pub const DOMAIN_FAULTS: u64 = 1;
/// Domain tag for stabilizer measurement coin flips.
pub const DOMAIN_COINS: u64 = 2;
/// Domain tag for sampling channel inputs (e.g. Pauli errors of a physical channel).
pub const DOMAIN_CHANNEL: u64 = 3;
/// Domain tag for codebook draws and other Shannon-lab sampling.
pub const DOMAIN_SHANNON: u64 = 4;
/// Domain tag for optimizer restarts.
pub const DOMAIN_OPTIMIZER: u64 = 5;

/// An independent generator for the given key tuple.
pub fn stream(master: u64, domain: u64, trial: u64, unit: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&domain.to_le_bytes());
    seed[16..24].copy_from_slice(&trial.to_le_bytes());
    seed[24..32].copy_from_slice(&unit.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}
