//! Seed derivation. Every stochastic stage draws from its own generator,
//! seeded by hashing the master seed with a stage name and indices, so
//! results never depend on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(stage, indices)` under `master`.
pub fn derive(master: u64, stage: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix(master);
    for b in stage.bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    // Separates the stage name from the index list.
    h = splitmix(h ^ 0xff);
    for &i in indices {
        h = splitmix(h ^ i);
    }
    h
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(master: u64, stage: &str, indices: &[u64]) -> Rng {
    rng(derive(master, stage, indices))
}
