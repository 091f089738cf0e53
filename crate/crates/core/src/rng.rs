//! Per-trial random streams.
//!
//! Every trial owns a ChaCha stream keyed by `(master_seed, trial_index)`, so
//! results do not depend on the order in which trials are run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

pub fn trial_stream(master_seed: u64, trial_index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Derive an independent master seed for a sub-experiment.
pub fn derive_seed(master_seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
