//! Seeded random streams.
//!
//! Every stream is derived from a master seed and a list of identity parts
//! (replication, horizon, purpose, ...), so the draws a run sees never depend
//! on which worker executes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream in the crate.
pub type Stream = ChaCha8Rng;

/// What a stream is used for inside a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Context = 1,
    Loss = 2,
    Presample = 3,
    MonteCarlo = 4,
    Probe = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `master`, order-sensitively.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Opens the stream for `purpose` under a run seed.
pub fn stream(seed: u64, purpose: Purpose) -> Stream {
    Stream::seed_from_u64(derive_seed(seed, &[purpose as u64]))
}
