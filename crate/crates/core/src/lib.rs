//! Statistical machinery for coordinated data submission on learning
//! platforms: modification strategies a collective can play, finite-sample
//! lower bounds on the success it can certify from its own pooled data, a
//! platform simulator measuring the true test-time success, and the
//! infinite-data-regime limits of the bounds.

pub mod bounds;
pub mod car;
pub mod concentration;
pub mod error;
pub mod platform;
pub mod strategies;
pub mod sweep;
pub mod tabular;

pub use error::{Error, Result};

/// splitmix64 step over (seed, stream): cheap independent sub-seeds.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
