//! Seeded generators and fixtures shared by the test suites.

pub mod corpus;
pub mod golden;
pub mod layouts;
pub mod matrices;
pub mod sessions;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
