//! Seed derivation. Every run owns one ChaCha stream family keyed by its run
//! seed; each random purpose draws from its own stream so that changing how
//! one component consumes randomness never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random purposes inside one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Endowment = 0,
    Scheduler = 1,
    Expiry = 2,
    Fundamental = 3,
    Decisions = 4,
    Price = 5,
    Fills = 6,
}

pub fn run_seed(master: u64, run: u64) -> u64 {
    master ^ run
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
