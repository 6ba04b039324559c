//! Seeded random streams.
//!
//! Every random draw in the crate comes from `ChaCha8Rng` seeded with the
//! caller's 64-bit seed and switched to a fixed stream id. The stream id
//! names the purpose of the draws, so applying detection mismatch to a
//! dataset never depends on how many samples were spent generating it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids, one per independent consumer of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    TransmissionX = 1,
    TransmissionP = 2,
    VacuumX = 3,
    VacuumP = 4,
    PirMixtureX = 5,
    PirMixtureP = 6,
    TapSignal = 7,
    TapLocalOscillator = 8,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
