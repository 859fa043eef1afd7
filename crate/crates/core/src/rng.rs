//! Named random streams derived from one master seed per run.
//!
//! Every run owns a master seed. Environment noise and policy randomization are
//! drawn from separate ChaCha streams so that two policies run with the same
//! seed see exactly the same noise realization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    StateNoise,
    RewardNoise,
    Policy,
    Inputs,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::StateNoise => 1,
            Stream::RewardNoise => 2,
            Stream::Policy => 3,
            Stream::Inputs => 4,
        }
    }
}

pub fn stream(master_seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which.id());
    rng
}
