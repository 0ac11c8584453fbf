//! Seeded counter-based random streams.
//!
//! Every stochastic step draws from `stream(seed, id)`, where `id` names the
//! step (an iteration number, a pixel batch). Results therefore depend only
//! on the seed and the step, never on how many numbers earlier steps drew.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
