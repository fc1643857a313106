//! Counter-based seed derivation.
//!
//! Every derived seed is a pure function of (master, stream, index), so adding
//! trials never perturbs the seeds of earlier ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Independent seed streams, one per experiment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Coupling = 1,
    Tomography = 2,
    Qkd = 3,
    Zernike = 4,
    Fried = 5,
    Screens = 6,
}

pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}
