//! Derivation of per-purpose seeds from the single `--seed` flag.
//!
//! Each purpose owns a ChaCha8 stream of the master seed; the sub-seed is the
//! first 64-bit word of that stream. Adding a purpose never changes the
//! seeds of the existing ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Synth = 1,
    Calibrate = 2,
    Bootstrap = 3,
    GradCheck = 4,
}

pub fn derive(master: u64, purpose: Purpose) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(purpose as u64);
    rng.next_u64()
}
