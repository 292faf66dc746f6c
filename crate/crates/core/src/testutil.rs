//! Helpers shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{parameter_count, MultiD2State};
use crate::C64;

/// A state with every parameter drawn uniformly from the square `|Re|, |Im| < 0.8`.
pub(crate) fn random_state(m: usize, n: usize, seed: u64) -> MultiD2State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = (0..parameter_count(m, n))
        .map(|_| C64::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)))
        .collect();
    MultiD2State::from_params(m, n, 0.0, params).unwrap()
}
