#![allow(dead_code)]

use davydov_core::ansatz::{parameter_count, MultiD2State};
use davydov_core::model::{BathSpec, DiscretizedBath, DrivingField, ModelSpec};
use davydov_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every parameter uniform in the square `|Re|, |Im| < half_width`.
pub fn random_state(m: usize, n: usize, half_width: f64, seed: u64) -> MultiD2State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = (0..parameter_count(m, n))
        .map(|_| {
            C64::new(
                rng.random_range(-half_width..half_width),
                rng.random_range(-half_width..half_width),
            )
        })
        .collect();
    MultiD2State::from_params(m, n, 0.0, params).unwrap()
}

pub fn model_with_modes(
    j: f64,
    g: f64,
    left: DrivingField,
    right: DrivingField,
    freqs: &[f64],
    phis: &[f64],
) -> ModelSpec {
    let bath = if freqs.is_empty() {
        DiscretizedBath::empty()
    } else {
        DiscretizedBath::from_modes(freqs.to_vec(), phis.to_vec()).unwrap()
    };
    ModelSpec::with_bath(j, g, left, right, BathSpec::none(), bath).unwrap()
}

pub fn static_field(a: f64) -> DrivingField {
    DrivingField::constant(a).unwrap()
}
