mod common;

use common::{model_with_modes, static_field};
use davydov_core::ansatz::{parameter_count, MultiD2State};
use davydov_core::dynamics::time_derivative;
use davydov_core::model::DrivingField;
use davydov_core::observables::evaluate;
use davydov_core::oracle::{convert_ansatz_to_fock, FockBasisSpec};
use davydov_core::{Qubits, SolverSettings, C64};
use proptest::prelude::*;

fn state(m: usize, n: usize, width: f64) -> impl Strategy<Value = MultiD2State> {
    prop::collection::vec((-width..width, -width..width), parameter_count(m, n)).prop_map(move |v| {
        let params = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        MultiD2State::from_params(m, n, 0.0, params).unwrap()
    })
}

fn shaped(width: f64) -> impl Strategy<Value = MultiD2State> {
    (1usize..=3, 0usize..=2).prop_flat_map(move |(m, n)| state(m, n, width))
}

fn mirrored(s: &MultiD2State) -> MultiD2State {
    let mut out = s.clone();
    for n in 0..s.multiplicity() {
        for q in Qubits::ALL {
            out.set_amplitude(q.mirrored(), n, s.amplitude(q, n));
        }
        out.set_displacement(0, n, s.displacement(1, n));
        out.set_displacement(1, n, s.displacement(0, n));
    }
    out
}

fn bath_for(n: usize) -> (Vec<f64>, Vec<f64>) {
    let freqs = [0.4, 1.3][..n].to_vec();
    let phis = [0.2, 0.1][..n].to_vec();
    (freqs, phis)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn checkpoint_records_round_trip_exactly(s in shaped(3.0), t in 0.0..1e3f64) {
        let mut s = s;
        s.time = t;
        let back = MultiD2State::from_record(&s.to_record(), s.multiplicity(), s.bath_modes()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn mirroring_swaps_left_and_right_observables(s in shaped(0.9), t in 0.0..5.0f64) {
        let (freqs, phis) = bath_for(s.bath_modes());
        let left = DrivingField::new(0.8, 0.4, 0.1).unwrap();
        let right = static_field(1.3);
        let model = model_with_modes(0.2, 0.3, left, right, &freqs, &phis);
        let swapped = model_with_modes(0.2, 0.3, right, left, &freqs, &phis);
        let mut s = s;
        s.time = t;
        let a = evaluate(&s, &model).unwrap();
        let b = evaluate(&mirrored(&s), &swapped).unwrap();
        let scale = a.norm.max(1.0);
        for (x, y) in [
            (a.n_left, b.n_right),
            (a.n_right, b.n_left),
            (a.sigma_z_left, b.sigma_z_right),
            (a.sigma_z_right, b.sigma_z_left),
            (a.norm, b.norm),
            (a.energy, b.energy),
        ] {
            prop_assert!((x - y).abs() < 1e-10 * scale, "{} vs {}", x, y);
        }
    }

    #[test]
    fn fock_expansion_preserves_the_norm(s in (1usize..=2).prop_flat_map(|m| state(m, 1, 0.6))) {
        let spec = FockBasisSpec::new(12, 12, 1).unwrap();
        let fock = convert_ansatz_to_fock(&s, &spec).unwrap();
        let ansatz = evaluate(&s, &model_with_modes(0.1, 0.2, static_field(1.0), static_field(1.0), &[0.5], &[0.1]))
            .unwrap()
            .norm;
        prop_assert!((fock.norm() - ansatz).abs() < 1e-8 * ansatz.max(1.0));
    }

    #[test]
    fn tangent_conserves_the_norm_to_first_order(s in (1usize..=2).prop_flat_map(|m| state(m, 1, 0.8))) {
        let model = model_with_modes(0.2, 0.3, static_field(0.9), static_field(1.4), &[0.6], &[0.15]);
        let (tangent, report) = time_derivative(&s, &model, SolverSettings::default()).unwrap();
        prop_assume!(report.residual < 1e-6);
        let h = 1e-5;
        let shifted = |sign: f64| {
            let params = s.params().iter().zip(tangent.values()).map(|(p, v)| p + v * (sign * h)).collect();
            MultiD2State::from_params(s.multiplicity(), 1, 0.0, params).unwrap().norm()
        };
        let rate = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let speed = tangent.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(rate.abs() < 1e-6 * s.norm().max(1.0) * speed.max(1.0), "d|D|^2/dt = {}", rate);
    }
}
