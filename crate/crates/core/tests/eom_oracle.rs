//! The assembled linear system checked against two independent constructions:
//! finite differences of closed-form coherent-state overlaps for the matrix,
//! and projections of `H|D⟩` in a truncated Fock basis for the right-hand side.

mod common;

use common::{model_with_modes, random_state, static_field};
use davydov_core::ansatz::MultiD2State;
use davydov_core::dynamics::assemble_eom;
use davydov_core::model::{DrivingField, ModelSpec};
use davydov_core::oracle::{convert_ansatz_to_fock, FockBasisSpec, FockHamiltonian, FockState};
use davydov_core::{Qubits, C64};

/// `⟨z_l(x0)|z_n(x)⟩` over every boson mode, from the closed form.
fn coherent_overlap(bra: &MultiD2State, l: usize, ket: &MultiD2State, n: usize) -> C64 {
    let mut exponent = C64::new(0.0, 0.0);
    for mode in 0..bra.boson_modes() {
        let a = bra.displacement(mode, l);
        let b = ket.displacement(mode, n);
        exponent += -0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b;
    }
    exponent.exp()
}

/// Projection of `|D(x)⟩` onto every frozen test vector built from `x0`,
/// ordered like the parameters.
fn projections(x0: &MultiD2State, x: &MultiD2State) -> Vec<C64> {
    let m = x0.multiplicity();
    let mut out = vec![C64::new(0.0, 0.0); x0.params().len()];
    for l in 0..m {
        for n in 0..m {
            let s = coherent_overlap(x0, l, x, n);
            for q in Qubits::ALL {
                out[x0.amplitude_index(q, l)] += x.amplitude(q, n) * s;
            }
            let theta: C64 = Qubits::ALL
                .iter()
                .map(|&q| x0.amplitude(q, l).conj() * x.amplitude(q, n))
                .sum();
            for mode in 0..x0.boson_modes() {
                out[x0.displacement_index(mode, l)] += theta * x.displacement(mode, n) * s;
            }
        }
    }
    out
}

fn perturbed(state: &MultiD2State, index: usize, delta: C64) -> MultiD2State {
    let mut out = state.clone();
    out.params_mut()[index] += delta;
    out
}

fn check_matrix_against_finite_differences(state: &MultiD2State, model: &ModelSpec) {
    let system = assemble_eom(state, model, 0.3).unwrap();
    let p = system.dimension();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for j in 0..state.params().len() {
        for (part, step) in [(0, C64::new(h, 0.0)), (1, C64::new(0.0, h))] {
            let plus = projections(state, &perturbed(state, j, step));
            let minus = projections(state, &perturbed(state, j, -step));
            let col = 2 * j + part;
            for r in 0..p / 2 {
                let d = (plus[r] - minus[r]) / (2.0 * h);
                worst = worst
                    .max((system.matrix[(2 * r, col)] - d.re).abs())
                    .max((system.matrix[(2 * r + 1, col)] - d.im).abs());
            }
        }
    }
    assert!(worst < 1e-6, "matrix differs from finite differences by {worst:e}");
}

#[test]
fn matrix_is_the_jacobian_of_the_projections_without_bath() {
    let model = model_with_modes(0.2, 0.3, static_field(0.8), static_field(1.3), &[], &[]);
    for seed in 0..3 {
        check_matrix_against_finite_differences(&random_state(3, 0, 0.8, seed), &model);
    }
}

#[test]
fn matrix_is_the_jacobian_of_the_projections_with_bath() {
    let model = model_with_modes(
        0.2,
        0.3,
        static_field(0.8),
        static_field(1.3),
        &[0.5, 1.5],
        &[0.2, 0.1],
    );
    for seed in 10..13 {
        check_matrix_against_finite_differences(&random_state(3, 2, 0.8, seed), &model);
    }
}

/// Creation operator on boson `mode` (0 = left photon, 1 = right, 2+k = bath k).
fn raise(state: &FockState, mode: usize) -> FockState {
    let spec = state.spec;
    let mut out = state.clone();
    out.amplitudes.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
    let mut phonons = vec![0usize; spec.bath_modes];
    for (i, &c) in state.amplitudes.iter().enumerate() {
        let (q, mut nl, mut nr) = spec.decode(i, &mut phonons);
        let n = match mode {
            0 => &mut nl,
            1 => &mut nr,
            k => &mut phonons[k - 2],
        };
        let cutoff = if mode < 2 { spec.n_max_photon } else { spec.n_max_bath };
        if *n == cutoff {
            continue;
        }
        *n += 1;
        let factor = (*n as f64).sqrt();
        out.amplitudes[spec.index(q, nl, nr, &phonons)] += c * factor;
    }
    out
}

/// Branch `l` of `state` alone, with amplitudes replaced by `amplitudes`.
fn single_branch(state: &MultiD2State, l: usize, amplitudes: [C64; 4]) -> MultiD2State {
    let mut out = MultiD2State::zeros(1, state.bath_modes()).unwrap();
    for q in Qubits::ALL {
        out.set_amplitude(q, 0, amplitudes[q as usize]);
    }
    for mode in 0..state.boson_modes() {
        out.set_displacement(mode, 0, state.displacement(mode, l));
    }
    out.time = state.time;
    out
}

fn check_rhs_against_fock(state: &MultiD2State, model: &ModelSpec, spec: &FockBasisSpec, t: f64) {
    let mut state = state.clone();
    state.time = t;
    let system = assemble_eom(&state, model, t).unwrap();
    let ham = FockHamiltonian::new(model, spec).unwrap();
    let ket = convert_ansatz_to_fock(&state, spec).unwrap();
    let mut h_ket = ket.clone();
    ham.apply(t, &ket.amplitudes, &mut h_ket.amplitudes);
    let zero = C64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for l in 0..state.multiplicity() {
        for q in Qubits::ALL {
            let mut unit = [zero; 4];
            unit[q as usize] = C64::new(1.0, 0.0);
            let chi = convert_ansatz_to_fock(&single_branch(&state, l, unit), spec).unwrap();
            let r = state.amplitude_index(q, l);
            let expected = C64::new(0.0, -1.0) * chi.inner(&h_ket);
            let got = C64::new(system.rhs[2 * r], system.rhs[2 * r + 1]);
            worst = worst.max((got - expected).norm());
            scale = scale.max(expected.norm());
        }
        let amps = Qubits::ALL.map(|q| state.amplitude(q, l));
        let base = convert_ansatz_to_fock(&single_branch(&state, l, amps), spec).unwrap();
        for mode in 0..state.boson_modes() {
            let chi = raise(&base, mode);
            let r = state.displacement_index(mode, l);
            let expected = C64::new(0.0, -1.0) * chi.inner(&h_ket);
            let got = C64::new(system.rhs[2 * r], system.rhs[2 * r + 1]);
            worst = worst.max((got - expected).norm());
            scale = scale.max(expected.norm());
        }
    }
    assert!(
        worst < 1e-9 * scale.max(1.0),
        "rhs differs from Fock projection by {worst:e} (scale {scale:e})"
    );
}

#[test]
fn rhs_matches_fock_projection_without_bath() {
    let left = DrivingField::new(0.9, 0.7, 0.4).unwrap();
    let right = DrivingField::new(1.4, 0.2, -1.0).unwrap();
    let model = model_with_modes(0.15, 0.35, left, right, &[], &[]);
    let spec = FockBasisSpec::new(14, 0, 0).unwrap();
    for seed in 20..23 {
        check_rhs_against_fock(&random_state(2, 0, 0.7, seed), &model, &spec, 1.7);
    }
}

#[test]
fn rhs_matches_fock_projection_with_bath() {
    let left = DrivingField::new(0.9, 0.7, 0.4).unwrap();
    let model = model_with_modes(0.15, 0.35, left, static_field(1.1), &[0.5, 1.5], &[0.25, 0.15]);
    let spec = FockBasisSpec::new(12, 12, 2).unwrap();
    for seed in 30..32 {
        check_rhs_against_fock(&random_state(2, 2, 0.55, seed), &model, &spec, 0.6);
    }
}

#[test]
fn metric_solve_agrees_with_the_real_system() {
    use davydov_core::dynamics::{metric, metric_solve, solve_tangent, Regularization};
    use davydov_core::overlap::build_overlap_tables;

    let model = model_with_modes(0.2, 0.3, static_field(0.8), static_field(1.3), &[0.7], &[0.2]);
    for seed in 40..44 {
        let state = random_state(2, 1, 0.8, seed);
        let tables = build_overlap_tables(&state).with_bath(&state, &model.bath);
        let g = metric(&state, &tables);
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                assert!((g[(r, c)] - g[(c, r)].conj()).norm() < 1e-14);
            }
        }
        let system = assemble_eom(&state, &model, 0.0).unwrap();
        let (direct, rd) = solve_tangent(&system, 1e-14, Regularization::Truncation).unwrap();
        let (via_metric, rm) = metric_solve(&state, &tables, &system, 1e-14).unwrap();
        assert_eq!(rd.rank, rd.dimension);
        assert!(rm.residual < 1e-9, "metric residual {:e}", rm.residual);
        let scale = direct.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in direct.values().iter().zip(via_metric.values()) {
            assert!((a - b).norm() < 1e-8 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn regularized_metric_solve_is_tikhonov_in_normalized_coordinates() {
    use davydov_core::dynamics::{metric, metric_solve, solve_tangent, Regularization};
    use davydov_core::overlap::build_overlap_tables;

    let model = model_with_modes(0.2, 0.3, static_field(0.8), static_field(1.3), &[0.7], &[0.2]);
    for (seed, rcond) in [(50, 1e-2), (51, 1e-3), (52, 3e-2)] {
        let mut state = random_state(3, 1, 0.8, seed);
        // A nearly empty branch makes the penalty weighting matter.
        for q in Qubits::ALL {
            let a = state.amplitude(q, 2);
            state.set_amplitude(q, 2, a * 1e-4);
        }
        let tables = build_overlap_tables(&state).with_bath(&state, &model.bath);
        let lambda_max = metric(&state, &tables)
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap()
            .into_iter()
            .fold(0.0, f64::max);
        let system = assemble_eom(&state, &model, 0.3).unwrap();
        let sigma_max = system.matrix.singular_values().unwrap().into_iter().fold(0.0, f64::max);
        let (real, _) =
            solve_tangent(&system, rcond * lambda_max / sigma_max, Regularization::Tikhonov).unwrap();
        let (via_metric, _) = metric_solve(&state, &tables, &system, rcond).unwrap();
        let scale = real.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in real.values().iter().zip(via_metric.values()) {
            assert!((a - b).norm() < 1e-9 * scale, "{a} vs {b}");
        }
    }
}
