mod common;

use common::{model_with_modes, random_state, static_field};
use davydov_core::dynamics::{assemble_eom, metric_solve, time_derivative};
use davydov_core::{
    build_overlap_tables, initial_state, propagate, rk4_step, BathSpec, DrivingField,
    DynamicsSettings, ModelSpec, MultiD2State, ObservableRecord, Qubits, SolverSettings,
    StepControl, TrajectorySink, C64,
};

fn collect(
    state: MultiD2State,
    model: &ModelSpec,
    t_max: f64,
    settings: &DynamicsSettings,
) -> (MultiD2State, Vec<ObservableRecord>) {
    let mut records = Vec::new();
    let (end, _) = propagate(state, model, t_max, settings, &mut |r: &ObservableRecord| {
        records.push(r.clone())
    })
    .unwrap();
    (end, records)
}

#[test]
fn decoupled_static_qubit_only_rotates_its_phase() {
    let (dl, dr) = (0.7, 1.9);
    let model = model_with_modes(0.0, 0.0, static_field(dl), static_field(dr), &[], &[]);
    let state = initial_state(1, 0, 0.0, 0.0, 0).unwrap();
    let (tangent, _) = time_derivative(&state, &model, SolverSettings::default()).unwrap();
    let d = state.amplitude_index(Qubits::DownDown, 0);
    for (i, v) in tangent.values().iter().enumerate() {
        let expected = if i == d {
            C64::new(0.0, 0.5 * (dl + dr))
        } else {
            C64::new(0.0, 0.0)
        };
        assert!((v - expected).norm() < 1e-12, "parameter {i}: {v}");
    }
}

#[test]
fn single_branch_photons_follow_the_free_two_mode_equations() {
    let j = 0.4;
    let model = model_with_modes(j, 0.0, static_field(0.6), static_field(1.2), &[], &[]);
    for seed in 0..3 {
        let state = random_state(1, 0, 0.7, seed);
        let (tangent, _) = time_derivative(&state, &model, SolverSettings::default()).unwrap();
        let v = tangent.values();
        let (mu, nu) = (state.displacement(0, 0), state.displacement(1, 0));
        let i = C64::new(0.0, 1.0);
        let mu_dot = -i * mu + i * j * nu;
        let nu_dot = -i * nu + i * j * mu;
        assert!((v[state.displacement_index(0, 0)] - mu_dot).norm() < 1e-10);
        assert!((v[state.displacement_index(1, 0)] - nu_dot).norm() < 1e-10);
    }
}

#[test]
fn initial_state_with_full_bath_is_solved_to_round_off() {
    let model = ModelSpec::new(
        0.05,
        0.3,
        static_field(1.0),
        static_field(1.0),
        BathSpec::new(0.1, 0.5, 1.0, 20.0, 60).unwrap(),
    )
    .unwrap();
    let state = initial_state(6, 60, 20.0, 1e-3, 1).unwrap();
    let tables = build_overlap_tables(&state).with_bath(&state, &model.bath);
    let system = assemble_eom(&state, &model, 0.0).unwrap();
    let (_, report) = metric_solve(&state, &tables, &system, SolverSettings::default().rcond).unwrap();
    assert!(report.residual < 1e-8, "residual {:e}", report.residual);
}

#[test]
fn photons_hop_as_squared_cosine() {
    let j = 0.05;
    let model = model_with_modes(j, 0.0, static_field(1.0), static_field(1.0), &[], &[]);
    let settings = DynamicsSettings {
        dt: 1e-3,
        sample_every: 1000,
        ..DynamicsSettings::default()
    };
    let t = 1.0 / j;
    let (_, records) = collect(initial_state(2, 0, 20.0, 1e-3, 4).unwrap(), &model, t, &settings);
    let last = records.last().unwrap();
    assert!((last.tj - 1.0).abs() < 1e-12);
    let expected = 20.0 * (j * t).cos().powi(2);
    assert!((last.n_left - expected).abs() < 1e-6, "{} vs {expected}", last.n_left);
}

#[test]
fn empty_uncoupled_resonators_do_not_move() {
    // H annihilates |↓↓, 0, 0⟩ when every coupling and splitting vanishes.
    let model = model_with_modes(0.0, 0.0, static_field(0.0), static_field(0.0), &[], &[]);
    let mut state = initial_state(1, 0, 0.0, 0.0, 0).unwrap();
    let start = state.clone();
    for _ in 0..10 {
        state = rk4_step(&state, &model, 0.1, SolverSettings::default()).unwrap().0;
    }
    assert!((state.time - 1.0).abs() < 1e-12);
    for (a, b) in state.params().iter().zip(start.params()) {
        assert!((a - b).norm() < 1e-14);
    }
}

#[test]
fn zero_duration_emits_only_the_initial_sample() {
    let model = model_with_modes(0.05, 0.3, static_field(1.0), static_field(1.0), &[0.5], &[0.1]);
    let state = initial_state(2, 1, 3.0, 1e-3, 2).unwrap();
    let (end, records) = collect(state.clone(), &model, 0.0, &DynamicsSettings::default());
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].t, 0.0);
    assert_eq!(end, state);
}

#[test]
fn adaptive_control_tracks_a_fine_fixed_step() {
    let model = model_with_modes(
        0.05,
        0.3,
        DrivingField::new(1.0, 0.5, 0.0).unwrap(),
        static_field(1.0),
        &[0.5, 1.5],
        &[0.1, 0.15],
    );
    let state = initial_state(2, 2, 4.0, 1e-3, 3).unwrap();
    let fixed = DynamicsSettings {
        sample_every: 200,
        ..DynamicsSettings::default()
    };
    let adaptive = DynamicsSettings {
        step_control: StepControl::Adaptive {
            tolerance: 1e-8,
            min_dt: 1e-6,
            max_dt: 0.02,
        },
        ..fixed
    };
    let fine = DynamicsSettings {
        dt: 2.5e-4,
        sample_every: 2000,
        ..fixed
    };
    let (_, a) = collect(state.clone(), &model, 3.0, &fixed);
    let (_, b) = collect(state.clone(), &model, 3.0, &adaptive);
    let (_, c) = collect(state, &model, 3.0, &fine);
    assert_eq!(a.len(), c.len());
    assert_eq!(b.len(), c.len());
    let gap = |x: &ObservableRecord, z: &ObservableRecord| {
        assert!((x.t - z.t).abs() < 1e-12);
        (x.n_left - z.n_left).abs().max((x.sigma_z_left - z.sigma_z_left).abs())
    };
    // The default fixed step is coarse while spare branches leave the
    // vacuum; the error test resolves that transient.
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert!(gap(y, z) < 1e-6, "adaptive at t = {}: {:e}", z.t, gap(y, z));
        assert!(gap(x, z) < 1e-3, "fixed at t = {}: {:e}", z.t, gap(x, z));
    }
}

#[derive(Default)]
struct Counting {
    samples: usize,
    checkpoints: Vec<(usize, f64)>,
}

impl TrajectorySink for Counting {
    fn record(&mut self, _record: &ObservableRecord) {
        self.samples += 1;
    }

    fn checkpoint(&mut self, state: &MultiD2State, sample: usize) {
        self.checkpoints.push((sample, state.time));
    }
}

#[test]
fn checkpoints_follow_the_sample_count() {
    let model = model_with_modes(0.05, 0.3, static_field(1.0), static_field(1.0), &[], &[]);
    let settings = DynamicsSettings {
        sample_every: 40,
        checkpoint_every: 3,
        ..DynamicsSettings::default()
    };
    let mut sink = Counting::default();
    propagate(initial_state(2, 0, 2.0, 1e-3, 5).unwrap(), &model, 1.0, &settings, &mut sink).unwrap();
    assert_eq!(sink.samples, 11);
    let samples: Vec<usize> = sink.checkpoints.iter().map(|c| c.0).collect();
    assert_eq!(samples, [3, 6, 9]);
    for (sample, t) in sink.checkpoints {
        assert!((t - sample as f64 * 0.1).abs() < 1e-12);
    }
}

#[test]
fn energy_is_conserved_without_driving() {
    let model = model_with_modes(0.05, 0.3, static_field(1.0), static_field(1.0), &[], &[]);
    let (_, records) = collect(
        initial_state(2, 0, 20.0, 1e-3, 6).unwrap(),
        &model,
        5.0 / 0.05,
        &DynamicsSettings::default(),
    );
    let e0 = records[0].energy;
    for r in &records {
        assert!(((r.energy - e0) / e0).abs() < 1e-4, "t = {}: {} vs {e0}", r.t, r.energy);
    }
}

#[test]
fn photon_number_is_conserved_without_qubit_coupling() {
    let model = model_with_modes(
        0.05,
        0.0,
        DrivingField::new(2.0, 0.7, 0.0).unwrap(),
        static_field(1.0),
        &[0.3, 0.9, 2.0],
        &[0.2, 0.2, 0.1],
    );
    let (_, records) = collect(
        initial_state(3, 3, 20.0, 1e-3, 7).unwrap(),
        &model,
        10.0,
        &DynamicsSettings::default(),
    );
    for r in &records {
        assert!((r.total - 20.0).abs() < 1e-6, "t = {}: {}", r.t, r.total);
    }
}

fn mirrored(state: &MultiD2State) -> MultiD2State {
    let mut out = state.clone();
    for n in 0..state.multiplicity() {
        for q in Qubits::ALL {
            out.set_amplitude(q.mirrored(), n, state.amplitude(q, n));
        }
        out.set_displacement(0, n, state.displacement(1, n));
        out.set_displacement(1, n, state.displacement(0, n));
    }
    out
}

#[test]
fn mirrored_start_gives_mirrored_trajectory() {
    let left = DrivingField::new(1.0, 0.5, 0.3).unwrap();
    let right = static_field(0.6);
    let freqs = [0.4, 1.1];
    let phis = [0.15, 0.1];
    let model = model_with_modes(0.05, 0.3, left, right, &freqs, &phis);
    let swapped = model_with_modes(0.05, 0.3, right, left, &freqs, &phis);
    let state = initial_state(2, 2, 4.0, 1e-3, 8).unwrap();
    let settings = DynamicsSettings {
        sample_every: 100,
        ..DynamicsSettings::default()
    };
    let (_, a) = collect(state.clone(), &model, 5.0, &settings);
    let (_, b) = collect(mirrored(&state), &swapped, 5.0, &settings);
    for (x, y) in a.iter().zip(&b) {
        for (p, q) in [
            (x.n_left, y.n_right),
            (x.n_right, y.n_left),
            (x.sigma_z_left, y.sigma_z_right),
            (x.sigma_z_right, y.sigma_z_left),
        ] {
            assert!((p - q).abs() < 1e-8, "t = {}: {p} vs {q}", x.t);
        }
    }
}
