//! Expectation values reported along a trajectory.
//!
//! All values are bare expectations in the (possibly slightly unnormalized)
//! trial state; the norm is reported alongside so callers may normalize.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::ansatz::MultiD2State;
use crate::model::{ModelSpec, PHOTON_FREQUENCY};
use crate::overlap::{build_overlap_tables, OverlapTables};
use crate::C64;

/// Largest imaginary part tolerated in an expectation value of a Hermitian
/// operator, relative to `max(1, |Re|)`.
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("expectation value of {name} has imaginary residue {residue:e} (real part {real:e})")]
    ImaginaryResidue {
        name: &'static str,
        real: f64,
        residue: f64,
    },
    #[error("state has {state} bath modes but the model has {model}")]
    BathMismatch { state: usize, model: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    /// `t · J`.
    pub tj: f64,
    pub n_left: f64,
    pub n_right: f64,
    /// `Z = N_L − N_R`.
    pub imbalance: f64,
    /// `N = N_L + N_R`.
    pub total: f64,
    pub sigma_z_left: f64,
    pub sigma_z_right: f64,
    pub norm: f64,
    pub energy: f64,
    pub bath_populations: Vec<f64>,
}

impl ObservableRecord {
    /// Builds a record from its independent quantities, deriving `Z` and `N`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t: f64,
        tunneling: f64,
        n_left: f64,
        n_right: f64,
        sigma_z_left: f64,
        sigma_z_right: f64,
        norm: f64,
        energy: f64,
        bath_populations: Vec<f64>,
    ) -> Self {
        Self {
            t,
            tj: t * tunneling,
            n_left,
            n_right,
            imbalance: n_left - n_right,
            total: n_left + n_right,
            sigma_z_left,
            sigma_z_right,
            norm,
            energy,
            bath_populations,
        }
    }
}

pub(crate) fn real_part(name: &'static str, value: C64) -> Result<f64, ObservableError> {
    let scale = value.re.abs().max(1.0);
    if !(value.im.abs() <= IMAGINARY_RESIDUE_LIMIT * scale) {
        return Err(ObservableError::ImaginaryResidue {
            name,
            real: value.re,
            residue: value.im,
        });
    }
    Ok(value.re)
}

fn weighted_sum(tables: &OverlapTables, weight: &[C64], factor: &[C64]) -> C64 {
    weight
        .iter()
        .zip(factor)
        .zip(&tables.s)
        .map(|((w, f), s)| w * f * s)
        .sum()
}

pub(crate) fn photon_numbers_from(tables: &OverlapTables) -> Result<(f64, f64), ObservableError> {
    let left = real_part("N_L", weighted_sum(tables, &tables.theta_a, &tables.mu_mu))?;
    let right = real_part("N_R", weighted_sum(tables, &tables.theta_a, &tables.nu_nu))?;
    Ok((left, right))
}

pub(crate) fn polarizations_from(tables: &OverlapTables) -> Result<(f64, f64), ObservableError> {
    let ones = vec![C64::new(1.0, 0.0); tables.s.len()];
    let left = real_part("sigma_z_L", weighted_sum(tables, &tables.theta_b, &ones))?;
    let right = real_part("sigma_z_R", weighted_sum(tables, &tables.theta_c, &ones))?;
    Ok((left, right))
}

pub(crate) fn norm_from(tables: &OverlapTables) -> Result<f64, ObservableError> {
    real_part("norm", tables.theta_a.iter().zip(&tables.s).map(|(a, s)| a * s).sum())
}

/// `(N_L, N_R)`.
pub fn photon_numbers(state: &MultiD2State) -> Result<(f64, f64), ObservableError> {
    photon_numbers_from(&build_overlap_tables(state))
}

/// `(⟨σz^L⟩, ⟨σz^R⟩)`.
pub fn qubit_polarizations(state: &MultiD2State) -> Result<(f64, f64), ObservableError> {
    polarizations_from(&build_overlap_tables(state))
}

pub(crate) fn bath_populations_from(
    state: &MultiD2State,
    tables: &OverlapTables,
) -> Result<Vec<f64>, ObservableError> {
    let m = state.multiplicity();
    let mut acc = vec![C64::new(0.0, 0.0); state.bath_modes()];
    for l in 0..m {
        let row_l = state.eta_row(l);
        for n in 0..m {
            let row_n = state.eta_row(n);
            let i = tables.index(l, n);
            let w = tables.theta_a[i] * tables.s[i];
            for (a, (el, en)) in acc.iter_mut().zip(row_l.iter().zip(row_n)) {
                *a += w * el.conj() * en;
            }
        }
    }
    acc.into_iter().map(|v| real_part("N_k^B", v)).collect()
}

/// Phonon population `N_k^B` of every bath mode.
pub fn bath_populations(state: &MultiD2State) -> Result<Vec<f64>, ObservableError> {
    bath_populations_from(state, &build_overlap_tables(state))
}

fn check_bath(state: &MultiD2State, model: &ModelSpec) -> Result<(), ObservableError> {
    if state.bath_modes() != model.bath_modes() {
        return Err(ObservableError::BathMismatch {
            state: state.bath_modes(),
            model: model.bath_modes(),
        });
    }
    Ok(())
}

/// Per-pair Hamiltonian kernel `h_{ln}` with `⟨D2|H|D2⟩ = Σ_{l,n} h_{ln} S_{ln}`.
///
/// The same kernel multiplies `μ_n`, `ν_n` and `η_nk` in the displacement
/// equations of motion.
pub(crate) fn energy_kernel(
    tables: &OverlapTables,
    model: &ModelSpec,
    state: &MultiD2State,
    t: f64,
    l: usize,
    n: usize,
) -> C64 {
    let (dl, dr) = model.splittings(t);
    let g = model.coupling;
    let i = tables.index(l, n);
    let (bath_energy, bath_coupling) = match tables.bath() {
        Some(b) => (b.energy[i], b.coupling[i]),
        None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
    };
    let pi = PHOTON_FREQUENCY * (tables.mu_mu[i] + tables.nu_nu[i])
        - model.tunneling * tables.hopping[i]
        + bath_energy;
    let g_mu = state.mu(l).conj() + state.mu(n);
    let g_nu = state.nu(l).conj() + state.nu(n);
    0.5 * dl * tables.theta_b[i] + 0.5 * dr * tables.theta_c[i] + tables.theta_a[i] * pi
        - g * tables.theta_d[i] * g_mu
        - g * tables.theta_e[i] * g_nu
        + 2.0 * tables.sz_sum_half[i] * bath_coupling
}

pub(crate) fn energy_from(
    state: &MultiD2State,
    model: &ModelSpec,
    tables: &OverlapTables,
    t: f64,
) -> Result<f64, ObservableError> {
    let m = state.multiplicity();
    let mut acc = C64::new(0.0, 0.0);
    for l in 0..m {
        for n in 0..m {
            acc += energy_kernel(tables, model, state, t, l, n) * tables.s[tables.index(l, n)];
        }
    }
    real_part("energy", acc)
}

/// `⟨D2|H(t)|D2⟩`.
pub fn energy(state: &MultiD2State, model: &ModelSpec, t: f64) -> Result<f64, ObservableError> {
    check_bath(state, model)?;
    let tables = build_overlap_tables(state).with_bath(state, &model.bath);
    energy_from(state, model, &tables, t)
}

/// Every observable at the state's own time stamp, from one set of tables.
pub fn evaluate(state: &MultiD2State, model: &ModelSpec) -> Result<ObservableRecord, ObservableError> {
    check_bath(state, model)?;
    let tables = build_overlap_tables(state).with_bath(state, &model.bath);
    let (n_left, n_right) = photon_numbers_from(&tables)?;
    let (sz_l, sz_r) = polarizations_from(&tables)?;
    let norm = norm_from(&tables)?;
    let energy = energy_from(state, model, &tables, state.time)?;
    let pops = bath_populations_from(state, &tables)?;
    Ok(ObservableRecord::new(
        state.time,
        model.tunneling,
        n_left,
        n_right,
        sz_l,
        sz_r,
        norm,
        energy,
        pops,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{initial_state, Qubits};
    use crate::model::{BathSpec, DrivingField};
    use crate::testutil::random_state;
    use core::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn static_model(g: f64, j: f64) -> ModelSpec {
        let f = DrivingField::constant(1.0).unwrap();
        ModelSpec::new(j, g, f, f, BathSpec::none()).unwrap()
    }

    #[test]
    fn initial_state_observables() {
        let s = initial_state(6, 0, 20.0, 0.0, 1).unwrap();
        let (nl, nr) = photon_numbers(&s).unwrap();
        assert!((nl - 20.0).abs() < 1e-12 && nr.abs() < 1e-15);
        assert_eq!(qubit_polarizations(&s).unwrap(), (-1.0, -1.0));
        let s = initial_state(6, 8, 20.0, 0.0, 1).unwrap();
        assert!(bath_populations(&s).unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn vacuum_and_special_states() {
        let s = initial_state(2, 0, 0.0, 0.0, 1).unwrap();
        assert_eq!(photon_numbers(&s).unwrap(), (0.0, 0.0));

        let mut up = MultiD2State::zeros(1, 1).unwrap();
        up.set_amplitude(Qubits::UpUp, 0, c(1.0, 0.0));
        up.set_displacement(0, 0, c(0.4, -1.1));
        up.set_displacement(1, 0, c(0.4, -1.1));
        up.set_displacement(2, 0, c(0.4, -1.1));
        assert_eq!(qubit_polarizations(&up).unwrap(), (1.0, 1.0));
        assert!((bath_populations(&up).unwrap()[0] - (0.16 + 1.21)).abs() < 1e-14);

        let mut mix = MultiD2State::zeros(1, 0).unwrap();
        mix.set_amplitude(Qubits::UpUp, 0, c(FRAC_1_SQRT_2, 0.0));
        mix.set_amplitude(Qubits::DownDown, 0, c(FRAC_1_SQRT_2, 0.0));
        let (l, r) = qubit_polarizations(&mix).unwrap();
        assert!(l.abs() < 1e-15 && r.abs() < 1e-15);
    }

    #[test]
    fn energy_examples() {
        let model = static_model(0.0, 0.0);
        let s = initial_state(1, 0, 0.0, 0.0, 0).unwrap();
        assert!((energy(&s, &model, 0.0).unwrap() + 1.0).abs() < 1e-15);
        let s = initial_state(3, 0, 20.0, 0.0, 0).unwrap();
        assert!((energy(&s, &model, 0.0).unwrap() - 19.0).abs() < 1e-12);
    }

    #[test]
    fn derived_quantities_are_consistent() {
        let model = static_model(0.3, 0.05);
        let s = random_state(3, 0, 9);
        let r = evaluate(&s, &model).unwrap();
        assert_eq!(r.imbalance, r.n_left - r.n_right);
        assert_eq!(r.total, r.n_left + r.n_right);
        assert_eq!(r.tj, r.t * 0.05);
    }

    #[test]
    fn rejects_mismatched_bath() {
        let model = static_model(0.3, 0.05);
        let s = random_state(2, 3, 9);
        assert!(matches!(
            evaluate(&s, &model),
            Err(ObservableError::BathMismatch { .. })
        ));
    }

    #[test]
    fn flags_imaginary_residue() {
        assert!(real_part("x", c(2.0, 1e-6)).is_err());
        assert_eq!(real_part("x", c(2.0, 1e-12)).unwrap(), 2.0);
    }

    #[test]
    fn branch_permutation_leaves_observables_unchanged() {
        let bath = BathSpec::new(0.1, 0.5, 1.0, 20.0, 3).unwrap();
        let f = DrivingField::constant(1.0).unwrap();
        let model = ModelSpec::new(0.05, 0.3, f, f, bath).unwrap();
        let s = random_state(4, 3, 21);
        let p = s.permuted(&[2, 0, 3, 1]).unwrap();
        let a = evaluate(&s, &model).unwrap();
        let b = evaluate(&p, &model).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
        assert!(close(a.n_left, b.n_left));
        assert!(close(a.n_right, b.n_right));
        assert!(close(a.sigma_z_left, b.sigma_z_left));
        assert!(close(a.sigma_z_right, b.sigma_z_right));
        assert!(close(a.norm, b.norm));
        assert!(close(a.energy, b.energy));
        for (x, y) in a.bath_populations.iter().zip(&b.bath_populations) {
            assert!(close(*x, *y));
        }
    }
}
