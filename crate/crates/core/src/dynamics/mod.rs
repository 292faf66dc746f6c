//! Variational equations of motion and their time integration.
//!
//! At every instant the projected Schrödinger equation is linear in the time
//! derivatives of the variational parameters and their conjugates. Splitting
//! every complex derivative into real and imaginary parts gives a square real
//! system of size `P = 2 M (6 + N)`, which is solved by truncated SVD and fed
//! to a classic fourth-order Runge-Kutta stepper.

use alloc::vec::Vec;
use thiserror::Error;

use crate::ansatz::{parameter_count, MultiD2State};
use crate::observables::ObservableError;
use crate::C64;

mod eom;
mod integrator;
mod metric;
mod solver;

pub use eom::{assemble_eom, EomSystem};
pub use integrator::{
    propagate, rk4_step, time_derivative, DynamicsSettings, PropagationFailure,
    PropagationSummary, SolverSettings, StepControl, TangentMethod, TrajectorySink,
};
pub use metric::{metric, metric_solve};
pub use solver::{
    matrix_from_rows, regularized_solve, solve_tangent, truncated_svd_solve, Regularization,
    SolverReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("state has {state} bath modes but the model has {model}")]
    Shape { state: usize, model: usize },
    #[error("non-finite entry {value} in {location} at ({row}, {col}); {count} non-finite entries in total")]
    NonFinite {
        location: &'static str,
        row: usize,
        col: usize,
        value: f64,
        count: usize,
    },
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("norm drifted to {norm} at t = {time} (reference {reference}, tolerance {tolerance})")]
    NormDrift {
        time: f64,
        norm: f64,
        reference: f64,
        tolerance: f64,
    },
    #[error("invalid setting {name} = {value}")]
    Setting { name: &'static str, value: f64 },
    #[error(transparent)]
    Observable(#[from] ObservableError),
}

/// Time derivatives of every variational parameter, laid out like the
/// parameters of [`MultiD2State`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    multiplicity: usize,
    bath_modes: usize,
    values: Vec<C64>,
}

impl TangentVector {
    /// Packs a real solution vector `(Re ẋ_0, Im ẋ_0, Re ẋ_1, ...)`.
    pub fn from_real(multiplicity: usize, bath_modes: usize, real: &[f64]) -> Self {
        debug_assert_eq!(real.len(), 2 * parameter_count(multiplicity, bath_modes));
        let values = real.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        Self {
            multiplicity,
            bath_modes,
            values,
        }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn is_compatible(&self, state: &MultiD2State) -> bool {
        self.multiplicity == state.multiplicity() && self.bath_modes == state.bath_modes()
    }

    /// `state + scale · self`, with the time stamp advanced by `dt`.
    pub(crate) fn advance(&self, state: &MultiD2State, scale: f64, dt: f64) -> MultiD2State {
        let mut out = state.clone();
        for (p, d) in out.params_mut().iter_mut().zip(&self.values) {
            *p += d * scale;
        }
        out.time += dt;
        out
    }
}
