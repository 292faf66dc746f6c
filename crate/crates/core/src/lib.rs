//! Variational quantum dynamics of a dissipative, harmonically driven Rabi
//! dimer.
//!
//! Two photon resonators, each coupled to a qubit, exchange photons through a
//! tunneling amplitude `J`. Either qubit may carry a periodically modulated
//! level splitting, and both qubits couple diagonally to a sub-Ohmic bath of
//! harmonic oscillators. The many-body state is represented by a superposition
//! of `M` Davydov D2 branches (products of four qubit amplitudes with coherent
//! states for every bosonic mode) and propagated with the Dirac-Frenkel
//! variational principle and fourth-order Runge-Kutta.
//!
//! A dense truncated-Fock-space propagator ([`oracle`]) provides exact
//! reference dynamics for small instances.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ansatz;
pub mod dynamics;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod overlap;

mod quadrature;
#[cfg(test)]
mod testutil;

pub use ansatz::{debye_waller, distance, initial_state, inner_product, AnsatzError, MultiD2State, Qubits};
pub use dynamics::{
    assemble_eom, propagate, rk4_step, solve_tangent, DynamicsError, DynamicsSettings,
    EomSystem, PropagationFailure, PropagationSummary, Regularization, SolverReport,
    SolverSettings, StepControl, TangentMethod, TangentVector, TrajectorySink,
};
pub use model::{
    discretize_bath, driving, spectral_density, BathSpec, DiscretizedBath, DrivingField,
    ModelError, ModelSpec,
};
pub use observables::{ObservableError, ObservableRecord};
pub use overlap::{build_overlap_tables, OverlapTables};

/// Complex scalar used for every variational parameter.
pub type C64 = num_complex::Complex64;
