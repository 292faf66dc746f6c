//! Assembly of the variational equations of motion as a real linear system.
//!
//! For bra branch `l` there is one complex equation per parameter family:
//!
//! ```text
//! amplitude X:  i Σ_n (Ẋ_n + X_n Ξ_nl) S_ln                       = Σ_n r^X_ln S_ln
//! mode w:       i Σ_n [(Σ_q X_l(q)* Ẋ_n(q)) w_n + Θ^a_nl (ẇ_n + w_n Ξ_nl)] S_ln = Σ_n r^w_ln S_ln
//! ```
//!
//! with `w ∈ {μ, ν, η_k}` and
//! `Ξ_nl = Σ_modes (ż_n z_l* − ½ ż_n z_n* − ½ z_n ż_n*)`.
//! The conjugated derivatives inside `Ξ` are why the system is posed over
//! real and imaginary parts. Rows and columns follow the declared parameter
//! order; row `2r` holds the real part of complex equation `r`, row `2r + 1`
//! its imaginary part, and likewise for the unknowns.

use alloc::vec;
use alloc::vec::Vec;
use faer::Mat;

use super::DynamicsError;
use crate::ansatz::{parameter_count, MultiD2State, Qubits};
use crate::model::{ModelSpec, PHOTON_FREQUENCY};
use crate::observables::energy_kernel;
use crate::overlap::{build_overlap_tables, OverlapTables};
use crate::C64;

/// `matrix · ẋ = rhs` over the real and imaginary parts of all derivatives.
#[derive(Debug, Clone)]
pub struct EomSystem {
    pub matrix: Mat<f64>,
    pub rhs: Vec<f64>,
    pub multiplicity: usize,
    pub bath_modes: usize,
}

impl EomSystem {
    pub fn dimension(&self) -> usize {
        self.rhs.len()
    }
}

struct RealSystem {
    matrix: Mat<f64>,
    rhs: Vec<f64>,
}

impl RealSystem {
    /// Adds `c · ẋ_col` to complex equation `row`.
    #[inline]
    fn add(&mut self, row: usize, col: usize, c: C64) {
        let (r, k) = (2 * row, 2 * col);
        self.matrix[(r, k)] += c.re;
        self.matrix[(r, k + 1)] -= c.im;
        self.matrix[(r + 1, k)] += c.im;
        self.matrix[(r + 1, k + 1)] += c.re;
    }

    /// Adds `c · ẋ_col*` to complex equation `row`.
    #[inline]
    fn add_conj(&mut self, row: usize, col: usize, c: C64) {
        let (r, k) = (2 * row, 2 * col);
        self.matrix[(r, k)] += c.re;
        self.matrix[(r, k + 1)] += c.im;
        self.matrix[(r + 1, k)] += c.im;
        self.matrix[(r + 1, k + 1)] -= c.re;
    }

    #[inline]
    fn add_rhs(&mut self, row: usize, c: C64) {
        self.rhs[2 * row] += c.re;
        self.rhs[2 * row + 1] += c.im;
    }
}

/// Builds the linear system for the parameter derivatives at time `t`.
///
/// Both sides are divided by `i`, so the matrix rows are the overlaps of the
/// projection vectors with the parameter derivatives of the trial state.
pub fn assemble_eom(
    state: &MultiD2State,
    model: &ModelSpec,
    t: f64,
) -> Result<EomSystem, DynamicsError> {
    if state.bath_modes() != model.bath_modes() {
        return Err(DynamicsError::Shape {
            state: state.bath_modes(),
            model: model.bath_modes(),
        });
    }
    let tables = build_overlap_tables(state).with_bath(state, &model.bath);
    Ok(assemble_with_tables(state, model, t, &tables))
}

/// [`assemble_eom`] on precomputed tables (which must carry bath sums).
pub(crate) fn assemble_with_tables(
    state: &MultiD2State,
    model: &ModelSpec,
    t: f64,
    tables: &OverlapTables,
) -> EomSystem {
    let m = state.multiplicity();
    let nb = state.bath_modes();
    let modes = state.boson_modes();
    let p = 2 * parameter_count(m, nb);
    let bath = tables.bath().expect("bath sums attached");
    let (delta_l, delta_r) = model.splittings(t);
    let g = model.coupling;
    let j = model.tunneling;
    let freqs = model.bath.frequencies();
    let phis = model.bath.couplings();

    let mut sys = RealSystem {
        matrix: Mat::zeros(p, p),
        rhs: vec![0.0; p],
    };
    let zero = C64::new(0.0, 0.0);
    let mut xi_direct = vec![zero; modes];
    let mut xi_conj = vec![zero; modes];
    let mut ket_modes = vec![zero; modes];
    let neg_i = C64::new(0.0, -1.0);

    for l in 0..m {
        for n in 0..m {
            let i = tables.index(l, n);
            let s = tables.s[i];
            let theta_a = tables.theta_a[i];
            for md in 0..modes {
                let zn = state.displacement(md, n);
                let zl = state.displacement(md, l);
                ket_modes[md] = zn;
                xi_direct[md] = zl.conj() - 0.5 * zn.conj();
                xi_conj[md] = -0.5 * zn;
            }

            let pi = PHOTON_FREQUENCY * (tables.mu_mu[i] + tables.nu_nu[i]) - j * tables.hopping[i]
                + bath.energy[i];
            let phi_sum = bath.coupling[i];
            let g_mu = state.mu(l).conj() + state.mu(n);
            let g_nu = state.nu(l).conj() + state.nu(n);

            // Amplitude equations.
            for q in Qubits::ALL {
                let row = state.amplitude_index(q, l);
                let xn = state.amplitude(q, n);
                sys.add(row, state.amplitude_index(q, n), s);
                let w = xn * s;
                for md in 0..modes {
                    let col = state.displacement_index(md, n);
                    sys.add(row, col, w * xi_direct[md]);
                    sys.add_conj(row, col, w * xi_conj[md]);
                }
                let (szl, szr) = (q.sigma_z_left(), q.sigma_z_right());
                let diag = 0.5 * (szl * delta_l + szr * delta_r) + pi + (szl + szr) * phi_sum;
                let r = xn * diag
                    - g * (g_mu * state.amplitude(q.flip_left(), n)
                        + g_nu * state.amplitude(q.flip_right(), n));
                sys.add_rhs(row, neg_i * r * s);
            }

            // Displacement equations.
            let h = energy_kernel(&tables, model, state, t, l, n);
            let sz_half = tables.sz_sum_half[i];
            for w in 0..modes {
                let row = state.displacement_index(w, l);
                let wn = ket_modes[w];
                for q in Qubits::ALL {
                    sys.add(
                        row,
                        state.amplitude_index(q, n),
                        state.amplitude(q, l).conj() * wn * s,
                    );
                }
                sys.add(row, state.displacement_index(w, n), theta_a * s);
                let coef = theta_a * wn * s;
                for md in 0..modes {
                    let col = state.displacement_index(md, n);
                    sys.add(row, col, coef * xi_direct[md]);
                    sys.add_conj(row, col, coef * xi_conj[md]);
                }
                let extra = match w {
                    0 => theta_a * (PHOTON_FREQUENCY * state.mu(n) - j * state.nu(n)) - g * tables.theta_d[i],
                    1 => theta_a * (PHOTON_FREQUENCY * state.nu(n) - j * state.mu(n)) - g * tables.theta_e[i],
                    _ => {
                        let k = w - 2;
                        theta_a * freqs[k] * wn + 2.0 * sz_half * phis[k]
                    }
                };
                sys.add_rhs(row, neg_i * (h * wn + extra) * s);
            }
        }
    }
    EomSystem {
        matrix: sys.matrix,
        rhs: sys.rhs,
        multiplicity: m,
        bath_modes: nb,
    }
}
