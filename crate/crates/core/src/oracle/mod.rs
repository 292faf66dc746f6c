//! Exact propagation in a truncated product Fock basis.
//!
//! The basis is `|q⟩ ⊗ |n_L⟩ ⊗ |n_R⟩ ⊗ |m_1 … m_N⟩` with the qubit index `q`
//! slowest and the last bath mode fastest. The Hamiltonian is real in this
//! basis; the static part is stored as a sparse matrix and the driven qubit
//! splittings are applied as a diagonal at every stage.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use thiserror::Error;

use crate::ansatz::{MultiD2State, Qubits};
use crate::model::{ModelSpec, PHOTON_FREQUENCY};
use crate::observables::ObservableRecord;
use crate::C64;

mod sparse;

pub use sparse::SparseMatrix;

/// Largest photon cutoff per resonator.
pub const MAX_PHOTON_CUTOFF: usize = 14;
/// Largest number of bath modes in an oracle instance.
pub const MAX_ORACLE_BATH_MODES: usize = 3;
/// Largest phonon cutoff per bath mode.
pub const MAX_BATH_CUTOFF: usize = 16;
/// Default bound on the basis dimension.
pub const DEFAULT_MAX_DIMENSION: usize = 1 << 21;
/// Largest Poisson tail discarded when expanding a coherent state.
pub const TRUNCATION_LIMIT: f64 = 1e-8;
/// Largest accepted relative norm drift of an exact trajectory.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("basis dimension {dimension} exceeds the budget of {budget}")]
    Budget { dimension: u128, budget: usize },
    #[error("{name} = {value} exceeds its cap of {cap}")]
    Cap {
        name: &'static str,
        value: usize,
        cap: usize,
    },
    #[error("coherent amplitude of branch {branch}, mode {mode} loses {error:e} of its weight to the cutoff")]
    Truncation {
        branch: usize,
        mode: usize,
        error: f64,
    },
    #[error("state has {state} bath modes but the basis has {basis}")]
    BathMismatch { state: usize, basis: usize },
    #[error("norm drifted by {drift:e} at t = {time}")]
    NormDrift { time: f64, drift: f64 },
    #[error("invalid setting {name} = {value}")]
    Setting { name: &'static str, value: f64 },
}

/// Cutoffs of the truncated basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasisSpec {
    pub n_max_photon: usize,
    pub n_max_bath: usize,
    pub bath_modes: usize,
    pub max_dimension: usize,
}

impl FockBasisSpec {
    pub fn new(n_max_photon: usize, n_max_bath: usize, bath_modes: usize) -> Result<Self, OracleError> {
        Self::with_budget(n_max_photon, n_max_bath, bath_modes, DEFAULT_MAX_DIMENSION)
    }

    pub fn with_budget(
        n_max_photon: usize,
        n_max_bath: usize,
        bath_modes: usize,
        max_dimension: usize,
    ) -> Result<Self, OracleError> {
        for (name, value, cap) in [
            ("n_max_photon", n_max_photon, MAX_PHOTON_CUTOFF),
            ("n_max_bath", n_max_bath, MAX_BATH_CUTOFF),
            ("bath_modes", bath_modes, MAX_ORACLE_BATH_MODES),
        ] {
            if value > cap {
                return Err(OracleError::Cap { name, value, cap });
            }
        }
        let spec = Self {
            n_max_photon,
            n_max_bath,
            bath_modes,
            max_dimension,
        };
        let dimension = spec.dimension_u128();
        if dimension > max_dimension as u128 {
            return Err(OracleError::Budget {
                dimension,
                budget: max_dimension,
            });
        }
        Ok(spec)
    }

    fn dimension_u128(&self) -> u128 {
        let p = (self.n_max_photon + 1) as u128;
        4 * p * p * ((self.n_max_bath + 1) as u128).pow(self.bath_modes as u32)
    }

    pub fn dimension(&self) -> usize {
        self.dimension_u128() as usize
    }

    fn photon_levels(&self) -> usize {
        self.n_max_photon + 1
    }

    fn bath_block(&self) -> usize {
        (self.n_max_bath + 1).pow(self.bath_modes as u32)
    }

    /// Flat index of a basis vector.
    pub fn index(&self, q: Qubits, n_left: usize, n_right: usize, phonons: &[usize]) -> usize {
        let p = self.photon_levels();
        let mut b = 0;
        for &m in phonons {
            b = b * (self.n_max_bath + 1) + m;
        }
        ((q as usize * p + n_left) * p + n_right) * self.bath_block() + b
    }

    /// Inverse of [`index`](Self::index); phonon numbers are written to `phonons`.
    pub fn decode(&self, mut index: usize, phonons: &mut [usize]) -> (Qubits, usize, usize) {
        let levels = self.n_max_bath + 1;
        for slot in phonons.iter_mut().rev() {
            *slot = index % levels;
            index /= levels;
        }
        let p = self.photon_levels();
        let n_right = index % p;
        index /= p;
        let n_left = index % p;
        (Qubits::ALL[index / p], n_left, n_right)
    }
}

/// Dense state vector over the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub spec: FockBasisSpec,
    pub time: f64,
    pub amplitudes: Vec<C64>,
}

impl FockState {
    pub fn basis_vector(spec: FockBasisSpec, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); spec.dimension()];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self {
            spec,
            time: 0.0,
            amplitudes,
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Real, time-independent part of the Hamiltonian plus the qubit signs the
/// driving multiplies.
#[derive(Debug, Clone)]
pub struct FockHamiltonian {
    pub static_part: SparseMatrix,
    sigma_z_left: Vec<f64>,
    sigma_z_right: Vec<f64>,
    drive: (crate::model::DrivingField, crate::model::DrivingField),
}

impl FockHamiltonian {
    pub fn new(model: &ModelSpec, spec: &FockBasisSpec) -> Result<Self, OracleError> {
        if model.bath_modes() != spec.bath_modes {
            return Err(OracleError::BathMismatch {
                state: model.bath_modes(),
                basis: spec.bath_modes,
            });
        }
        let dim = spec.dimension();
        let p = spec.photon_levels();
        let nb = spec.bath_modes;
        let levels = spec.n_max_bath + 1;
        let freqs = model.bath.frequencies();
        let phis = model.bath.couplings();
        let g = model.coupling;
        let j = model.tunneling;
        let mut phonons = vec![0usize; nb];
        let mut sz_l = vec![0.0; dim];
        let mut sz_r = vec![0.0; dim];
        let mut builder = sparse::Builder::new(dim);
        for row in 0..dim {
            let (q, nl, nr) = spec.decode(row, &mut phonons);
            sz_l[row] = q.sigma_z_left();
            sz_r[row] = q.sigma_z_right();
            let mut diag = PHOTON_FREQUENCY * (nl + nr) as f64;
            for k in 0..nb {
                diag += freqs[k] * phonons[k] as f64;
            }
            builder.push(row, diag);
            // -g (a_L + a_L†) σx^L
            let ql = q.flip_left();
            if nl > 0 {
                builder.push(spec.index(ql, nl - 1, nr, &phonons), -g * Float::sqrt(nl as f64));
            }
            if nl + 1 < p {
                builder.push(spec.index(ql, nl + 1, nr, &phonons), -g * Float::sqrt((nl + 1) as f64));
            }
            let qr = q.flip_right();
            if nr > 0 {
                builder.push(spec.index(qr, nl, nr - 1, &phonons), -g * Float::sqrt(nr as f64));
            }
            if nr + 1 < p {
                builder.push(spec.index(qr, nl, nr + 1, &phonons), -g * Float::sqrt((nr + 1) as f64));
            }
            // -J (a_L† a_R + a_R† a_L)
            if nr > 0 && nl + 1 < p {
                let v = -j * Float::sqrt(((nl + 1) * nr) as f64);
                builder.push(spec.index(q, nl + 1, nr - 1, &phonons), v);
            }
            if nl > 0 && nr + 1 < p {
                let v = -j * Float::sqrt((nl * (nr + 1)) as f64);
                builder.push(spec.index(q, nl - 1, nr + 1, &phonons), v);
            }
            // φ_k (b_k + b_k†)(σz^L + σz^R)
            let sz_sum = q.sigma_z_left() + q.sigma_z_right();
            if sz_sum != 0.0 {
                for k in 0..nb {
                    let m = phonons[k];
                    if m > 0 {
                        phonons[k] = m - 1;
                        builder.push(spec.index(q, nl, nr, &phonons), phis[k] * sz_sum * Float::sqrt(m as f64));
                    }
                    if m + 1 < levels {
                        phonons[k] = m + 1;
                        builder.push(
                            spec.index(q, nl, nr, &phonons),
                            phis[k] * sz_sum * Float::sqrt((m + 1) as f64),
                        );
                    }
                    phonons[k] = m;
                }
            }
            builder.finish_row();
        }
        Ok(Self {
            static_part: builder.build(),
            sigma_z_left: sz_l,
            sigma_z_right: sz_r,
            drive: (model.drive_left, model.drive_right),
        })
    }

    pub fn dimension(&self) -> usize {
        self.sigma_z_left.len()
    }

    /// `y = H(t) x`.
    pub fn apply(&self, t: f64, x: &[C64], y: &mut [C64]) {
        self.static_part.apply(x, y);
        let half_l = 0.5 * self.drive.0.at(t);
        let half_r = 0.5 * self.drive.1.at(t);
        for (i, (yi, xi)) in y.iter_mut().zip(x).enumerate() {
            *yi += *xi * (half_l * self.sigma_z_left[i] + half_r * self.sigma_z_right[i]);
        }
    }

    /// The full `H(t)` as one sparse matrix.
    pub fn at(&self, t: f64) -> SparseMatrix {
        let half_l = 0.5 * self.drive.0.at(t);
        let half_r = 0.5 * self.drive.1.at(t);
        let diag: Vec<f64> = self
            .sigma_z_left
            .iter()
            .zip(&self.sigma_z_right)
            .map(|(l, r)| half_l * l + half_r * r)
            .collect();
        self.static_part.plus_diagonal(&diag)
    }

    /// `⟨ψ|H(t)|ψ⟩`.
    pub fn expectation(&self, state: &FockState) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); self.dimension()];
        self.apply(state.time, &state.amplitudes, &mut y);
        state
            .amplitudes
            .iter()
            .zip(&y)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }
}

/// Matrix of `H(t)` in the truncated basis.
pub fn build_hamiltonian(
    model: &ModelSpec,
    spec: &FockBasisSpec,
    t: f64,
) -> Result<SparseMatrix, OracleError> {
    Ok(FockHamiltonian::new(model, spec)?.at(t))
}

/// Fock amplitudes `e^{-|z|²/2} z^n / √n!` for `n = 0..=n_max`, and the
/// weight lost beyond the cutoff.
fn coherent_amplitudes(z: C64, n_max: usize) -> (Vec<C64>, f64) {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut c = C64::new(Float::exp(-0.5 * z.norm_sqr()), 0.0);
    let mut kept = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            c = c * z / Float::sqrt(n as f64);
        }
        kept += c.norm_sqr();
        out.push(c);
    }
    (out, (1.0 - kept).max(0.0))
}

/// Expands the multi-D2 state over the truncated Fock basis.
pub fn convert_ansatz_to_fock(
    state: &MultiD2State,
    spec: &FockBasisSpec,
) -> Result<FockState, OracleError> {
    if state.bath_modes() != spec.bath_modes {
        return Err(OracleError::BathMismatch {
            state: state.bath_modes(),
            basis: spec.bath_modes,
        });
    }
    let dim = spec.dimension();
    let p = spec.photon_levels();
    let block = spec.bath_block();
    let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
    let mut phonons = vec![0usize; spec.bath_modes];
    for n in 0..state.multiplicity() {
        if Qubits::ALL.iter().all(|&q| state.amplitude(q, n) == C64::new(0.0, 0.0)) {
            continue;
        }
        let mut per_mode = Vec::with_capacity(state.boson_modes());
        for mode in 0..state.boson_modes() {
            let cutoff = if mode < 2 { spec.n_max_photon } else { spec.n_max_bath };
            let (amps, lost) = coherent_amplitudes(state.displacement(mode, n), cutoff);
            if lost > TRUNCATION_LIMIT {
                return Err(OracleError::Truncation {
                    branch: n,
                    mode,
                    error: lost,
                });
            }
            per_mode.push(amps);
        }
        let mut bath = vec![C64::new(1.0, 0.0); block];
        for (b, slot) in bath.iter_mut().enumerate() {
            spec.decode(b, &mut phonons);
            for (k, &m) in phonons.iter().enumerate() {
                *slot *= per_mode[2 + k][m];
            }
        }
        for q in Qubits::ALL {
            let x = state.amplitude(q, n);
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for nl in 0..p {
                let xl = x * per_mode[0][nl];
                for nr in 0..p {
                    let xlr = xl * per_mode[1][nr];
                    let base = ((q as usize * p + nl) * p + nr) * block;
                    for (b, v) in bath.iter().enumerate() {
                        amplitudes[base + b] += xlr * v;
                    }
                }
            }
        }
    }
    Ok(FockState {
        spec: *spec,
        time: state.time,
        amplitudes,
    })
}

/// Every observable of a Fock state (bare expectations, like the ansatz).
pub fn observables(state: &FockState, hamiltonian: &FockHamiltonian, tunneling: f64) -> ObservableRecord {
    let spec = &state.spec;
    let mut phonons = vec![0usize; spec.bath_modes];
    let (mut nl_sum, mut nr_sum, mut szl, mut szr, mut norm) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut pops = vec![0.0; spec.bath_modes];
    for (i, c) in state.amplitudes.iter().enumerate() {
        let w = c.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let (q, nl, nr) = spec.decode(i, &mut phonons);
        norm += w;
        nl_sum += w * nl as f64;
        nr_sum += w * nr as f64;
        szl += w * q.sigma_z_left();
        szr += w * q.sigma_z_right();
        for (p, &m) in pops.iter_mut().zip(&phonons) {
            *p += w * m as f64;
        }
    }
    ObservableRecord::new(
        state.time,
        tunneling,
        nl_sum,
        nr_sum,
        szl,
        szr,
        norm,
        hamiltonian.expectation(state),
        pops,
    )
}

/// RK4 integration of `i ψ̇ = H(t) ψ` from `state.time` to `state.time + t_max`.
///
/// Samples go to `sink` at the start, every `sample_every` steps, and at the
/// end.
pub fn propagate_exact<F: FnMut(&ObservableRecord)>(
    state: FockState,
    model: &ModelSpec,
    t_max: f64,
    dt: f64,
    sample_every: usize,
    mut sink: F,
) -> Result<FockState, OracleError> {
    if !(dt > 0.0) {
        return Err(OracleError::Setting { name: "dt", value: dt });
    }
    if !(t_max >= 0.0) {
        return Err(OracleError::Setting {
            name: "t_max",
            value: t_max,
        });
    }
    if sample_every == 0 {
        return Err(OracleError::Setting {
            name: "sample_every",
            value: 0.0,
        });
    }
    let h = FockHamiltonian::new(model, &state.spec)?;
    let dim = h.dimension();
    let zero = C64::new(0.0, 0.0);
    let mut psi = state;
    sink(&observables(&psi, &h, model.tunneling));
    let reference = psi.norm();
    let (mut k, mut acc, mut tmp) = (vec![zero; dim], vec![zero; dim], vec![zero; dim]);
    let neg_i = C64::new(0.0, -1.0);
    let t0 = psi.time;
    let steps = Float::ceil(t_max / dt - 1e-9).max(0.0) as usize;
    for step in 1..=steps {
        let t = psi.time;
        let h_step = t0 + step as f64 * dt - t;
        // k1
        h.apply(t, &psi.amplitudes, &mut k);
        for i in 0..dim {
            k[i] *= neg_i;
            acc[i] = k[i];
            tmp[i] = psi.amplitudes[i] + k[i] * (0.5 * h_step);
        }
        // k2
        h.apply(t + 0.5 * h_step, &tmp, &mut k);
        for i in 0..dim {
            k[i] *= neg_i;
            acc[i] += 2.0 * k[i];
            tmp[i] = psi.amplitudes[i] + k[i] * (0.5 * h_step);
        }
        // k3
        h.apply(t + 0.5 * h_step, &tmp, &mut k);
        for i in 0..dim {
            k[i] *= neg_i;
            acc[i] += 2.0 * k[i];
            tmp[i] = psi.amplitudes[i] + k[i] * h_step;
        }
        // k4
        h.apply(t + h_step, &tmp, &mut k);
        for i in 0..dim {
            acc[i] += neg_i * k[i];
            psi.amplitudes[i] += acc[i] * (h_step / 6.0);
        }
        psi.time = t + h_step;
        let drift = (psi.norm() - reference).abs() / reference;
        if !(drift <= NORM_DRIFT_LIMIT) {
            return Err(OracleError::NormDrift {
                time: psi.time,
                drift,
            });
        }
        if step % sample_every == 0 || step == steps {
            sink(&observables(&psi, &h, model.tunneling));
        }
    }
    Ok(psi)
}
