//! The multi-D2 trial state.
//!
//! ```text
//! |D2^M⟩ = Σ_n [A_n|↑↑⟩ + B_n|↑↓⟩ + C_n|↓↑⟩ + D_n|↓↓⟩] ⊗ |μ_n⟩_L |ν_n⟩_R |η_n⟩_B
//! ```
//!
//! All parameters live in one flat complex vector in declared order:
//! `A_1..A_M, B_1..B_M, C_1..C_M, D_1..D_M, μ_1..μ_M, ν_1..ν_M,
//! η_11..η_1N, η_21..η_MN`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnsatzError {
    #[error("branch index {index} out of range for multiplicity {multiplicity}")]
    BranchIndex { index: usize, multiplicity: usize },
    #[error("multiplicity must be at least 1")]
    EmptyMultiplicity,
    #[error("parameter vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("states have {left} and {right} bath modes")]
    BathModes { left: usize, right: usize },
    #[error("photon number {0} must be finite and non-negative")]
    Photons(f64),
    #[error("noise scale {0} must be finite and non-negative")]
    Noise(f64),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("checkpoint field {index} is not a number")]
    Record { index: usize },
}

/// Two-qubit basis states, in the order the amplitudes are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Qubits {
    UpUp = 0,
    UpDown = 1,
    DownUp = 2,
    DownDown = 3,
}

impl Qubits {
    pub const ALL: [Qubits; 4] = [Qubits::UpUp, Qubits::UpDown, Qubits::DownUp, Qubits::DownDown];

    /// Eigenvalue of `σz^L`.
    pub fn sigma_z_left(self) -> f64 {
        match self {
            Qubits::UpUp | Qubits::UpDown => 1.0,
            _ => -1.0,
        }
    }

    /// Eigenvalue of `σz^R`.
    pub fn sigma_z_right(self) -> f64 {
        match self {
            Qubits::UpUp | Qubits::DownUp => 1.0,
            _ => -1.0,
        }
    }

    /// State reached by `σx^L`.
    pub fn flip_left(self) -> Qubits {
        match self {
            Qubits::UpUp => Qubits::DownUp,
            Qubits::UpDown => Qubits::DownDown,
            Qubits::DownUp => Qubits::UpUp,
            Qubits::DownDown => Qubits::UpDown,
        }
    }

    /// State reached by `σx^R`.
    pub fn flip_right(self) -> Qubits {
        match self {
            Qubits::UpUp => Qubits::UpDown,
            Qubits::UpDown => Qubits::UpUp,
            Qubits::DownUp => Qubits::DownDown,
            Qubits::DownDown => Qubits::DownUp,
        }
    }

    /// The same configuration with left and right exchanged.
    pub fn mirrored(self) -> Qubits {
        match self {
            Qubits::UpDown => Qubits::DownUp,
            Qubits::DownUp => Qubits::UpDown,
            q => q,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiD2State {
    multiplicity: usize,
    bath_modes: usize,
    /// Time stamp in units of `1/ω0`.
    pub time: f64,
    params: Vec<C64>,
}

/// Number of complex parameters for multiplicity `m` and `n` bath modes.
pub fn parameter_count(m: usize, n: usize) -> usize {
    m * (6 + n)
}

impl MultiD2State {
    /// All parameters zero.
    pub fn zeros(multiplicity: usize, bath_modes: usize) -> Result<Self, AnsatzError> {
        if multiplicity == 0 {
            return Err(AnsatzError::EmptyMultiplicity);
        }
        Ok(Self {
            multiplicity,
            bath_modes,
            time: 0.0,
            params: vec![C64::new(0.0, 0.0); parameter_count(multiplicity, bath_modes)],
        })
    }

    pub fn from_params(
        multiplicity: usize,
        bath_modes: usize,
        time: f64,
        params: Vec<C64>,
    ) -> Result<Self, AnsatzError> {
        if multiplicity == 0 {
            return Err(AnsatzError::EmptyMultiplicity);
        }
        let expected = parameter_count(multiplicity, bath_modes);
        if params.len() != expected {
            return Err(AnsatzError::Length {
                got: params.len(),
                expected,
            });
        }
        Ok(Self {
            multiplicity,
            bath_modes,
            time,
            params,
        })
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn bath_modes(&self) -> usize {
        self.bath_modes
    }

    /// Bosonic modes per branch: left photon, right photon, then the bath.
    pub fn boson_modes(&self) -> usize {
        2 + self.bath_modes
    }

    pub fn params(&self) -> &[C64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [C64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<C64> {
        self.params
    }

    #[inline]
    pub fn amplitude_index(&self, q: Qubits, n: usize) -> usize {
        q as usize * self.multiplicity + n
    }

    /// Flat index of boson mode `mode` (0 = μ, 1 = ν, 2 + k = η_k) of branch `n`.
    #[inline]
    pub fn displacement_index(&self, mode: usize, n: usize) -> usize {
        match mode {
            0 => 4 * self.multiplicity + n,
            1 => 5 * self.multiplicity + n,
            _ => 6 * self.multiplicity + n * self.bath_modes + (mode - 2),
        }
    }

    #[inline]
    pub fn amplitude(&self, q: Qubits, n: usize) -> C64 {
        self.params[self.amplitude_index(q, n)]
    }

    pub fn set_amplitude(&mut self, q: Qubits, n: usize, value: C64) {
        let i = self.amplitude_index(q, n);
        self.params[i] = value;
    }

    #[inline]
    pub fn displacement(&self, mode: usize, n: usize) -> C64 {
        self.params[self.displacement_index(mode, n)]
    }

    pub fn set_displacement(&mut self, mode: usize, n: usize, value: C64) {
        let i = self.displacement_index(mode, n);
        self.params[i] = value;
    }

    pub fn mu(&self, n: usize) -> C64 {
        self.displacement(0, n)
    }

    pub fn nu(&self, n: usize) -> C64 {
        self.displacement(1, n)
    }

    pub fn eta(&self, n: usize, k: usize) -> C64 {
        self.displacement(2 + k, n)
    }

    /// Displacements `η_n1..η_nN` of branch `n`.
    pub fn eta_row(&self, n: usize) -> &[C64] {
        let start = 6 * self.multiplicity + n * self.bath_modes;
        &self.params[start..start + self.bath_modes]
    }

    /// `⟨D2|D2⟩ = Σ_{l,n} Θ^a_{nl} S_{ln}`.
    pub fn norm(&self) -> f64 {
        let m = self.multiplicity;
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..m {
            for n in 0..m {
                let theta: C64 = Qubits::ALL
                    .iter()
                    .map(|&q| self.amplitude(q, l).conj() * self.amplitude(q, n))
                    .sum();
                acc += theta * self.overlap_unchecked(l, n);
            }
        }
        acc.re
    }

    /// Multiplies every amplitude so that the norm becomes 1.
    pub fn normalize(&mut self) -> Result<(), AnsatzError> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(AnsatzError::ZeroNorm);
        }
        let scale = 1.0 / Float::sqrt(norm);
        for v in &mut self.params[..4 * self.multiplicity] {
            *v *= scale;
        }
        Ok(())
    }

    /// The same physical state with resonators and qubits exchanged.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for n in 0..self.multiplicity {
            for q in Qubits::ALL {
                out.set_amplitude(q.mirrored(), n, self.amplitude(q, n));
            }
            out.set_displacement(0, n, self.nu(n));
            out.set_displacement(1, n, self.mu(n));
        }
        out
    }

    /// Relabels branches: branch `i` of the result is branch `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, AnsatzError> {
        let mut out = self.clone();
        for (i, &src) in order.iter().enumerate() {
            if src >= self.multiplicity || i >= self.multiplicity {
                return Err(AnsatzError::BranchIndex {
                    index: src.max(i),
                    multiplicity: self.multiplicity,
                });
            }
            for q in Qubits::ALL {
                out.set_amplitude(q, i, self.amplitude(q, src));
            }
            for mode in 0..self.boson_modes() {
                out.set_displacement(mode, i, self.displacement(mode, src));
            }
        }
        Ok(out)
    }

    /// One-line checkpoint: `t`, then every parameter in declared order with
    /// real and imaginary parts interleaved. Round-trips exactly.
    pub fn to_record(&self) -> String {
        let mut out = String::with_capacity(25 * (1 + 2 * self.params.len()));
        let _ = write!(out, "{:e}", self.time);
        for p in &self.params {
            let _ = write!(out, " {:e} {:e}", p.re, p.im);
        }
        out.push('\n');
        out
    }

    /// Inverse of [`MultiD2State::to_record`] for a known shape.
    pub fn from_record(
        text: &str,
        multiplicity: usize,
        bath_modes: usize,
    ) -> Result<Self, AnsatzError> {
        let mut values = Vec::new();
        for (index, field) in text.split_whitespace().enumerate() {
            values.push(field.parse::<f64>().map_err(|_| AnsatzError::Record { index })?);
        }
        let expected = 1 + 2 * parameter_count(multiplicity, bath_modes);
        if values.len() != expected {
            return Err(AnsatzError::Length {
                got: values.len(),
                expected,
            });
        }
        let params = values[1..].chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        Self::from_params(multiplicity, bath_modes, values[0], params)
    }

    pub(crate) fn overlap_unchecked(&self, l: usize, n: usize) -> C64 {
        let mut exponent = C64::new(0.0, 0.0);
        for mode in 0..self.boson_modes() {
            let zl = self.displacement(mode, l);
            let zn = self.displacement(mode, n);
            exponent += zl.conj() * zn - 0.5 * zl.norm_sqr() - 0.5 * zn.norm_sqr();
        }
        exponent.exp()
    }
}

/// `⟨a|b⟩` between two trial states with the same number of bath modes.
pub fn inner_product(a: &MultiD2State, b: &MultiD2State) -> Result<C64, AnsatzError> {
    if a.bath_modes() != b.bath_modes() {
        return Err(AnsatzError::BathModes {
            left: a.bath_modes(),
            right: b.bath_modes(),
        });
    }
    let mut total = C64::new(0.0, 0.0);
    for l in 0..a.multiplicity() {
        for n in 0..b.multiplicity() {
            let mut exponent = C64::new(0.0, 0.0);
            for mode in 0..a.boson_modes() {
                let zl = a.displacement(mode, l);
                let zn = b.displacement(mode, n);
                exponent += zl.conj() * zn - 0.5 * zl.norm_sqr() - 0.5 * zn.norm_sqr();
            }
            let qubits: C64 = Qubits::ALL
                .iter()
                .map(|&q| a.amplitude(q, l).conj() * b.amplitude(q, n))
                .sum();
            total += qubits * exponent.exp();
        }
    }
    Ok(total)
}

/// `‖|a⟩ − |b⟩‖`.
pub fn distance(a: &MultiD2State, b: &MultiD2State) -> Result<f64, AnsatzError> {
    let cross = inner_product(a, b)?;
    let d2 = a.norm() + b.norm() - 2.0 * cross.re;
    Ok(Float::sqrt(d2.max(0.0)))
}

/// Debye-Waller factor `S_{ln} = ⟨μ_l ν_l η_l | μ_n ν_n η_n⟩`.
pub fn debye_waller(state: &MultiD2State, l: usize, n: usize) -> Result<C64, AnsatzError> {
    let m = state.multiplicity();
    for index in [l, n] {
        if index >= m {
            return Err(AnsatzError::BranchIndex {
                index,
                multiplicity: m,
            });
        }
    }
    Ok(state.overlap_unchecked(l, n))
}

/// The initial state: `photons` coherent photons in the left resonator, both
/// qubits down, bath in vacuum, carried by branch 1.
///
/// Branches `2..=M` start with zero amplitudes. Their displacements receive
/// complex Gaussian noise (real and imaginary parts each of standard deviation
/// `noise_scale`) from a ChaCha8 stream seeded with `seed`, which lifts the
/// exact degeneracy of identical coherent states.
pub fn initial_state(
    multiplicity: usize,
    bath_modes: usize,
    photons: f64,
    noise_scale: f64,
    seed: u64,
) -> Result<MultiD2State, AnsatzError> {
    if !(photons >= 0.0) || !photons.is_finite() {
        return Err(AnsatzError::Photons(photons));
    }
    if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
        return Err(AnsatzError::Noise(noise_scale));
    }
    let mut state = MultiD2State::zeros(multiplicity, bath_modes)?;
    state.set_amplitude(Qubits::DownDown, 0, C64::new(1.0, 0.0));
    state.set_displacement(0, 0, C64::new(Float::sqrt(photons), 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 1..multiplicity {
        for mode in 0..state.boson_modes() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            state.set_displacement(mode, n, C64::new(re, im) * noise_scale);
        }
    }
    state.normalize()?;
    Ok(state)
}
