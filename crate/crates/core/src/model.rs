//! Physical parameters of the driven Rabi dimer and its phonon bath.
//!
//! All energies and frequencies are in units of the photon frequency
//! `ω0 = 1`, times in units of `1/ω0`.

use alloc::vec::Vec;
use num_traits::Float;
use thiserror::Error;

use crate::quadrature::GaussLegendre;

/// Photon frequency of both resonators. Sets the energy unit.
pub const PHOTON_FREQUENCY: f64 = 1.0;

/// Lower edge of the logarithmic bath grid, relative to the cutoff frequency.
pub const FLOOR_OVER_CUTOFF: f64 = 1e-4;

/// Maximum width, in `ln ω`, of one quadrature panel.
const LOG_PANEL_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("bath modes must have strictly increasing positive frequencies (mode {index})")]
    ModeOrdering { index: usize },
    #[error("bath has {frequencies} frequencies but {couplings} couplings")]
    ModeCount { frequencies: usize, couplings: usize },
}

fn domain(name: &'static str, value: f64, reason: &'static str) -> ModelError {
    ModelError::Domain {
        name,
        value,
        reason,
    }
}

/// Harmonic modulation `A cos(Ω t + Φ)` of a qubit level splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivingField {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl DrivingField {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Result<Self, ModelError> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(domain("amplitude", amplitude, "must be finite and >= 0"));
        }
        if !(frequency >= 0.0) || !frequency.is_finite() {
            return Err(domain("frequency", frequency, "must be finite and >= 0"));
        }
        if !phase.is_finite() {
            return Err(domain("phase", phase, "must be finite"));
        }
        Ok(Self {
            amplitude,
            frequency,
            phase,
        })
    }

    /// A constant splitting `A`.
    pub fn constant(amplitude: f64) -> Result<Self, ModelError> {
        Self::new(amplitude, 0.0, 0.0)
    }

    pub fn at(&self, t: f64) -> f64 {
        driving(t, self)
    }

    pub fn is_static(&self) -> bool {
        self.frequency == 0.0 || self.amplitude == 0.0
    }
}

/// Level splitting `Δ(t) = A cos(Ω t + Φ)`; the Hamiltonian carries `Δ/2 σz`.
pub fn driving(t: f64, field: &DrivingField) -> f64 {
    field.amplitude * Float::cos(field.frequency * t + field.phase)
}

/// Sub-Ohmic spectral density law and the size of its discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    /// Dimensionless qubit-bath coupling strength.
    pub alpha: f64,
    /// Spectral exponent `s`.
    pub exponent: f64,
    pub cutoff: f64,
    pub max_frequency: f64,
    pub modes: usize,
}

impl BathSpec {
    /// Validates the bath law. With `modes == 0` the coupling is forced to zero.
    pub fn new(
        alpha: f64,
        exponent: f64,
        cutoff: f64,
        max_frequency: f64,
        modes: usize,
    ) -> Result<Self, ModelError> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(domain("alpha", alpha, "must be finite and >= 0"));
        }
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(domain("s", exponent, "must lie in (0, 1]"));
        }
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(domain("omega_c", cutoff, "must be finite and > 0"));
        }
        if !(max_frequency > cutoff) || !max_frequency.is_finite() {
            return Err(domain(
                "omega_max",
                max_frequency,
                "must be finite and exceed omega_c",
            ));
        }
        Ok(Self {
            alpha: if modes == 0 { 0.0 } else { alpha },
            exponent,
            cutoff,
            max_frequency,
            modes,
        })
    }

    /// No bath at all.
    pub fn none() -> Self {
        Self {
            alpha: 0.0,
            exponent: 0.5,
            cutoff: 1.0,
            max_frequency: 20.0,
            modes: 0,
        }
    }

    /// Lower edge of the logarithmic grid.
    pub fn floor(&self) -> f64 {
        FLOOR_OVER_CUTOFF * self.cutoff
    }

    fn density(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return 0.0;
        }
        2.0 * self.alpha
            * Float::powf(self.cutoff, 1.0 - self.exponent)
            * Float::powf(omega, self.exponent)
            * Float::exp(-omega / self.cutoff)
    }

    /// `(∫ J dω, ∫ ω J dω)` over `[lo, hi]`, `0 < lo < hi`.
    pub fn moments(&self, lo: f64, hi: f64) -> (f64, f64) {
        let rule = GaussLegendre::new(12);
        let (a, b) = (Float::ln(lo), Float::ln(hi));
        let panels = Float::ceil((b - a) / LOG_PANEL_WIDTH) as usize;
        // ω = e^u, dω = ω du
        let zeroth = rule.integrate(
            |u| {
                let w = Float::exp(u);
                self.density(w) * w
            },
            a,
            b,
            panels,
        );
        let first = rule.integrate(
            |u| {
                let w = Float::exp(u);
                self.density(w) * w * w
            },
            a,
            b,
            panels,
        );
        (zeroth, first)
    }

    /// `∫ J dω` over the full discretized range `[floor, ω_max]`.
    pub fn total_weight(&self) -> f64 {
        self.moments(self.floor(), self.max_frequency).0
    }
}

/// `J(ω) = 2 α ω_c^{1-s} ω^s e^{-ω/ω_c}`.
pub fn spectral_density(omega: f64, bath: &BathSpec) -> Result<f64, ModelError> {
    if !(omega >= 0.0) {
        return Err(domain("omega", omega, "spectral density needs omega >= 0"));
    }
    Ok(bath.density(omega))
}

/// Discrete bath modes: frequencies `ω_k` and couplings `φ_k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscretizedBath {
    frequencies: Vec<f64>,
    couplings: Vec<f64>,
}

impl DiscretizedBath {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_modes(frequencies: Vec<f64>, couplings: Vec<f64>) -> Result<Self, ModelError> {
        if frequencies.len() != couplings.len() {
            return Err(ModelError::ModeCount {
                frequencies: frequencies.len(),
                couplings: couplings.len(),
            });
        }
        let mut prev = 0.0;
        for (index, &w) in frequencies.iter().enumerate() {
            if !(w > prev) || !w.is_finite() {
                return Err(ModelError::ModeOrdering { index });
            }
            prev = w;
        }
        if let Some(&c) = couplings.iter().find(|c| !c.is_finite()) {
            return Err(domain("phi_k", c, "must be finite"));
        }
        Ok(Self {
            frequencies,
            couplings,
        })
    }

    /// Modes placed by hand at `frequencies`, one per bin of `edges`, with
    /// `φ_k² = ∫_{bin k} J dω`.
    pub fn from_bins(
        bath: &BathSpec,
        edges: &[f64],
        frequencies: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if edges.len() != frequencies.len() + 1 {
            return Err(ModelError::ModeCount {
                frequencies: frequencies.len(),
                couplings: edges.len().saturating_sub(1),
            });
        }
        let couplings = edges
            .windows(2)
            .map(|e| {
                let lo = if e[0] > 0.0 { e[0] } else { bath.floor() };
                Float::sqrt(bath.moments(lo, e[1]).0)
            })
            .collect();
        Self::from_modes(frequencies, couplings)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// `Σ_k φ_k²`.
    pub fn total_weight(&self) -> f64 {
        self.couplings.iter().map(|c| c * c).sum()
    }
}

/// Logarithmic discretization of the bath.
///
/// Bin edges are `ω_max r^j`, `j = 0..=N`, running down to `10⁻⁴ ω_c`. Each
/// bin contributes one mode with `φ_k² = ∫ J` over the bin, placed at the
/// coupling-weighted centroid of the bin. Modes are returned in ascending
/// frequency.
pub fn discretize_bath(bath: &BathSpec) -> Result<DiscretizedBath, ModelError> {
    if !(bath.max_frequency > 0.0) {
        return Err(domain(
            "omega_max",
            bath.max_frequency,
            "must be positive",
        ));
    }
    let n = bath.modes;
    if n == 0 {
        return Ok(DiscretizedBath::empty());
    }
    let floor = bath.floor();
    if !(bath.max_frequency > floor) {
        return Err(domain(
            "omega_max",
            bath.max_frequency,
            "must exceed the grid floor",
        ));
    }
    let ratio = Float::powf(floor / bath.max_frequency, 1.0 / n as f64);
    let edge = |j: usize| {
        if j == n {
            floor
        } else {
            bath.max_frequency * Float::powi(ratio, j as i32)
        }
    };
    let mut frequencies = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n);
    // Ascending order: bin j spans [edge(j + 1), edge(j)].
    for j in (0..n).rev() {
        let (lo, hi) = (edge(j + 1), edge(j));
        let (weight, first) = bath.moments(lo, hi);
        let centroid = if weight > 0.0 {
            first / weight
        } else {
            Float::sqrt(lo * hi)
        };
        frequencies.push(centroid);
        couplings.push(Float::sqrt(weight));
    }
    DiscretizedBath::from_modes(frequencies, couplings)
}

/// Everything that defines the Hamiltonian.
///
/// Both resonators share the frequency [`PHOTON_FREQUENCY`] and both qubits
/// the photon coupling `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Photon tunneling `J`.
    pub tunneling: f64,
    /// Qubit-photon coupling `g`.
    pub coupling: f64,
    pub drive_left: DrivingField,
    pub drive_right: DrivingField,
    pub bath_spec: BathSpec,
    pub bath: DiscretizedBath,
}

impl ModelSpec {
    /// Builds the model and discretizes the bath logarithmically.
    pub fn new(
        tunneling: f64,
        coupling: f64,
        drive_left: DrivingField,
        drive_right: DrivingField,
        bath_spec: BathSpec,
    ) -> Result<Self, ModelError> {
        let bath = discretize_bath(&bath_spec)?;
        Self::with_bath(tunneling, coupling, drive_left, drive_right, bath_spec, bath)
    }

    /// Builds the model around an explicit set of bath modes.
    pub fn with_bath(
        tunneling: f64,
        coupling: f64,
        drive_left: DrivingField,
        drive_right: DrivingField,
        bath_spec: BathSpec,
        bath: DiscretizedBath,
    ) -> Result<Self, ModelError> {
        if !(tunneling >= 0.0) || !tunneling.is_finite() {
            return Err(domain("J", tunneling, "must be finite and >= 0"));
        }
        if !(coupling >= 0.0) || !coupling.is_finite() {
            return Err(domain("g", coupling, "must be finite and >= 0"));
        }
        Ok(Self {
            tunneling,
            coupling,
            drive_left,
            drive_right,
            bath_spec,
            bath,
        })
    }

    pub fn photon_frequency(&self) -> f64 {
        PHOTON_FREQUENCY
    }

    pub fn bath_modes(&self) -> usize {
        self.bath.len()
    }

    /// `(Δ_L(t), Δ_R(t))`.
    pub fn splittings(&self, t: f64) -> (f64, f64) {
        (self.drive_left.at(t), self.drive_right.at(t))
    }

    /// True when the Hamiltonian does not depend on time.
    pub fn is_time_independent(&self) -> bool {
        self.drive_left.is_static() && self.drive_right.is_static()
    }
}
