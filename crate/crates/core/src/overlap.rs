//! Branch-pair tables shared by the equations of motion and the observables.
//!
//! Every table is `M × M`, stored row-major with the bra branch `l` as the
//! row and the ket branch `n` as the column.

use alloc::vec;
use alloc::vec::Vec;

use crate::ansatz::{MultiD2State, Qubits};
use crate::model::DiscretizedBath;
use crate::C64;

#[derive(Debug, Clone)]
pub struct OverlapTables {
    m: usize,
    /// Debye-Waller factors `S_{ln}`.
    pub s: Vec<C64>,
    /// `Θ^a_{nl} = Σ_q X_l(q)* X_n(q)`: qubit-state overlap.
    pub theta_a: Vec<C64>,
    /// `Θ^b`: matrix element of `σz^L`.
    pub theta_b: Vec<C64>,
    /// `Θ^c`: matrix element of `σz^R`.
    pub theta_c: Vec<C64>,
    /// `Θ^d`: matrix element of `σx^L`.
    pub theta_d: Vec<C64>,
    /// `Θ^e`: matrix element of `σx^R`.
    pub theta_e: Vec<C64>,
    /// `A_l* A_n − D_l* D_n`, half the matrix element of `σz^L + σz^R`.
    pub sz_sum_half: Vec<C64>,
    /// `μ_l* μ_n`.
    pub mu_mu: Vec<C64>,
    /// `ν_l* ν_n`.
    pub nu_nu: Vec<C64>,
    /// `μ_l* ν_n + ν_l* μ_n`.
    pub hopping: Vec<C64>,
    bath: Option<BathSums>,
}

/// Bath sums that need the mode frequencies and couplings.
#[derive(Debug, Clone)]
pub struct BathSums {
    /// `Σ_k ω_k η_lk* η_nk`.
    pub energy: Vec<C64>,
    /// `Σ_k φ_k (η_lk* + η_nk)`.
    pub coupling: Vec<C64>,
}

pub fn build_overlap_tables(state: &MultiD2State) -> OverlapTables {
    let m = state.multiplicity();
    let zero = C64::new(0.0, 0.0);
    let mut t = OverlapTables {
        m,
        s: vec![zero; m * m],
        theta_a: vec![zero; m * m],
        theta_b: vec![zero; m * m],
        theta_c: vec![zero; m * m],
        theta_d: vec![zero; m * m],
        theta_e: vec![zero; m * m],
        sz_sum_half: vec![zero; m * m],
        mu_mu: vec![zero; m * m],
        nu_nu: vec![zero; m * m],
        hopping: vec![zero; m * m],
        bath: None,
    };
    let amp = |q: Qubits, n: usize| state.amplitude(q, n);
    use Qubits::*;
    for l in 0..m {
        for n in 0..m {
            let i = l * m + n;
            let (al, bl, cl, dl) = (
                amp(UpUp, l).conj(),
                amp(UpDown, l).conj(),
                amp(DownUp, l).conj(),
                amp(DownDown, l).conj(),
            );
            let (an, bn, cn, dn) = (amp(UpUp, n), amp(UpDown, n), amp(DownUp, n), amp(DownDown, n));
            let (aa, bb, cc, dd) = (al * an, bl * bn, cl * cn, dl * dn);
            t.theta_a[i] = aa + bb + cc + dd;
            t.theta_b[i] = aa + bb - cc - dd;
            t.theta_c[i] = aa - bb + cc - dd;
            t.theta_d[i] = al * cn + bl * dn + cl * an + dl * bn;
            t.theta_e[i] = al * bn + bl * an + cl * dn + dl * cn;
            t.sz_sum_half[i] = aa - dd;
            t.s[i] = if l == n {
                C64::new(1.0, 0.0)
            } else {
                state.overlap_unchecked(l, n)
            };
            let (mul, mun) = (state.mu(l).conj(), state.mu(n));
            let (nul, nun) = (state.nu(l).conj(), state.nu(n));
            t.mu_mu[i] = mul * mun;
            t.nu_nu[i] = nul * nun;
            t.hopping[i] = mul * nun + nul * mun;
        }
    }
    t
}

impl OverlapTables {
    pub fn multiplicity(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn index(&self, l: usize, n: usize) -> usize {
        l * self.m + n
    }

    /// Adds the bath sums; `bath` must match the state's mode count.
    pub fn with_bath(mut self, state: &MultiD2State, bath: &DiscretizedBath) -> Self {
        let m = self.m;
        let zero = C64::new(0.0, 0.0);
        let mut energy = vec![zero; m * m];
        let mut coupling = vec![zero; m * m];
        let freqs = bath.frequencies();
        let phis = bath.couplings();
        for l in 0..m {
            let row_l = state.eta_row(l);
            for n in 0..m {
                let row_n = state.eta_row(n);
                let mut e = zero;
                let mut c = zero;
                for k in 0..row_l.len() {
                    let el = row_l[k].conj();
                    e += freqs[k] * el * row_n[k];
                    c += phis[k] * (el + row_n[k]);
                }
                energy[l * m + n] = e;
                coupling[l * m + n] = c;
            }
        }
        self.bath = Some(BathSums { energy, coupling });
        self
    }

    pub fn bath(&self) -> Option<&BathSums> {
        self.bath.as_ref()
    }
}
