//! Tangent solve through the Hermitian metric of the trial manifold.
//!
//! In the unnormalized coordinates `Y_n(q) = X_n(q) e^{-|z_n|²/2}` and `z_n`
//! the trial state is holomorphic, and the projected Schrödinger equation
//! becomes `G ṙ = -i ⟨∂D|H|D⟩` with the Gram matrix `G = ⟨∂_r D|∂_j D⟩`.
//! Scaling the amplitude coordinates by `e^{-|z_l|²/2}` turns the rows into
//! exactly the projections of the real system and keeps every entry of order
//! one:
//!
//! ```text
//! Ĝ[X_l(q), X_n(q)]   = S_ln
//! Ĝ[X_l(q), z_n(m)]   = X_n(q) z_l(m)* S_ln
//! Ĝ[z_l(m), z_n(m')]  = Σ_q X_l(q)* X_n(q) (δ_mm' + z_l(m')* z_n(m)) S_ln
//! ```
//!
//! The unknowns are `u_n(q)` and `ż_n`, and the normalized amplitudes follow
//! from `Ẋ_n(q) = u_n(q) + X_n(q) Re Σ_m z_n(m)* ż_n(m)`.

use alloc::vec;
use alloc::vec::Vec;
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_traits::Float;

use super::{DynamicsError, EomSystem, SolverReport, TangentVector};
use crate::ansatz::{MultiD2State, Qubits};
use crate::overlap::OverlapTables;
use crate::C64;

/// The scaled metric `Ĝ`, indexed like the parameters.
pub fn metric(state: &MultiD2State, tables: &OverlapTables) -> Mat<C64> {
    let m = state.multiplicity();
    let modes = state.boson_modes();
    let k = state.params().len();
    let mut g = Mat::<C64>::zeros(k, k);
    for l in 0..m {
        for n in 0..m {
            let s = tables.s[tables.index(l, n)];
            let theta: C64 = Qubits::ALL
                .iter()
                .map(|&q| state.amplitude(q, l).conj() * state.amplitude(q, n))
                .sum();
            for q in Qubits::ALL {
                let amp_l = state.amplitude_index(q, l);
                let amp_n = state.amplitude_index(q, n);
                g[(amp_l, amp_n)] = s;
                for md in 0..modes {
                    let v = state.amplitude(q, n) * state.displacement(md, l).conj() * s;
                    g[(amp_l, state.displacement_index(md, n))] = v;
                    let v = state.amplitude(q, l).conj() * state.displacement(md, n) * s;
                    g[(state.displacement_index(md, l), amp_n)] = v;
                }
            }
            for a in 0..modes {
                let row = state.displacement_index(a, l);
                let zn_a = state.displacement(a, n);
                for b in 0..modes {
                    let col = state.displacement_index(b, n);
                    let mut v = state.displacement(b, l).conj() * zn_a;
                    if a == b {
                        v += 1.0;
                    }
                    g[(row, col)] = theta * v * s;
                }
            }
        }
    }
    g
}

/// Tikhonov-filtered solve of `Ĝ v = b`, with `b` the complex right-hand
/// side of `system`, mapped back to normalized coordinates.
///
/// The residual in the report is that of the real system.
pub fn metric_solve(
    state: &MultiD2State,
    tables: &OverlapTables,
    system: &EomSystem,
    rcond: f64,
) -> Result<(TangentVector, SolverReport), DynamicsError> {
    if !(rcond > 0.0 && rcond < 1.0) {
        return Err(DynamicsError::Setting {
            name: "rcond",
            value: rcond,
        });
    }
    let g = metric(state, tables);
    let k = g.nrows();
    let rhs: Vec<C64> = system
        .rhs
        .chunks_exact(2)
        .map(|p| C64::new(p[0], p[1]))
        .collect();
    let mut first = None;
    let mut count = 0;
    for c in 0..k {
        for r in 0..k {
            let v = g[(r, c)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                count += 1;
                first.get_or_insert((r, c, if v.re.is_finite() { v.im } else { v.re }));
            }
        }
    }
    if let Some((row, col, value)) = first {
        return Err(DynamicsError::NonFinite {
            location: "metric",
            row,
            col,
            value,
            count,
        });
    }
    if let Some(row) = system.rhs.iter().position(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite {
            location: "rhs",
            row,
            col: 0,
            value: system.rhs[row],
            count: system.rhs.iter().filter(|v| !v.is_finite()).count(),
        });
    }

    let eigen = g.self_adjoint_eigen(Side::Lower).map_err(|_| DynamicsError::SvdFailed)?;
    let w = eigen.U();
    let lambda: Vec<f64> = (0..k).map(|i| eigen.S().column_vector()[i].re).collect();
    let lambda_max = lambda.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let eps = rcond * lambda_max;
    let mut rank = 0;
    let mut lambda_min_kept = f64::INFINITY;
    for &li in &lambda {
        // Each complex direction is two real ones.
        if li > eps {
            rank += 2;
            lambda_min_kept = lambda_min_kept.min(li);
        }
    }
    // Applies W diag(f(λ)) W† to a vector.
    let spectral = |f: &dyn Fn(f64) -> f64, x: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); k];
        for i in 0..k {
            let fi = f(lambda[i]);
            if fi == 0.0 || !fi.is_finite() {
                continue;
            }
            let mut coeff = C64::new(0.0, 0.0);
            for r in 0..k {
                coeff += w[(r, i)].conj() * x[r];
            }
            coeff *= fi;
            for (r, o) in out.iter_mut().enumerate() {
                *o += w[(r, i)] * coeff;
            }
        }
        out
    };
    let filtered = spectral(&|l| l / (l * l + eps * eps), &rhs);
    let tangent = if eps > 0.0 {
        reweight(state, filtered, &|x| spectral(&|l| eps * eps / (l * l + eps * eps), x))?
    } else {
        filtered
    };
    let mut tangent = tangent;
    for n in 0..state.multiplicity() {
        let mut rate = 0.0;
        for md in 0..state.boson_modes() {
            rate += (state.displacement(md, n).conj() * tangent[state.displacement_index(md, n)]).re;
        }
        for q in Qubits::ALL {
            tangent[state.amplitude_index(q, n)] += state.amplitude(q, n) * rate;
        }
    }

    let real: Vec<f64> = tangent.iter().flat_map(|c| [c.re, c.im]).collect();
    let residual = relative_residual(system, &real);
    let report = SolverReport {
        residual,
        rank,
        dimension: 2 * k,
        condition: if rank == 0 {
            1.0
        } else {
            lambda_max / lambda_min_kept
        },
    };
    Ok((
        TangentVector::from_real(system.multiplicity, system.bath_modes, &real),
        report,
    ))
}

/// Moves the Tikhonov penalty from `|v|²` to `|T v|²`, where `T` maps the
/// metric unknowns to the normalized ones, so that the result minimizes
/// `|Ĝ v − b|² + ε² |ẋ|²` with `ẋ` the normalized derivatives.
///
/// `T = 1 + Σ_n a_n r_nᵀ` (real-linear, `a_n` the amplitudes of branch `n`,
/// `r_n` its displacements), hence `TᵀT = 1 + U C Uᵀ` with `U = [a, r]` and
/// `C⁻¹ = [[−diag|a_n|², 1], [1, 0]]`. With `B = ε² (Ĝ² + ε²)⁻¹` Woodbury
/// gives `v = v₀ − B U (C⁻¹ + Uᵀ B U)⁻¹ Uᵀ v₀`, every factor bounded.
fn reweight(
    state: &MultiD2State,
    v0: Vec<C64>,
    b_apply: &dyn Fn(&[C64]) -> Vec<C64>,
) -> Result<Vec<C64>, DynamicsError> {
    let m = state.multiplicity();
    let k = v0.len();
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(2 * m);
    for n in 0..m {
        let mut a = vec![C64::new(0.0, 0.0); k];
        for q in Qubits::ALL {
            a[state.amplitude_index(q, n)] = state.amplitude(q, n);
        }
        columns.push(a);
    }
    for n in 0..m {
        let mut r = vec![C64::new(0.0, 0.0); k];
        for md in 0..state.boson_modes() {
            r[state.displacement_index(md, n)] = state.displacement(md, n);
        }
        columns.push(r);
    }
    let real_dot = |x: &[C64], y: &[C64]| -> f64 {
        x.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum()
    };
    let bu: Vec<Vec<C64>> = columns.iter().map(|c| b_apply(c)).collect();
    let size = 2 * m;
    let mut core = Mat::<f64>::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            core[(i, j)] = real_dot(&columns[i], &bu[j]);
        }
    }
    for n in 0..m {
        core[(n, n)] -= columns[n].iter().map(|c| c.norm_sqr()).sum::<f64>();
        core[(n, m + n)] += 1.0;
        core[(m + n, n)] += 1.0;
    }
    let mut y = Mat::<f64>::zeros(size, 1);
    for i in 0..size {
        y[(i, 0)] = real_dot(&columns[i], &v0);
    }
    if !(0..size).all(|i| y[(i, 0)].is_finite()) {
        return Err(DynamicsError::NonFinite {
            location: "reweighting",
            row: 0,
            col: 0,
            value: f64::NAN,
            count: size,
        });
    }
    let coeff = core.partial_piv_lu().solve(&y);
    let mut v = v0;
    for (j, col) in bu.iter().enumerate() {
        let c = coeff[(j, 0)];
        if !c.is_finite() {
            return Err(DynamicsError::NonFinite {
                location: "reweighting",
                row: j,
                col: 0,
                value: c,
                count: 1,
            });
        }
        for (vi, bi) in v.iter_mut().zip(col) {
            *vi -= bi * c;
        }
    }
    Ok(v)
}

fn relative_residual(system: &EomSystem, x: &[f64]) -> f64 {
    let p = system.rhs.len();
    let mut res = system.rhs.iter().map(|b| -b).collect::<Vec<f64>>();
    for (c, &xc) in x.iter().enumerate() {
        if xc == 0.0 {
            continue;
        }
        for (r, out) in res.iter_mut().enumerate().take(p) {
            *out += system.matrix[(r, c)] * xc;
        }
    }
    let rnorm = Float::sqrt(res.iter().map(|v| v * v).sum::<f64>());
    let bnorm = Float::sqrt(system.rhs.iter().map(|v| v * v).sum::<f64>());
    if bnorm > 0.0 {
        rnorm / bnorm
    } else {
        rnorm
    }
}
