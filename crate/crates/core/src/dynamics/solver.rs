//! Regularized least-squares solve of the tangent system.

use alloc::vec;
use alloc::vec::Vec;
use faer::{Mat, MatRef};
use num_traits::Float;

use super::{DynamicsError, EomSystem, TangentVector};

/// Diagnostics of one truncated-SVD solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    /// `‖A x − b‖ / ‖b‖`, or `‖A x − b‖` when `b = 0`.
    pub residual: f64,
    /// Number of singular values kept.
    pub rank: usize,
    /// Full dimension of the system.
    pub dimension: usize,
    /// `σ_max / σ_min` over the kept singular values.
    pub condition: f64,
}

impl SolverReport {
    /// Worst-case combination of two reports.
    pub fn worst(self, other: SolverReport) -> SolverReport {
        SolverReport {
            residual: self.residual.max(other.residual),
            rank: self.rank.min(other.rank),
            dimension: self.dimension.max(other.dimension),
            condition: self.condition.max(other.condition),
        }
    }
}

fn check_finite(matrix: MatRef<'_, f64>, rhs: &[f64]) -> Result<(), DynamicsError> {
    let mut first = None;
    let mut count = 0;
    for col in 0..matrix.ncols() {
        for row in 0..matrix.nrows() {
            let v = matrix[(row, col)];
            if !v.is_finite() {
                count += 1;
                first.get_or_insert(("matrix", row, col, v));
            }
        }
    }
    for (row, &v) in rhs.iter().enumerate() {
        if !v.is_finite() {
            count += 1;
            first.get_or_insert(("rhs", row, 0, v));
        }
    }
    match first {
        None => Ok(()),
        Some((location, row, col, value)) => Err(DynamicsError::NonFinite {
            location,
            row,
            col,
            value,
            count,
        }),
    }
}

fn norm2(v: &[f64]) -> f64 {
    Float::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

/// How small singular values of the tangent system are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularization {
    /// Filter factors `σ² / (σ² + λ²)` with `λ = rcond · σ_max`.
    #[default]
    Tikhonov,
    /// Singular values at or below `rcond · σ_max` are dropped.
    Truncation,
}

/// Minimum-norm least-squares solution of `A x = b` with singular values
/// below `rcond · σ_max` discarded.
pub fn truncated_svd_solve(
    matrix: MatRef<'_, f64>,
    rhs: &[f64],
    rcond: f64,
) -> Result<(Vec<f64>, SolverReport), DynamicsError> {
    regularized_solve(matrix, rhs, rcond, Regularization::Truncation)
}

/// Regularized least-squares solution of `A x = b` through the SVD of `A`.
///
/// The report counts as rank the singular values above `rcond · σ_max`
/// under either regularization.
pub fn regularized_solve(
    matrix: MatRef<'_, f64>,
    rhs: &[f64],
    rcond: f64,
    regularization: Regularization,
) -> Result<(Vec<f64>, SolverReport), DynamicsError> {
    if !(rcond > 0.0 && rcond < 1.0) {
        return Err(DynamicsError::Setting {
            name: "rcond",
            value: rcond,
        });
    }
    assert_eq!(matrix.nrows(), rhs.len(), "rhs length must match the matrix rows");
    check_finite(matrix, rhs)?;
    let rows = matrix.nrows();
    let cols = matrix.ncols();
    let mut x = vec![0.0; cols];
    let bnorm = norm2(rhs);
    if rows == 0 || cols == 0 {
        return Ok((
            x,
            SolverReport {
                residual: 0.0,
                rank: 0,
                dimension: cols,
                condition: 1.0,
            },
        ));
    }

    // A failed QR sweep on A is retried on Aᵀ, whose factors are (V, S, U).
    let (u, sigma, v) = match matrix.thin_svd() {
        Ok(svd) => (
            svd.U().to_owned(),
            svd.S().column_vector().to_owned(),
            svd.V().to_owned(),
        ),
        Err(_) => {
            let svd = matrix.transpose().thin_svd().map_err(|_| DynamicsError::SvdFailed)?;
            (
                svd.V().to_owned(),
                svd.S().column_vector().to_owned(),
                svd.U().to_owned(),
            )
        }
    };
    let sigma_max = (0..sigma.nrows()).map(|i| sigma[i]).fold(0.0, f64::max);
    let cutoff = rcond * sigma_max;
    let mut rank = 0;
    let mut sigma_min_kept = f64::INFINITY;
    for i in 0..sigma.nrows() {
        let s = sigma[i];
        let kept = s > cutoff && s > 0.0;
        if kept {
            rank += 1;
            sigma_min_kept = sigma_min_kept.min(s);
        }
        let inverse = match regularization {
            Regularization::Truncation if kept => 1.0 / s,
            Regularization::Truncation => continue,
            Regularization::Tikhonov if s > 0.0 => s / (s * s + cutoff * cutoff),
            Regularization::Tikhonov => continue,
        };
        let mut coeff = 0.0;
        for r in 0..rows {
            coeff += u[(r, i)] * rhs[r];
        }
        coeff *= inverse;
        for (c, xc) in x.iter_mut().enumerate() {
            *xc += v[(c, i)] * coeff;
        }
    }

    let mut residual = vec![0.0; rows];
    for (c, &xc) in x.iter().enumerate() {
        if xc == 0.0 {
            continue;
        }
        for (r, res) in residual.iter_mut().enumerate() {
            *res += matrix[(r, c)] * xc;
        }
    }
    for (res, b) in residual.iter_mut().zip(rhs) {
        *res -= b;
    }
    let rnorm = norm2(&residual);
    let report = SolverReport {
        residual: if bnorm > 0.0 { rnorm / bnorm } else { rnorm },
        rank,
        dimension: cols,
        condition: if rank == 0 {
            1.0
        } else {
            sigma_max / sigma_min_kept
        },
    };
    Ok((x, report))
}

/// Solves an assembled equation-of-motion system for the tangent vector.
pub fn solve_tangent(
    system: &EomSystem,
    rcond: f64,
    regularization: Regularization,
) -> Result<(TangentVector, SolverReport), DynamicsError> {
    let (x, report) = regularized_solve(system.matrix.as_ref(), &system.rhs, rcond, regularization)?;
    Ok((
        TangentVector::from_real(system.multiplicity, system.bath_modes, &x),
        report,
    ))
}

/// Dense real matrix from row-major data, for tests and callers without faer.
pub fn matrix_from_rows(rows: usize, cols: usize, data: &[f64]) -> Mat<f64> {
    Mat::from_fn(rows, cols, |r, c| data[r * cols + c])
}
