//! Compressed-sparse-row storage for real operators.

use alloc::vec::Vec;

use crate::C64;

/// Real square matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entry `(row, col)`, zero when not stored.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.values[range])
            .filter(|(c, _)| **c == col)
            .map(|(_, v)| *v)
            .sum()
    }

    /// Stored `(col, value)` pairs of one row.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (row, out) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = C64::new(0.0, 0.0);
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += x[self.cols[idx]] * self.values[idx];
            }
            *out = acc;
        }
    }

    /// `A + diag(d)`.
    pub fn plus_diagonal(&self, diag: &[f64]) -> SparseMatrix {
        let mut b = Builder::new(self.dim);
        for (row, &d) in diag.iter().enumerate() {
            for (col, v) in self.row(row) {
                b.push(col, v);
            }
            b.push(row, d);
            b.finish_row();
        }
        b.build()
    }

    /// Dense row-major copy, for small matrices.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim * self.dim];
        for row in 0..self.dim {
            for (col, v) in self.row(row) {
                out[row * self.dim + col] += v;
            }
        }
        out
    }
}

/// Row-by-row CSR builder; duplicate columns within a row are merged.
pub(crate) struct Builder {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    row_start: usize,
}

impl Builder {
    pub(crate) fn new(dim: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        Self {
            dim,
            row_ptr,
            cols: Vec::new(),
            values: Vec::new(),
            row_start: 0,
        }
    }

    pub(crate) fn push(&mut self, col: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        if let Some(i) = self.cols[self.row_start..].iter().position(|&c| c == col) {
            self.values[self.row_start + i] += value;
        } else {
            self.cols.push(col);
            self.values.push(value);
        }
    }

    pub(crate) fn finish_row(&mut self) {
        self.row_ptr.push(self.cols.len());
        self.row_start = self.cols.len();
    }

    pub(crate) fn build(self) -> SparseMatrix {
        debug_assert_eq!(self.row_ptr.len(), self.dim + 1);
        SparseMatrix {
            dim: self.dim,
            row_ptr: self.row_ptr,
            cols: self.cols,
            values: self.values,
        }
    }
}
