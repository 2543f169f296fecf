use nalgebra::DMatrix;

use crate::error::{ConicError, Result};

/// Coordinate-format matrix. Duplicate entries are summed on conversion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    /// Records `value` at `(row, col)`; exact zeros are dropped.
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            if i >= self.nrows || j >= self.ncols {
                return Err(ConicError::Dimension(format!(
                    "triplet ({i}, {j}) outside a {}x{} matrix",
                    self.nrows, self.ncols
                )));
            }
            m[(i, j)] += v;
        }
        Ok(m)
    }
}
