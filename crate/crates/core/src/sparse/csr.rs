use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidMatrix(m));
        if n_rows == 0 || n_cols == 0 {
            return bad(format!("dimensions {n_rows}x{n_cols}"));
        }
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return bad("row offsets must have n_rows + 1 entries starting at 0".into());
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return bad("row offsets are not monotone".into());
        }
        let nnz = *row_offsets.last().unwrap();
        if col_indices.len() != nnz || values.len() != nnz {
            return bad(format!("{nnz} entries declared, {} columns and {} values given", col_indices.len(), values.len()));
        }
        if let Some(&c) = col_indices.iter().find(|&&c| c >= n_cols) {
            return bad(format!("column index {c} out of range for {n_cols} columns"));
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(v));
        }
        Ok(CsrMatrix { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Assemble from (row, col, value) triplets. Entries are sorted by column
    /// within each row; duplicates are summed; explicit zeros are kept.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidMatrix(format!("entry ({r}, {c}) outside {n_rows}x{n_cols}")));
            }
            rows[r].push((c, v));
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if col_indices.len() > *row_offsets.last().unwrap() && *col_indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self::new(n_rows, n_cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Stored entries, explicit zeros included.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn explicit_zeros(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0.0).count()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Same pattern, values replaced by `f(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.triplets() {
            values.push(f(i, j, v));
        }
        CsrMatrix { values, ..self.clone() }
    }

    /// `y = A x`, each row accumulated left to right.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::LengthMismatch { left: self.n_cols, right: x.len() });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().with_min_len(1024).enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        });
    }

    /// `y = A^T x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::LengthMismatch { left: self.n_rows, right: x.len() });
        }
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                y[self.col_indices[k]] += self.values[k] * xi;
            }
        }
        Ok(y)
    }

    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.n_rows {
            return Err(Error::LengthMismatch { left: self.n_rows, right: factors.len() });
        }
        Ok(self.map_values(|i, _, v| factors[i] * v))
    }
}
