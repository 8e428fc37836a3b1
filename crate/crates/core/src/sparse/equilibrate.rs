use serde::{Deserialize, Serialize};

use super::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibrationScaling {
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
}

/// DGEEQU-style scaling: `R_i = 1 / max_j |a_ij|`, then
/// `C_j = 1 / max_i R_i |a_ij|`. The returned matrix holds `R_i a_ij C_j` on
/// the original pattern, explicit zeros included.
pub fn equilibrate(m: &CsrMatrix) -> Result<(CsrMatrix, EquilibrationScaling)> {
    let mut row_max = vec![0.0f64; m.n_rows()];
    for (i, _, v) in m.triplets() {
        row_max[i] = row_max[i].max(v.abs());
    }
    if let Some(i) = row_max.iter().position(|&r| r == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    let row_scale: Vec<f64> = row_max.iter().map(|r| 1.0 / r).collect();

    let mut col_max = vec![0.0f64; m.n_cols()];
    for (i, j, v) in m.triplets() {
        col_max[j] = col_max[j].max(row_scale[i] * v.abs());
    }
    if let Some(j) = col_max.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let col_scale: Vec<f64> = col_max.iter().map(|c| 1.0 / c).collect();

    let scaled = m.map_values(|i, j, v| row_scale[i] * v * col_scale[j]);
    Ok((scaled, EquilibrationScaling { row_scale, col_scale }))
}

/// `b_i <- R_i b_i`.
pub fn apply_scaling_to_rhs(b: &[f64], scaling: &EquilibrationScaling) -> Result<Vec<f64>> {
    if b.len() != scaling.row_scale.len() {
        return Err(Error::LengthMismatch { left: scaling.row_scale.len(), right: b.len() });
    }
    Ok(b.iter().zip(&scaling.row_scale).map(|(x, r)| r * x).collect())
}

/// `x_j <- C_j x_j`, recovering the unknowns of the unscaled system.
pub fn unscale_solution(x: &[f64], scaling: &EquilibrationScaling) -> Result<Vec<f64>> {
    if x.len() != scaling.col_scale.len() {
        return Err(Error::LengthMismatch { left: scaling.col_scale.len(), right: x.len() });
    }
    Ok(x.iter().zip(&scaling.col_scale).map(|(x, c)| c * x).collect())
}
