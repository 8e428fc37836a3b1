use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoNormOptions {
    pub rtol: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for TwoNormOptions {
    fn default() -> Self {
        TwoNormOptions { rtol: 1e-6, max_iterations: 10_000, seed: 0x5eed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub inf_norm: f64,
    pub two_norm_estimate: f64,
    pub frobenius_norm: f64,
    pub power_iterations: usize,
    pub power_converged: bool,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest singular value by power iteration on `A^T A`.
///
/// Stops when the eigen-residual `||A^T A x - mu x||` drops below
/// `rtol * mu`, or after `max_iterations`. Returns
/// `(sqrt(mu), iterations, converged)`.
pub fn two_norm_estimate(m: &CsrMatrix, opts: &TwoNormOptions) -> Result<(f64, usize, bool)> {
    if m.nnz() == 0 || m.values().iter().all(|&v| v == 0.0) {
        return Ok((0.0, 0, true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<f64> = (0..m.n_cols()).map(|_| rng.random_range(0.5..1.5)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut mu = 0.0;
    for it in 1..=opts.max_iterations {
        let y = m.spmv_transpose(&m.spmv(&x)?)?;
        mu = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let resid = norm2(&y.iter().zip(&x).map(|(yi, xi)| yi - mu * xi).collect::<Vec<_>>());
        let ny = norm2(&y);
        if ny == 0.0 {
            // start vector in the null space; unlikely with a random start
            return Ok((0.0, it, true));
        }
        if resid <= opts.rtol * mu {
            return Ok((mu.sqrt(), it, true));
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    Ok((mu.sqrt(), opts.max_iterations, false))
}

pub fn norms(m: &CsrMatrix) -> Result<Norms> {
    norms_with(m, &TwoNormOptions::default())
}

pub fn norms_with(m: &CsrMatrix, opts: &TwoNormOptions) -> Result<Norms> {
    if m.nnz() == 0 {
        return Err(Error::Empty("matrix has no stored entries"));
    }
    let inf_norm = (0..m.n_rows())
        .map(|i| m.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let frobenius_norm = norm2(m.values());
    let (two, power_iterations, power_converged) = two_norm_estimate(m, opts)?;
    Ok(Norms { inf_norm, two_norm_estimate: two, frobenius_norm, power_iterations, power_converged })
}
