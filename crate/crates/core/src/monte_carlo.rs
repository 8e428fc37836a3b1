//! Exhaustive single-flip campaigns over random vectors with pinned
//! exponents.
//!
//! Each sample draws `u` and `v` whose elements all share one biased
//! exponent per vector, with random mantissas, then flips every bit of every
//! element of both operands in turn and recomputes the dot product.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float_anatomy::{BitIndex, EXPONENT_BIAS, MANTISSA_BITS};

pub const SURFACE_CSV_HEADER: &str = "mag_u,mag_v,samples,failures,probability";
pub const SLICE_CSV_HEADER: &str = "bit,mag,failures,probability";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub vector_length: usize,
    pub samples_per_cell: usize,
    pub magnitude_grid: Vec<i32>,
    pub failure_threshold: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            vector_length: 100,
            samples_per_cell: 1000,
            magnitude_grid: (-10..=10).collect(),
            failure_threshold: 1.0,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn with_grid(min: i32, max: i32) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidConfig(format!("grid min {min} exceeds max {max}")));
        }
        Ok(McConfig { magnitude_grid: (min..=max).collect(), ..Default::default() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.vector_length == 0 || self.samples_per_cell == 0 {
            return Err(Error::InvalidConfig("vector length and samples per cell must be positive".into()));
        }
        if self.magnitude_grid.is_empty() {
            return Err(Error::InvalidConfig("magnitude grid is empty".into()));
        }
        if let Some(m) = self.magnitude_grid.iter().find(|m| !(-1022..=1023).contains(*m)) {
            return Err(Error::InvalidConfig(format!("magnitude {m} outside the normal range -1022..=1023")));
        }
        if !(self.failure_threshold.is_finite() && self.failure_threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad failure threshold {}", self.failure_threshold)));
        }
        Ok(())
    }

    /// Single flips per cell: `2 * 64 * N * M`.
    pub fn trials_per_cell(&self) -> u64 {
        2 * 64 * self.vector_length as u64 * self.samples_per_cell as u64
    }
}

/// `N` positive values with biased exponent `magnitude_exp + 1023` and
/// uniformly random 52-bit mantissas.
pub fn generate_vector<R: Rng>(magnitude_exp: i32, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(-1022..=1023).contains(&magnitude_exp) {
        return Err(Error::InvalidConfig(format!("magnitude {magnitude_exp} outside the normal range")));
    }
    let exp_bits = ((magnitude_exp + EXPONENT_BIAS) as u64) << MANTISSA_BITS;
    let mask = (1u64 << MANTISSA_BITS) - 1;
    Ok((0..n).map(|_| f64::from_bits(exp_bits | (rng.random::<u64>() & mask))).collect())
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the cell stream. Depends on the unordered magnitude pair so that
/// cells `(a, b)` and `(b, a)` see the same vectors.
pub fn cell_seed(seed: u64, mag_u: i32, mag_v: i32) -> u64 {
    let (lo, hi) = (mag_u.min(mag_v), mag_u.max(mag_v));
    let h = splitmix(seed ^ splitmix(lo as u32 as u64));
    splitmix(h ^ splitmix((hi as u32 as u64) << 32 | 0x5a5a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub mag_u: i32,
    pub mag_v: i32,
    pub samples: u64,
    pub trials: u64,
    pub failures: u64,
    /// Failures by flipped bit, summed over both operands.
    pub per_bit: Vec<u64>,
}

impl CellResult {
    pub fn probability(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }

    /// Per-bit probability: `2 * N * M` flips hit each bit index.
    pub fn bit_probability(&self, bit: usize) -> f64 {
        self.per_bit[bit] as f64 / (self.trials / 64) as f64
    }
}

/// Count failing flips of one sample pair into `per_bit`.
///
/// The perturbed result is recomputed left to right exactly as the clean
/// one, reusing the clean prefix sum up to the flipped element.
pub fn tally_sample(u: &[f64], v: &[f64], threshold: f64, per_bit: &mut [u64; 64]) -> Result<u64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let n = u.len();
    let products: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for p in &products {
        acc += p;
        prefix.push(acc);
    }
    let c = acc;
    let mut failures = 0;
    for k in 0..n {
        for (x, other) in [(u[k], v[k]), (v[k], u[k])] {
            for bit in 0..64u32 {
                let flipped = f64::from_bits(x.to_bits() ^ (1u64 << bit));
                let mut s = prefix[k] + flipped * other;
                for p in &products[k + 1..] {
                    s += p;
                }
                let fail = !s.is_finite() || (c - s).abs() > threshold;
                if fail {
                    per_bit[bit as usize] += 1;
                    failures += 1;
                }
            }
        }
    }
    Ok(failures)
}

pub fn run_cell(mag_u: i32, mag_v: i32, cfg: &McConfig) -> Result<CellResult> {
    cfg.validate()?;
    for m in [mag_u, mag_v] {
        if !(-1022..=1023).contains(&m) {
            return Err(Error::InvalidConfig(format!("magnitude {m} outside the normal range")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(cfg.seed, mag_u, mag_v));
    let mut per_bit = [0u64; 64];
    let mut failures = 0;
    let n = cfg.vector_length;
    for _ in 0..cfg.samples_per_cell {
        // smaller magnitude first, so the pair is independent of axis order
        let first = generate_vector(mag_u.min(mag_v), n, &mut rng)?;
        let second = generate_vector(mag_u.max(mag_v), n, &mut rng)?;
        let (u, v) = if mag_u <= mag_v { (first, second) } else { (second, first) };
        failures += tally_sample(&u, &v, cfg.failure_threshold, &mut per_bit)?;
    }
    Ok(CellResult {
        mag_u,
        mag_v,
        samples: cfg.samples_per_cell as u64,
        trials: cfg.trials_per_cell(),
        failures,
        per_bit: per_bit.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSurface {
    pub config: McConfig,
    /// Row-major over `(mag_u, mag_v)` in grid order.
    pub cells: Vec<CellResult>,
}

impl McSurface {
    fn position(&self, mag: i32) -> Option<usize> {
        self.config.magnitude_grid.iter().position(|&m| m == mag)
    }

    pub fn cell(&self, mag_u: i32, mag_v: i32) -> Option<&CellResult> {
        let (i, j) = (self.position(mag_u)?, self.position(mag_v)?);
        self.cells.get(i * self.config.magnitude_grid.len() + j)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{SURFACE_CSV_HEADER}")?;
        for c in &self.cells {
            writeln!(w, "{},{},{},{},{}", c.mag_u, c.mag_v, c.samples, c.failures, format_sig17(c.probability()))?;
        }
        Ok(())
    }
}

/// Every grid pair, cells evaluated in parallel; the result does not depend
/// on the thread count.
pub fn run_surface(cfg: &McConfig) -> Result<McSurface> {
    cfg.validate()?;
    let g = &cfg.magnitude_grid;
    let pairs: Vec<(i32, i32)> = g.iter().flat_map(|&a| g.iter().map(move |&b| (a, b))).collect();
    let cells = pairs.into_par_iter().map(|(a, b)| run_cell(a, b, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(McSurface { config: cfg.clone(), cells })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceSelector {
    /// Cells `(m, m)`.
    Diagonal,
    /// Cells `(k, m)` for every grid magnitude `m`.
    Fixed(i32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub bit: u32,
    pub mag: i32,
    pub failures: u64,
    pub probability: f64,
}

pub fn per_bit_slice(surface: &McSurface, selector: SliceSelector) -> Result<Vec<SliceRow>> {
    if let SliceSelector::Fixed(k) = selector {
        if surface.position(k).is_none() {
            return Err(Error::InvalidConfig(format!("fixed magnitude {k} is not on the grid")));
        }
    }
    let mut rows = Vec::new();
    for bit in BitIndex::all() {
        for &m in &surface.config.magnitude_grid {
            let cell = match selector {
                SliceSelector::Diagonal => surface.cell(m, m),
                SliceSelector::Fixed(k) => surface.cell(k, m),
            }
            .ok_or_else(|| Error::InvalidConfig(format!("cell for magnitude {m} missing")))?;
            let b = bit.index() as usize;
            rows.push(SliceRow { bit: bit.index(), mag: m, failures: cell.per_bit[b], probability: cell.bit_probability(b) });
        }
    }
    Ok(rows)
}

pub fn write_slice_csv<W: Write>(rows: &[SliceRow], w: &mut W) -> Result<()> {
    writeln!(w, "{SLICE_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.bit, r.mag, r.failures, format_sig17(r.probability))?;
    }
    Ok(())
}

/// Positional decimal with 17 significant digits (`0.015625000000000000`).
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.16}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (16 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // log10 can land one off near powers of ten
    let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    let sig = digits.trim_start_matches('0').len();
    if sig > 17 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else if sig < 17 {
        format!("{x:.prec$}", prec = decimals + 1)
    } else {
        s
    }
}
