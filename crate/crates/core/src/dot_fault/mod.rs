//! Fault model for dot products.
//!
//! A single upset in `c = sum(a_i * b_i)` can hit an input `a_i`, an input
//! `b_i`, or the intermediate product `c_i = a_i * b_i` before it reaches the
//! accumulator. [`exact`] enumerates those flips for concrete vectors;
//! [`table`] and [`classify`] summarize them per pair of biased exponents so
//! that arbitrarily long vectors can be characterized from their exponent
//! ranges alone.

pub mod classify;
pub mod exact;
pub mod interval;
pub mod model;
pub mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float_anatomy::{decompose, order_of_magnitude_bound, ValueKind};
use crate::wide::Wide;

pub use classify::{classify_errors, classify_value, ClassifiedTable, ErrorClass, ErrorClassTally};
pub use exact::{enumerate_dot_errors, tally_exact, DotPerturbation, Site};
pub use interval::{extract_interval, ExponentInterval};
pub use model::predict_bit_failure;
pub use table::{build_lookup_table, CellCounts, ErrorLookupTable, Outcome};

/// Left-to-right sequential dot product.
pub fn dot_product(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::Empty("dot product operands"));
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// An exact power of two `2^k`, used for the exponent part `x_exp` of a value
/// `x = m * x_exp` with `m` in `[1, 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PowerOfTwo(pub i32);

impl PowerOfTwo {
    /// The exponent part of a finite nonzero value.
    pub fn of_value(x: f64) -> Result<Self> {
        if !x.is_finite() || x == 0.0 {
            return Err(Error::ZeroOrNonFinite(x));
        }
        let a = decompose(x);
        let e = match a.kind {
            ValueKind::Normal => a.unbiased_exponent(),
            _ => 63 - a.mantissa.leading_zeros() as i32 - 1074,
        };
        Ok(PowerOfTwo(e))
    }

    pub fn to_wide(self) -> Wide {
        Wide::pow2(self.0)
    }

    pub fn to_f64(self) -> Option<f64> {
        (-1074..=1023).contains(&self.0).then(|| crate::float_anatomy::pow2_f64(self.0))
    }
}

/// `4 * alpha_exp * beta_exp`, a strict upper bound on `|alpha * beta|` and on
/// any error from flipping a mantissa bit of either operand.
pub fn bound_mantissa_and_sign(alpha_exp: PowerOfTwo, beta_exp: PowerOfTwo) -> PowerOfTwo {
    PowerOfTwo(alpha_exp.0 + beta_exp.0 + 2)
}

/// Replace every element by the next power of two above its magnitude.
pub fn upper_bound_vector(v: &[f64]) -> Result<Vec<f64>> {
    v.iter().map(|&x| order_of_magnitude_bound(x)).collect()
}
