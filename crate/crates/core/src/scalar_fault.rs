//! All 64 single-bit perturbations of a scalar and their absolute errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float_anatomy::{decompose, flip_bit, BitIndex, BitRegion, ValueKind, SPECIAL_EXPONENT};
use crate::wide::Wide;

/// Absolute error caused by one bit flip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AbsError {
    Finite(Wide),
    /// The flip pushed a normal value to exponent field 0; the error is
    /// taken as the original magnitude.
    ZeroOrSubnormal(Wide),
    /// The flip produced Inf or NaN.
    NonNumeric,
}

impl AbsError {
    /// Magnitude of the error, `None` for non-numeric outcomes.
    pub fn magnitude(&self) -> Option<Wide> {
        match *self {
            AbsError::Finite(w) | AbsError::ZeroOrSubnormal(w) => Some(w),
            AbsError::NonNumeric => None,
        }
    }

    pub fn is_non_numeric(&self) -> bool {
        matches!(self, AbsError::NonNumeric)
    }

    /// Scale a finite error by `|factor|` (error propagation through a product).
    pub fn scaled(&self, factor: Wide) -> AbsError {
        match *self {
            AbsError::Finite(w) => AbsError::Finite(w.mul(factor)),
            AbsError::ZeroOrSubnormal(w) => AbsError::ZeroOrSubnormal(w.mul(factor)),
            AbsError::NonNumeric => AbsError::NonNumeric,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub bit: BitIndex,
    pub original: f64,
    pub perturbed: f64,
    pub abs_error: AbsError,
    /// Change in order of magnitude: 0 for mantissa bits, +1 for the sign,
    /// `+2^j` / `-2^j` for exponent bit `j` flipping 0->1 / 1->0.
    pub delta_order: i32,
}

impl PerturbationRecord {
    pub fn region(&self) -> BitRegion {
        self.bit.region()
    }
}

pub fn delta_order(x: f64, bit: BitIndex) -> i32 {
    match bit.region() {
        BitRegion::Mantissa => 0,
        BitRegion::Sign => 1,
        BitRegion::Exponent => {
            let j = bit.index() - 52;
            let set = (decompose(x).biased_exponent >> j) & 1 == 1;
            if set {
                -(1 << j)
            } else {
                1 << j
            }
        }
    }
}

/// `2^n - 1` (increase) or `1 - 2^-n` (decrease) as a wide magnitude.
fn exponent_flip_factor(n: i32, increase: bool) -> Wide {
    // 2^n - 1 = 2^(n-1) * (2 - 2^(1-n)); rounds to 2^n once n > 53
    let coeff = 2.0 - 2f64.powi(1 - n);
    let w = Wide::from_f64(coeff);
    if increase {
        w.mul_pow2(n - 1)
    } else {
        w.mul_pow2(-1)
    }
}

/// Absolute error `|x - flip_bit(x, bit)|` for finite `x`.
///
/// Sign and exponent flips use the closed forms `2|x|`, `|x|(2^(2^j) - 1)` and
/// `|x|(1 - 2^-(2^j))`; mantissa flips are exact powers of two.
pub fn scalar_abs_error(x: f64, bit: BitIndex) -> Result<AbsError> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let anatomy = decompose(x);
    let magnitude = Wide::from_f64(x);
    let perturbed = flip_bit(x, bit);
    let out = match bit.region() {
        BitRegion::Sign => AbsError::Finite(magnitude.mul_pow2(1)),
        BitRegion::Mantissa => {
            // field weight: 2^(j-52) of the binade, subnormals share binade -1022
            let binade = anatomy.unbiased_exponent().max(-1022);
            AbsError::Finite(Wide::pow2(bit.index() as i32 - 52 + binade))
        }
        BitRegion::Exponent => {
            let new_exp = decompose(perturbed).biased_exponent;
            if new_exp == SPECIAL_EXPONENT {
                AbsError::NonNumeric
            } else if new_exp == 0 && anatomy.kind == ValueKind::Normal {
                AbsError::ZeroOrSubnormal(magnitude)
            } else if anatomy.kind == ValueKind::Normal {
                let n = 1i32 << (bit.index() - 52);
                let increase = new_exp > anatomy.biased_exponent;
                AbsError::Finite(magnitude.mul(exponent_flip_factor(n, increase)))
            } else {
                // zero or subnormal original: same sign, no overflow, so the
                // binary64 difference is correctly rounded
                AbsError::Finite(Wide::from_f64(perturbed - x))
            }
        }
    };
    Ok(out)
}

pub fn perturb(x: f64, bit: BitIndex) -> Result<PerturbationRecord> {
    Ok(PerturbationRecord {
        bit,
        original: x,
        perturbed: flip_bit(x, bit),
        abs_error: scalar_abs_error(x, bit)?,
        delta_order: delta_order(x, bit),
    })
}

/// One record per bit, ordered from bit 0 to bit 63.
pub fn enumerate_perturbations(x: f64) -> Result<Vec<PerturbationRecord>> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    BitIndex::all().map(|bit| perturb(x, bit)).collect()
}
