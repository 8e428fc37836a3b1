//! Bit-level anatomy of IEEE-754 binary64 values.
//!
//! A binary64 word is laid out as
//!
//! ```text
//!  63 | 62 ........ 52 | 51 ............................ 0
//! sign| biased exponent|            mantissa
//! ```
//!
//! and a normal value is `(-1)^sign * (1 + mantissa * 2^-52) * 2^(biased - 1023)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EXPONENT_BIAS: i32 = 1023;
pub const MANTISSA_BITS: u32 = 52;
pub const EXPONENT_BITS: u32 = 11;
/// All-ones exponent field: Inf or NaN.
pub const SPECIAL_EXPONENT: u16 = 2047;
/// Largest biased exponent of a finite value.
pub const MAX_FINITE_EXPONENT: u16 = 2046;

const MANTISSA_MASK: u64 = (1 << MANTISSA_BITS) - 1;
const EXPONENT_MASK: u64 = 0x7ff;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    Zero,
    Subnormal,
    Normal,
    Infinity,
    NaN,
}

impl ValueKind {
    pub fn is_finite(self) -> bool {
        !matches!(self, ValueKind::Infinity | ValueKind::NaN)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Zero => "zero",
            ValueKind::Subnormal => "subnormal",
            ValueKind::Normal => "normal",
            ValueKind::Infinity => "infinity",
            ValueKind::NaN => "nan",
        };
        f.write_str(s)
    }
}

/// Sign, biased exponent and mantissa fields of one binary64 value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FloatAnatomy {
    pub sign: u8,
    pub biased_exponent: u16,
    pub mantissa: u64,
    pub kind: ValueKind,
}

impl FloatAnatomy {
    pub fn decompose(x: f64) -> Self {
        let bits = x.to_bits();
        let sign = (bits >> 63) as u8;
        let biased_exponent = ((bits >> MANTISSA_BITS) & EXPONENT_MASK) as u16;
        let mantissa = bits & MANTISSA_MASK;
        let kind = match (biased_exponent, mantissa) {
            (0, 0) => ValueKind::Zero,
            (0, _) => ValueKind::Subnormal,
            (SPECIAL_EXPONENT, 0) => ValueKind::Infinity,
            (SPECIAL_EXPONENT, _) => ValueKind::NaN,
            _ => ValueKind::Normal,
        };
        FloatAnatomy { sign, biased_exponent, mantissa, kind }
    }

    pub fn to_bits(&self) -> u64 {
        ((self.sign as u64 & 1) << 63)
            | ((self.biased_exponent as u64 & EXPONENT_MASK) << MANTISSA_BITS)
            | (self.mantissa & MANTISSA_MASK)
    }

    pub fn reconstruct(&self) -> f64 {
        f64::from_bits(self.to_bits())
    }

    /// `biased_exponent - 1023`; for zero and subnormals this is the
    /// nominal -1023 of the stored field, not the value's true exponent.
    pub fn unbiased_exponent(&self) -> i32 {
        self.biased_exponent as i32 - EXPONENT_BIAS
    }

    /// The exponent field as an 11-character binary string.
    pub fn exponent_pattern(&self) -> String {
        format!("{:011b}", self.biased_exponent)
    }
}

pub fn decompose(x: f64) -> FloatAnatomy {
    FloatAnatomy::decompose(x)
}

pub fn reconstruct(anatomy: &FloatAnatomy) -> f64 {
    anatomy.reconstruct()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitRegion {
    Mantissa,
    Exponent,
    Sign,
}

impl fmt::Display for BitRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BitRegion::Mantissa => "mantissa",
            BitRegion::Exponent => "exponent",
            BitRegion::Sign => "sign",
        })
    }
}

/// Position of one bit in a binary64 word, 0 (least significant mantissa
/// bit) through 63 (sign).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BitIndex(u8);

impl BitIndex {
    pub const SIGN: BitIndex = BitIndex(63);
    /// Most significant exponent bit.
    pub const TOP_EXPONENT: BitIndex = BitIndex(62);
    pub const LOWEST_EXPONENT: BitIndex = BitIndex(52);

    pub fn new(index: u32) -> Result<Self> {
        if index < 64 {
            Ok(BitIndex(index as u8))
        } else {
            Err(Error::BitOutOfRange(index))
        }
    }

    /// Exponent bit `j` (0..=10), i.e. word bit `52 + j`.
    pub fn exponent(j: u32) -> Result<Self> {
        if j < EXPONENT_BITS {
            Ok(BitIndex(52 + j as u8))
        } else {
            Err(Error::BitOutOfRange(52 + j))
        }
    }

    pub fn index(self) -> u32 {
        self.0 as u32
    }

    pub fn region(self) -> BitRegion {
        match self.0 {
            0..=51 => BitRegion::Mantissa,
            52..=62 => BitRegion::Exponent,
            _ => BitRegion::Sign,
        }
    }

    /// Position within the exponent field, if this is an exponent bit.
    pub fn exponent_position(self) -> Option<u32> {
        (self.region() == BitRegion::Exponent).then(|| self.0 as u32 - 52)
    }

    pub fn all() -> impl DoubleEndedIterator<Item = BitIndex> + ExactSizeIterator + Clone {
        (0u8..64).map(BitIndex)
    }

    pub fn exponent_bits() -> impl DoubleEndedIterator<Item = BitIndex> + ExactSizeIterator + Clone {
        (52u8..63).map(BitIndex)
    }
}

impl TryFrom<u8> for BitIndex {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        BitIndex::new(value as u32)
    }
}

impl From<BitIndex> for u8 {
    fn from(bit: BitIndex) -> u8 {
        bit.0
    }
}

impl fmt::Display for BitIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Inverts exactly one bit of the stored representation. NaN payloads and
/// non-finite results pass through untouched.
pub fn flip_bit(x: f64, bit: BitIndex) -> f64 {
    f64::from_bits(x.to_bits() ^ (1u64 << bit.0))
}

/// The next power of two strictly above `|x|`: `2^(e + 1)` for
/// `|x| = 1.m * 2^e`.
pub fn order_of_magnitude_bound(x: f64) -> Result<f64> {
    if !x.is_finite() || x == 0.0 {
        return Err(Error::ZeroOrNonFinite(x));
    }
    let a = decompose(x);
    let exp = match a.kind {
        ValueKind::Normal => a.unbiased_exponent(),
        // position of the leading mantissa bit sets the true exponent
        _ => 63 - a.mantissa.leading_zeros() as i32 - 1074,
    };
    if exp + 1 > 1023 {
        return Err(Error::Unrepresentable(format!("2^{}", exp + 1)));
    }
    Ok(pow2_f64(exp + 1))
}

/// `2^e` as `f64` for `e` in the normal or subnormal range.
pub(crate) fn pow2_f64(e: i32) -> f64 {
    if e >= -1022 {
        debug_assert!(e <= 1023);
        f64::from_bits(((e + EXPONENT_BIAS) as u64) << MANTISSA_BITS)
    } else {
        debug_assert!(e >= -1074);
        f64::from_bits(1u64 << (e + 1074))
    }
}
