//! Magnitudes with an unbounded binary exponent.
//!
//! Absolute errors from exponent flips routinely exceed the binary64 range
//! (`|0.25 - 2^1023|` is finite but `2^1023 * 4` is not), so error values are
//! carried as `coefficient * 2^exponent` and only rendered as `f64` when they
//! fit.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A nonnegative magnitude `coeff * 2^exp` with `coeff` in `[1, 2)`, or zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wide {
    coeff: f64,
    exp: i32,
}

impl Wide {
    pub const ZERO: Wide = Wide { coeff: 0.0, exp: 0 };
    pub const ONE: Wide = Wide { coeff: 1.0, exp: 0 };

    /// `2^exp`, exactly.
    pub fn pow2(exp: i32) -> Self {
        Wide { coeff: 1.0, exp }
    }

    /// The magnitude of a finite `f64`.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "Wide::from_f64 on non-finite {x}");
        let x = x.abs();
        if x == 0.0 {
            return Self::ZERO;
        }
        let bits = x.to_bits();
        let biased = (bits >> 52) as i32;
        if biased == 0 {
            // subnormal: rescale into the normal range first
            let scaled = Self::from_f64(x * f64::from_bits(((1023 + 64) as u64) << 52));
            return Wide { coeff: scaled.coeff, exp: scaled.exp - 64 };
        }
        let coeff = f64::from_bits((bits & ((1u64 << 52) - 1)) | (1023u64 << 52));
        Wide { coeff, exp: biased - 1023 }
    }

    fn normalized(mut coeff: f64, mut exp: i32) -> Self {
        if coeff == 0.0 {
            return Self::ZERO;
        }
        while coeff >= 2.0 {
            coeff /= 2.0;
            exp += 1;
        }
        while coeff < 1.0 {
            coeff *= 2.0;
            exp -= 1;
        }
        Wide { coeff, exp }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0.0
    }

    pub fn coefficient(&self) -> f64 {
        self.coeff
    }

    /// `floor(log2(self))`; `None` for zero.
    pub fn exponent(&self) -> Option<i32> {
        (!self.is_zero()).then_some(self.exp)
    }

    pub fn mul(self, other: Wide) -> Wide {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::normalized(self.coeff * other.coeff, self.exp + other.exp)
    }

    pub fn mul_pow2(self, k: i32) -> Wide {
        if self.is_zero() {
            return self;
        }
        Wide { coeff: self.coeff, exp: self.exp + k }
    }

    /// The value as `f64`, or `None` when it overflows binary64.
    /// Values below the subnormal range round to zero.
    pub fn to_f64(&self) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        if self.exp > 1023 {
            return None;
        }
        // split the scaling so intermediate powers stay representable
        let mut v = self.coeff;
        let mut e = self.exp;
        while e > 0 {
            let step = e.min(1000);
            v *= f64::from_bits(((step + 1023) as u64) << 52);
            e -= step;
        }
        while e < 0 {
            let step = (-e).min(1000);
            v *= f64::from_bits(((1023 - step) as u64) << 52);
            e += step;
        }
        Some(v)
    }

    /// `log2(self)` as a float; `-inf` for zero.
    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.exp as f64 + self.coeff.log2()
        }
    }
}

impl PartialOrd for Wide {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => match self.exp.cmp(&other.exp) {
                Ordering::Equal => self.coeff.partial_cmp(&other.coeff),
                ord => Some(ord),
            },
        }
    }
}

impl PartialEq<f64> for Wide {
    fn eq(&self, other: &f64) -> bool {
        other.is_finite() && *self == Wide::from_f64(*other) && *other >= 0.0
    }
}

impl PartialOrd<f64> for Wide {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        if other.is_nan() {
            return None;
        }
        if *other == f64::INFINITY {
            return Some(Ordering::Less);
        }
        if *other < 0.0 {
            return Some(Ordering::Greater);
        }
        self.partial_cmp(&Wide::from_f64(*other))
    }
}

impl fmt::Display for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_f64() {
            Some(v) if v != 0.0 || self.is_zero() => write!(f, "{v:e}"),
            _ => write!(f, "{}*2^{}", self.coeff, self.exp),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_normal_and_subnormal() {
        for x in [1.0, 0.375, 3.0e300, 5e-324, 2.2e-310, f64::MAX, f64::MIN_POSITIVE] {
            assert_eq!(Wide::from_f64(x).to_f64(), Some(x), "{x}");
        }
        assert_eq!(Wide::from_f64(-2.5).to_f64(), Some(2.5));
    }

    #[test]
    fn overflow_is_reported_not_inf() {
        let big = Wide::pow2(1023).mul(Wide::from_f64(4.0));
        assert_eq!(big.exponent(), Some(1025));
        assert_eq!(big.to_f64(), None);
        assert!(big > f64::MAX);
    }

    #[test]
    fn ordering() {
        assert!(Wide::pow2(-3) < Wide::ONE);
        assert!(Wide::from_f64(1.5) > Wide::ONE);
        assert!(Wide::ZERO < Wide::pow2(-2000));
        assert!(Wide::from_f64(1.0) == 1.0);
    }
}
