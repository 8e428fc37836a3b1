use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float_anatomy::{decompose, ValueKind, EXPONENT_BIAS, MAX_FINITE_EXPONENT};

/// Closed range of biased exponents that covers the nonzero values of a
/// vector, with the upper end widened by one to absorb truncated mantissas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExponentInterval {
    range: Option<(u16, u16)>,
    pub contains_zero: bool,
}

impl ExponentInterval {
    pub fn new(lo: u16, hi: u16) -> Result<Self> {
        if lo == 0 || hi > MAX_FINITE_EXPONENT || lo > hi {
            return Err(Error::InvalidConfig(format!("exponent interval [{lo}, {hi}]")));
        }
        Ok(ExponentInterval { range: Some((lo, hi)), contains_zero: false })
    }

    /// Entries of a unit-norm vector: every normal value in (0, 1].
    pub fn unit_vector() -> Self {
        ExponentInterval { range: Some((1, EXPONENT_BIAS as u16)), contains_zero: false }
    }

    /// An all-zero vector: no exponents at all.
    pub fn degenerate() -> Self {
        ExponentInterval { range: None, contains_zero: true }
    }

    pub fn lo(&self) -> Option<u16> {
        self.range.map(|r| r.0)
    }

    pub fn hi(&self) -> Option<u16> {
        self.range.map(|r| r.1)
    }

    pub fn bounds(&self) -> Option<(u16, u16)> {
        self.range
    }

    pub fn is_degenerate(&self) -> bool {
        self.range.is_none()
    }

    /// Number of exponents covered.
    pub fn len(&self) -> usize {
        self.range.map_or(0, |(lo, hi)| (hi - lo + 1) as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exponents(&self) -> impl Iterator<Item = u16> {
        let (lo, hi) = self.range.map_or((1, 0), |r| r);
        lo..=hi
    }
}

/// Biased-exponent interval of the nonzero normal entries of `v`, widened by
/// one at the top. Zeros and subnormals only set `contains_zero`.
pub fn extract_interval(v: &[f64]) -> Result<ExponentInterval> {
    if v.is_empty() {
        return Err(Error::Empty("vector"));
    }
    let mut lo = u16::MAX;
    let mut hi = 0u16;
    let mut contains_zero = false;
    for &x in v {
        let a = decompose(x);
        match a.kind {
            ValueKind::Normal => {
                lo = lo.min(a.biased_exponent);
                hi = hi.max(a.biased_exponent);
            }
            ValueKind::Zero | ValueKind::Subnormal => contains_zero = true,
            _ => return Err(Error::NonFinite(x)),
        }
    }
    if hi == 0 {
        return Ok(ExponentInterval::degenerate());
    }
    Ok(ExponentInterval { range: Some((lo, (hi + 1).min(MAX_FINITE_EXPONENT))), contains_zero })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widened_intervals() {
        let u = extract_interval(&[1.0, 1.2, 8.0, 0.125]).unwrap();
        assert_eq!(u.bounds(), Some((1020, 1027)));
        let v = extract_interval(&[0.125, 0.125001, 0.125002, 0.25]).unwrap();
        assert_eq!(v.bounds(), Some((1020, 1022)));
        assert_eq!(extract_interval(&[1.0]).unwrap().bounds(), Some((1023, 1024)));
    }

    #[test]
    fn zeros_only_flag() {
        let i = extract_interval(&[0.0, -0.0, 2.0, 5e-324]).unwrap();
        assert_eq!(i.bounds(), Some((1024, 1025)));
        assert!(i.contains_zero);
        let z = extract_interval(&[0.0, 0.0]).unwrap();
        assert!(z.is_degenerate() && z.contains_zero);
        assert_eq!(z.exponents().count(), 0);
    }

    #[test]
    fn widening_clamps_at_largest_finite_exponent() {
        assert_eq!(extract_interval(&[f64::MAX]).unwrap().bounds(), Some((2046, 2046)));
    }

    #[test]
    fn errors() {
        assert!(extract_interval(&[]).is_err());
        assert!(extract_interval(&[1.0, f64::NAN]).is_err());
        assert!(ExponentInterval::new(0, 5).is_err());
        assert!(ExponentInterval::new(10, 5).is_err());
        assert_eq!(ExponentInterval::unit_vector().len(), 1023);
    }
}
