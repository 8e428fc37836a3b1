use serde::{Deserialize, Serialize};

use super::classify::{classify_value, ErrorClassTally};
use crate::error::{Error, Result};
use crate::float_anatomy::{flip_bit, BitIndex};
use crate::scalar_fault::{perturb, AbsError, PerturbationRecord};
use crate::wide::Wide;

/// Where in `sum(a_i * b_i)` a flip lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Site {
    A,
    B,
    /// The intermediate product `c_i = a_i * b_i`.
    Product,
}

/// One flip inside a dot product. `record.abs_error` is the additive error
/// it injects into the result, `|a_i b_i - ~a_i b_i|` for an input flip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DotPerturbation {
    pub index: usize,
    pub site: Site,
    pub record: PerturbationRecord,
}

fn input_flip(x: f64, other: f64, bit: BitIndex) -> Result<PerturbationRecord> {
    let mut rec = perturb(x, bit)?;
    let perturbed_product = flip_bit(x, bit) * other;
    rec.abs_error = if !perturbed_product.is_finite() {
        // includes 0 * Inf
        AbsError::NonNumeric
    } else {
        rec.abs_error.scaled(Wide::from_f64(other))
    };
    Ok(rec)
}

fn product_flip(c: f64, bit: BitIndex) -> Result<PerturbationRecord> {
    if !c.is_finite() {
        return Ok(PerturbationRecord {
            bit,
            original: c,
            perturbed: flip_bit(c, bit),
            abs_error: AbsError::NonNumeric,
            delta_order: 0,
        });
    }
    perturb(c, bit)
}

/// Every single-bit flip of every `a_i`, `b_i` and `c_i`: `3 * 64 * n` records,
/// ordered by index, then site, then bit.
pub fn enumerate_dot_errors(a: &[f64], b: &[f64]) -> Result<Vec<DotPerturbation>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if let Some(&x) = a.iter().chain(b).find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(x));
    }
    let mut out = Vec::with_capacity(a.len() * 3 * 64);
    for (index, (&ai, &bi)) in a.iter().zip(b).enumerate() {
        for bit in BitIndex::all() {
            out.push(DotPerturbation { index, site: Site::A, record: input_flip(ai, bi, bit)? });
        }
        for bit in BitIndex::all() {
            out.push(DotPerturbation { index, site: Site::B, record: input_flip(bi, ai, bit)? });
        }
        let c = ai * bi;
        for bit in BitIndex::all() {
            out.push(DotPerturbation { index, site: Site::Product, record: product_flip(c, bit)? });
        }
    }
    Ok(out)
}

pub fn tally_exact(perturbations: &[DotPerturbation], threshold: f64) -> ErrorClassTally {
    let mut t = ErrorClassTally::new(threshold);
    for p in perturbations {
        t.record(classify_value(&p.record.abs_error, threshold));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dot_fault::{dot_product, ErrorClass};
    use crate::float_anatomy::BitRegion;

    #[test]
    fn large_vectors_fail_on_every_exponent_flip() {
        let u = [2.0, 4.0];
        let v = [4.0, 2.0];
        let recs = enumerate_dot_errors(&u, &v).unwrap();
        assert_eq!(recs.len(), 2 * 3 * 64);
        for p in recs.iter().filter(|p| p.site != Site::Product && p.record.bit.region() == BitRegion::Exponent) {
            assert!(!matches!(classify_value(&p.record.abs_error, 1e300), ErrorClass::Small), "{p:?}");
        }
        // zeroing out 2 in 2*4 + 4*2 still leaves |16 - (0 + 8)| = 8
        let zeroed = recs
            .iter()
            .find(|p| p.index == 0 && p.site == Site::A && p.record.bit == BitIndex::TOP_EXPONENT)
            .unwrap();
        assert_eq!(zeroed.record.abs_error, AbsError::ZeroOrSubnormal(Wide::from_f64(8.0)));
    }

    #[test]
    fn small_vectors_exceed_one_once_per_value() {
        let u = [0.5, 0.25];
        let v = [0.25, 0.5];
        let recs = enumerate_dot_errors(&u, &v).unwrap();
        let big: Vec<_> = recs
            .iter()
            .filter(|p| p.record.bit.region() == BitRegion::Exponent)
            .filter(|p| classify_value(&p.record.abs_error, f64::MAX) != ErrorClass::Small)
            .collect();
        // one exponent flip per perturbable value (0.5, 0.25 twice each as inputs, 0.125 twice as product)
        assert_eq!(big.len(), 6);
        assert!(big.iter().all(|p| p.record.bit == BitIndex::TOP_EXPONENT));
    }

    #[test]
    fn zero_partner_only_leaks_nan() {
        // biased exponent 1023: flipping bit 62 reaches 2047
        let a = [1.5];
        let b = [0.0];
        let recs = enumerate_dot_errors(&a, &b).unwrap();
        let c = dot_product(&a, &b).unwrap();
        for p in recs.iter().filter(|p| p.site == Site::A) {
            // brute force: recompute the dot product with the flipped element
            let recomputed = dot_product(&[p.record.perturbed], &b).unwrap();
            if recomputed.is_nan() {
                assert_eq!(p.record.abs_error, AbsError::NonNumeric);
            } else {
                assert_eq!(recomputed, c);
                assert_eq!(p.record.abs_error.magnitude(), Some(Wide::ZERO));
            }
        }
        // exactly the flip to exponent 2047 hits 0 * Inf
        assert_eq!(recs.iter().filter(|p| p.site == Site::A && p.record.abs_error.is_non_numeric()).count(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(enumerate_dot_errors(&[1.0], &[]).is_err());
        assert!(enumerate_dot_errors(&[f64::INFINITY], &[1.0]).is_err());
    }
}
