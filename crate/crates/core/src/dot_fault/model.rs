//! Analytic failure probabilities for the fixed-magnitude dot-product
//! experiment: every element of `u` is `X * 2^mu`, every element of `v` is
//! `Y * 2^mv`, with `X`, `Y` uniform on `[1, 2)`.

use crate::float_anatomy::{BitIndex, BitRegion, EXPONENT_BIAS, SPECIAL_EXPONENT};

/// `P(X * Y > t)` for independent `X, Y ~ U[1, 2)`.
pub fn prob_product_exceeds(t: f64) -> f64 {
    if t < 1.0 {
        1.0
    } else if t >= 4.0 {
        0.0
    } else if t <= 2.0 {
        1.0 - (t * t.ln() - t + 1.0)
    } else {
        1.0 - (t - 3.0 + t * (4.0 / t).ln())
    }
}

/// `P(X * Y * 2^scale_log2 > threshold)`, evaluated in log space.
fn product_exceeds(threshold: f64, scale_log2: f64) -> f64 {
    let log_t = threshold.log2() - scale_log2;
    if log_t < 0.0 {
        1.0
    } else if log_t >= 2.0 {
        0.0
    } else {
        prob_product_exceeds(log_t.exp2())
    }
}

/// Probability that flipping `bit` of one element with magnitude exponent
/// `m_self`, multiplied by a partner with magnitude exponent `m_other`, moves
/// the dot product by more than `threshold`.
pub fn operand_failure_probability(m_self: i32, m_other: i32, bit: BitIndex, threshold: f64) -> f64 {
    let base = (m_self + m_other) as f64;
    match bit.region() {
        BitRegion::Mantissa => {
            // error = 2^(m_self + j - 52) * Y * 2^m_other
            let log_t = threshold.log2() - (base + bit.index() as f64 - 52.0);
            if log_t < 0.0 {
                1.0
            } else if log_t >= 1.0 {
                0.0
            } else {
                2.0 - log_t.exp2()
            }
        }
        BitRegion::Sign => product_exceeds(threshold, base + 1.0),
        BitRegion::Exponent => {
            let k = bit.index() - 52;
            let step = 1i32 << k;
            let biased = m_self + EXPONENT_BIAS;
            let shrink = (-(-(step as f64)).exp2()).ln_1p() / std::f64::consts::LN_2;
            if (biased >> k) & 1 == 1 {
                // error = XY 2^base (1 - 2^-step)
                product_exceeds(threshold, base + shrink)
            } else if biased + step >= SPECIAL_EXPONENT as i32 {
                1.0
            } else {
                // error = XY 2^base (2^step - 1)
                product_exceeds(threshold, base + step as f64 + shrink)
            }
        }
    }
}

/// Per-bit failure probability of the whole experiment, averaging flips in
/// `u` and flips in `v` (both are enumerated equally often).
pub fn predict_bit_failure(mag_u: i32, mag_v: i32, bit: BitIndex, threshold: f64) -> f64 {
    0.5 * (operand_failure_probability(mag_u, mag_v, bit, threshold)
        + operand_failure_probability(mag_v, mag_u, bit, threshold))
}
