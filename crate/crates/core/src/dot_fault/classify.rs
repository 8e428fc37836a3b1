//! The four error classes and tallies over exponent intervals.

use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interval::ExponentInterval;
use super::table::{product_scale, ErrorLookupTable, TABLE_DIM};
use crate::error::{Error, Result};
use crate::float_anatomy::decompose;
use crate::scalar_fault::AbsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorClass {
    /// Absolute error below 1.
    Small = 1,
    /// In `[1, threshold]`: large but below what a norm bound can catch.
    Grey = 2,
    /// Above the threshold.
    Detectable = 3,
    /// Inf or NaN.
    NonNumeric = 4,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 4] = [ErrorClass::Small, ErrorClass::Grey, ErrorClass::Detectable, ErrorClass::NonNumeric];

    pub fn number(self) -> u8 {
        self as u8
    }

    /// Ordering used when a class has to be chosen conservatively: a silent
    /// large error is worse than a detectable one, which is worse than a
    /// small one.
    pub fn severity(self) -> u8 {
        match self {
            ErrorClass::Small => 0,
            ErrorClass::Detectable | ErrorClass::NonNumeric => 1,
            ErrorClass::Grey => 2,
        }
    }
}

/// Class of a concrete error value.
pub fn classify_value(err: &AbsError, threshold: f64) -> ErrorClass {
    match err.magnitude() {
        None => ErrorClass::NonNumeric,
        Some(m) if m < 1.0 => ErrorClass::Small,
        Some(m) if m <= threshold => ErrorClass::Grey,
        Some(_) => ErrorClass::Detectable,
    }
}

/// Smallest `t` with `2^t > threshold`.
pub fn threshold_exponent(threshold: f64) -> i32 {
    let a = decompose(threshold);
    a.unbiased_exponent() + 1
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold.is_finite() && threshold >= 1.0) {
        return Err(Error::InvalidConfig(format!("class threshold must be finite and >= 1, got {threshold}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorClassTally {
    pub class1_lt_one: u64,
    pub class2_grey: u64,
    pub class3_detectable: u64,
    pub class4_nonnumeric: u64,
    pub threshold: f64,
}

impl ErrorClassTally {
    pub fn new(threshold: f64) -> Self {
        ErrorClassTally { threshold, ..Default::default() }
    }

    pub fn record(&mut self, class: ErrorClass) {
        self.add_counts(class, 1);
    }

    pub fn add_counts(&mut self, class: ErrorClass, n: u64) {
        match class {
            ErrorClass::Small => self.class1_lt_one += n,
            ErrorClass::Grey => self.class2_grey += n,
            ErrorClass::Detectable => self.class3_detectable += n,
            ErrorClass::NonNumeric => self.class4_nonnumeric += n,
        }
    }

    pub fn count(&self, class: ErrorClass) -> u64 {
        match class {
            ErrorClass::Small => self.class1_lt_one,
            ErrorClass::Grey => self.class2_grey,
            ErrorClass::Detectable => self.class3_detectable,
            ErrorClass::NonNumeric => self.class4_nonnumeric,
        }
    }

    pub fn total(&self) -> u64 {
        self.class1_lt_one + self.class2_grey + self.class3_detectable + self.class4_nonnumeric
    }

    /// Fraction of the total in each class; zeros for an empty tally.
    pub fn shares(&self) -> [f64; 4] {
        let total = self.total();
        if total == 0 {
            return [0.0; 4];
        }
        ErrorClass::ALL.map(|c| self.count(c) as f64 / total as f64)
    }

    pub fn share(&self, class: ErrorClass) -> f64 {
        self.shares()[class as usize - 1]
    }
}

impl AddAssign<&ErrorClassTally> for ErrorClassTally {
    fn add_assign(&mut self, rhs: &ErrorClassTally) {
        self.class1_lt_one += rhs.class1_lt_one;
        self.class2_grey += rhs.class2_grey;
        self.class3_detectable += rhs.class3_detectable;
        self.class4_nonnumeric += rhs.class4_nonnumeric;
    }
}

/// Tally every (exponent pair, site, outcome) combination of the Cartesian
/// product of two intervals. Degenerate intervals give an empty tally.
pub fn classify_errors(
    interval_a: &ExponentInterval,
    interval_b: &ExponentInterval,
    table: &ErrorLookupTable,
    threshold: f64,
) -> Result<ErrorClassTally> {
    check_threshold(threshold)?;
    let t = threshold_exponent(threshold);
    let mut tally = ErrorClassTally::new(threshold);
    for ea in interval_a.exponents() {
        for eb in interval_b.exponents() {
            let counts = table.cell(ea, eb).classify(product_scale(ea, eb), t);
            for (class, n) in ErrorClass::ALL.iter().zip(counts) {
                tally.add_counts(*class, n as u64);
            }
        }
    }
    Ok(tally)
}

/// The lookup table resolved against one threshold, with per-row prefix sums
/// so an interval pair is tallied in time proportional to the first
/// interval's length.
pub struct ClassifiedTable {
    threshold: f64,
    // row-major, TABLE_DIM rows of TABLE_DIM + 1 cumulative counts
    prefix: Vec<[u32; 4]>,
}

impl ClassifiedTable {
    pub fn new(table: &ErrorLookupTable, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let t = threshold_exponent(threshold);
        let rows: Vec<Vec<[u32; 4]>> = (0..TABLE_DIM)
            .into_par_iter()
            .map(|i| {
                let mut acc = [0u32; 4];
                let mut row = Vec::with_capacity(TABLE_DIM + 1);
                row.push(acc);
                for j in 0..TABLE_DIM {
                    let c = table.cell(i as u16, j as u16).classify(product_scale(i as u16, j as u16), t);
                    for k in 0..4 {
                        acc[k] += c[k];
                    }
                    row.push(acc);
                }
                row
            })
            .collect();
        Ok(ClassifiedTable { threshold, prefix: rows.into_iter().flatten().collect() })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn classify(&self, interval_a: &ExponentInterval, interval_b: &ExponentInterval) -> ErrorClassTally {
        let mut tally = ErrorClassTally::new(self.threshold);
        let Some((lo, hi)) = interval_b.bounds() else {
            return tally;
        };
        let mut sums = [0u64; 4];
        for ea in interval_a.exponents() {
            let row = ea as usize * (TABLE_DIM + 1);
            let end = self.prefix[row + hi as usize + 1];
            let start = self.prefix[row + lo as usize];
            for k in 0..4 {
                sums[k] += (end[k] - start[k]) as u64;
            }
        }
        for (class, n) in ErrorClass::ALL.iter().zip(sums) {
            tally.add_counts(*class, n);
        }
        tally
    }
}
