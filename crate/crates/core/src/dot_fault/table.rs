//! Precomputed error outcomes for every pair of biased exponents.
//!
//! Cell `(i, j)` describes the product of an operand with biased exponent `i`
//! and one with biased exponent `j`. With `s = i + j - 2046` the exact product
//! satisfies `2^s <= |ab| < 2^(s+2)` for any mantissas, so every flip outcome
//! can be bounded in terms of `s` alone:
//!
//! * exponent bit `k` set (1 -> 0): error in `[|ab|/2, |ab|)`
//! * exponent bit `k` clear (0 -> 1): error in `[|ab|(2^(2^k) - 1), |ab| 2^(2^k))`
//! * sign: `2|ab|`
//! * any mantissa bit: below `4 a_exp b_exp = 2^(s+2)`
//!
//! Each site (operand `a`, operand `b`, product `c`) contributes 13 outcomes:
//! the 11 exponent bits, the sign bit, and one shared mantissa outcome. An
//! outcome is stored threshold-free as either "certainly below 1", "certainly
//! non-numeric", or "possibly at least 1, and at least `2^(s + offset)`", so
//! the class-2/class-3 boundary can be chosen at query time.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::classify::ErrorClass;
use super::exact::Site;
use crate::error::{Error, Result};
use crate::float_anatomy::{BitIndex, BitRegion, MAX_FINITE_EXPONENT, SPECIAL_EXPONENT};

/// Biased exponents 0..=2046 per axis; 0 stands for zero and subnormals.
pub const TABLE_DIM: usize = MAX_FINITE_EXPONENT as usize + 1;
pub const COUNTERS_PER_CELL: usize = 16;
pub const TABLE_MAGIC: [u8; 4] = *b"BFLT";
pub const TABLE_VERSION: u32 = 1;
pub const TABLE_FILE_NAME: &str = "error_table_v1.bin";
pub const HEADER_LEN: usize = 16;

/// Lower-bound offsets `o` (error >= `2^(s + o)`) that outcomes can carry.
pub const FLOOR_OFFSETS: [i32; 12] = [-1, 0, 1, 3, 7, 15, 31, 63, 127, 255, 511, 1023];

/// Outcomes per site: 11 exponent bits, the sign bit, the mantissa.
pub const SITE_OUTCOMES: usize = 13;
pub const CELL_OUTCOMES: usize = 3 * SITE_OUTCOMES;

const SLOT_SMALL: usize = 0;
const SLOT_NON_NUMERIC: usize = 1;
const SLOT_GREY: usize = 2;
const SLOT_FLOOR: usize = 3;
const SLOT_TOTAL: usize = 15;

/// The bits that represent one site: exponent bits 52..=62, sign, and bit 51
/// standing in for the whole mantissa.
pub fn site_bits() -> [BitIndex; SITE_OUTCOMES] {
    let mut out = [BitIndex::SIGN; SITE_OUTCOMES];
    for (slot, bit) in out.iter_mut().zip(BitIndex::exponent_bits()) {
        *slot = bit;
    }
    out[12] = BitIndex::new(51).unwrap();
    out
}

/// Threshold-free summary of one flip outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Error is below 1 for every mantissa.
    Small,
    /// Inf or NaN for every mantissa.
    NonNumeric,
    /// Error may reach 1. `floor = Some(o)` guarantees error >= `2^(s + o)`;
    /// `None` means no useful lower bound.
    Large { floor: Option<i32> },
}

impl Outcome {
    /// Combine two possible outcomes into one that is at least as severe as
    /// either. Severity: small < detectable/non-numeric < grey.
    pub fn merge(self, other: Outcome) -> Outcome {
        use Outcome::*;
        match (self, other) {
            (Small, x) | (x, Small) => x,
            (NonNumeric, NonNumeric) => NonNumeric,
            (NonNumeric, l @ Large { .. }) | (l @ Large { .. }, NonNumeric) => l,
            (Large { floor: a }, Large { floor: b }) => Large {
                floor: match (a, b) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    _ => None,
                },
            },
        }
    }

    /// Class of this outcome in a cell with product scale `s`, given the
    /// threshold exponent `t` (smallest `t` with `2^t > threshold`).
    pub fn class(self, s: i32, threshold_exp: i32) -> ErrorClass {
        match self {
            Outcome::Small => ErrorClass::Small,
            Outcome::NonNumeric => ErrorClass::NonNumeric,
            Outcome::Large { floor: Some(o) } if s + o >= threshold_exp => ErrorClass::Detectable,
            Outcome::Large { .. } => ErrorClass::Grey,
        }
    }
}

/// `s` such that `2^s <= |ab| < 2^(s+2)` for operands with biased exponents
/// `ea`, `eb` (nominal for exponent 0).
pub fn product_scale(ea: u16, eb: u16) -> i32 {
    ea as i32 + eb as i32 - 2046
}

/// Flip `bit` of the operand with biased exponent `e_self`, multiplied by an
/// operand with biased exponent `e_other`.
pub fn operand_outcome(e_self: u16, e_other: u16, bit: BitIndex) -> Outcome {
    let s = product_scale(e_self, e_other);
    let other_zero = e_other == 0;
    let floor = |o: i32| if other_zero { None } else { Some(o) };
    let small_if = |cond: bool, large: Outcome| if cond { Outcome::Small } else { large };
    match bit.region() {
        BitRegion::Mantissa => small_if(s + 2 <= 0, Outcome::Large { floor: None }),
        BitRegion::Sign => {
            let floor = if e_self == 0 { None } else { floor(1) };
            small_if(s + 3 <= 0, Outcome::Large { floor })
        }
        BitRegion::Exponent => {
            let k = bit.index() - 52;
            let step = 1i32 << k;
            if (e_self >> k) & 1 == 1 {
                small_if(s + 2 <= 0, Outcome::Large { floor: floor(-1) })
            } else if e_self as i32 + step == SPECIAL_EXPONENT as i32 {
                Outcome::NonNumeric
            } else if !other_zero && s + step >= 1024 {
                // perturbed product is at least 2^1024
                Outcome::NonNumeric
            } else {
                small_if(s + 2 + step <= 0, Outcome::Large { floor: floor(step - 1) })
            }
        }
    }
}

/// Flip `bit` of a value in binade `2^sc` (biased exponent `sc + 1023`), or of a
/// zero/subnormal value when `sc` is `None`. Floors are relative to `sc`.
fn scalar_outcome(sc: Option<i32>, bit: BitIndex, relative_floor: bool) -> Outcome {
    let floor = |o: i32| if relative_floor { Some(o) } else { None };
    let small_if = |cond: bool, large: Outcome| if cond { Outcome::Small } else { large };
    let Some(sc) = sc else {
        // zero or subnormal: only exponent bits can lift it
        return match bit.region() {
            BitRegion::Exponent => {
                let step = 1i32 << (bit.index() - 52);
                small_if(step - 1022 <= 0, Outcome::Large { floor: None })
            }
            _ => Outcome::Small,
        };
    };
    let ec = sc + 1023;
    match bit.region() {
        BitRegion::Mantissa => small_if(sc <= 0, Outcome::Large { floor: None }),
        BitRegion::Sign => small_if(sc + 2 <= 0, Outcome::Large { floor: floor(1) }),
        BitRegion::Exponent => {
            let k = bit.index() - 52;
            let step = 1i32 << k;
            if (ec >> k) & 1 == 1 {
                small_if(sc < 0, Outcome::Large { floor: floor(-1) })
            } else if ec + step == SPECIAL_EXPONENT as i32 {
                Outcome::NonNumeric
            } else {
                small_if(sc + 1 + step <= 0, Outcome::Large { floor: floor(step - 1) })
            }
        }
    }
}

/// Flip `bit` of the rounded product `c = fl(ab)`. Every binade `c` can round
/// into is considered and the outcomes merged.
pub fn product_outcome(ea: u16, eb: u16, bit: BitIndex) -> Outcome {
    let s = product_scale(ea, eb);
    let zero = ea == 0 || eb == 0;
    // fl(ab) lies in [2^s, 2^(s+2)], or [0, 2^(s+2)] with a zero/subnormal operand
    let lowest = if zero { (-1023).min(s) } else { s };
    let mut merged: Option<Outcome> = None;
    let mut push = |o: Outcome| merged = Some(merged.map_or(o, |m| m.merge(o)));
    let mut saw_subnormal = false;
    for sc in lowest..=s + 2 {
        let ec = sc + 1023;
        if ec <= 0 {
            if !saw_subnormal {
                saw_subnormal = true;
                push(scalar_outcome(None, bit, false));
            }
        } else if ec >= SPECIAL_EXPONENT as i32 {
            // the unperturbed product already overflows
            push(Outcome::NonNumeric);
        } else {
            // binade sc >= s, so a floor relative to sc is also one relative to s
            push(scalar_outcome(Some(sc), bit, !zero));
        }
    }
    merged.expect("at least one candidate binade")
}

pub fn outcome(ea: u16, eb: u16, site: Site, bit: BitIndex) -> Outcome {
    match site {
        Site::A => operand_outcome(ea, eb, bit),
        Site::B => operand_outcome(eb, ea, bit),
        Site::Product => product_outcome(ea, eb, bit),
    }
}

/// Per-cell counters, one byte each:
/// `[small, non_numeric, grey, floor(-1), floor(0), floor(1), floor(3), ...,
/// floor(1023), total]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CellCounts(pub [u8; COUNTERS_PER_CELL]);

impl CellCounts {
    pub fn compute(ea: u16, eb: u16) -> Self {
        let mut c = [0u8; COUNTERS_PER_CELL];
        for site in [Site::A, Site::B, Site::Product] {
            for bit in site_bits() {
                let slot = match outcome(ea, eb, site, bit) {
                    Outcome::Small => SLOT_SMALL,
                    Outcome::NonNumeric => SLOT_NON_NUMERIC,
                    Outcome::Large { floor: None } => SLOT_GREY,
                    Outcome::Large { floor: Some(o) } => {
                        let pos = FLOOR_OFFSETS
                            .iter()
                            .position(|&f| f == o)
                            .expect("floor offset outside the stored set");
                        SLOT_FLOOR + pos
                    }
                };
                c[slot] += 1;
                c[SLOT_TOTAL] += 1;
            }
        }
        CellCounts(c)
    }

    pub fn small(&self) -> u8 {
        self.0[SLOT_SMALL]
    }

    pub fn non_numeric(&self) -> u8 {
        self.0[SLOT_NON_NUMERIC]
    }

    pub fn grey(&self) -> u8 {
        self.0[SLOT_GREY]
    }

    pub fn total(&self) -> u8 {
        self.0[SLOT_TOTAL]
    }

    /// Counts per class `[class1, class2, class3, class4]` for a cell with
    /// product scale `s` and threshold exponent `t`.
    pub fn classify(&self, s: i32, threshold_exp: i32) -> [u32; 4] {
        let mut out = [self.small() as u32, self.grey() as u32, 0, self.non_numeric() as u32];
        for (pos, &o) in FLOOR_OFFSETS.iter().enumerate() {
            let n = self.0[SLOT_FLOOR + pos] as u32;
            if s + o >= threshold_exp {
                out[2] += n;
            } else {
                out[1] += n;
            }
        }
        out
    }
}

/// Dense symmetric table of [`CellCounts`] over biased exponents 0..=2046.
/// Only the upper triangle is stored.
pub struct ErrorLookupTable {
    cells: Vec<CellCounts>,
}

fn tri_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row i starts after rows 0..i, of lengths DIM, DIM-1, ...
    i * (2 * TABLE_DIM - i + 1) / 2 + (j - i)
}

pub fn build_lookup_table() -> ErrorLookupTable {
    let rows: Vec<Vec<CellCounts>> = (0..TABLE_DIM)
        .into_par_iter()
        .map(|i| (i..TABLE_DIM).map(|j| CellCounts::compute(i as u16, j as u16)).collect())
        .collect();
    ErrorLookupTable { cells: rows.into_iter().flatten().collect() }
}

impl ErrorLookupTable {
    pub fn build() -> Self {
        build_lookup_table()
    }

    pub fn dim(&self) -> usize {
        TABLE_DIM
    }

    pub fn cell(&self, ea: u16, eb: u16) -> CellCounts {
        self.cells[tri_index(ea as usize, eb as usize)]
    }

    /// Write the full row-major table: a 16-byte header (magic `BFLT`,
    /// version, dimension, counters per cell; little-endian u32s) followed by
    /// `dim * dim` cells of 16 one-byte counters.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(&TABLE_MAGIC)?;
        w.write_all(&TABLE_VERSION.to_le_bytes())?;
        w.write_all(&(TABLE_DIM as u32).to_le_bytes())?;
        w.write_all(&(COUNTERS_PER_CELL as u32).to_le_bytes())?;
        for i in 0..TABLE_DIM {
            for j in 0..TABLE_DIM {
                w.write_all(&self.cell(i as u16, j as u16).0)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::Table { path: path.to_path_buf(), msg: msg.to_string() };
        let mut r = BufReader::new(fs::File::open(path)?);
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if header[..4] != TABLE_MAGIC {
            return Err(bad("bad magic"));
        }
        let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap());
        if word(4) != TABLE_VERSION {
            return Err(bad(&format!("unsupported version {}", word(4))));
        }
        if word(8) as usize != TABLE_DIM || word(12) as usize != COUNTERS_PER_CELL {
            return Err(bad("unexpected dimensions"));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != TABLE_DIM * TABLE_DIM * COUNTERS_PER_CELL {
            return Err(bad(&format!("truncated body ({} bytes)", body.len())));
        }
        let at = |i: usize, j: usize| {
            let off = (i * TABLE_DIM + j) * COUNTERS_PER_CELL;
            CellCounts(body[off..off + COUNTERS_PER_CELL].try_into().unwrap())
        };
        let mut cells = Vec::with_capacity(TABLE_DIM * (TABLE_DIM + 1) / 2);
        for i in 0..TABLE_DIM {
            for j in i..TABLE_DIM {
                let c = at(i, j);
                if c != at(j, i) {
                    return Err(bad(&format!("cell ({i}, {j}) is not symmetric")));
                }
                cells.push(c);
            }
        }
        Ok(ErrorLookupTable { cells })
    }

    /// Load `dir/error_table_v1.bin`, building and writing it on a miss or
    /// when the cached file is unreadable.
    pub fn load_or_build(dir: &Path) -> Result<Self> {
        let path = Self::cache_path(dir);
        if path.exists() {
            if let Ok(t) = Self::read_from(&path) {
                return Ok(t);
            }
        }
        let table = build_lookup_table();
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        table.write_to(&tmp)?;
        fs::rename(&tmp, &path)?;
        Ok(table)
    }

    pub fn cache_path(dir: &Path) -> PathBuf {
        dir.join(TABLE_FILE_NAME)
    }
}
