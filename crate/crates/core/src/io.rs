//! Plain-text vector files: one value per line, decimal or C99 hex-float
//! (`0x1.8p+1`). Blank lines and lines starting with `#` or `%` are skipped.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Parse a decimal or hex-float literal into a binary64.
pub fn parse_value(s: &str) -> Result<f64> {
    let t = s.trim();
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let v = if body.len() > 2 && body[..2].eq_ignore_ascii_case("0x") {
        parse_hex(&body[2..]).ok_or_else(|| Error::Parse(format!("bad hex float '{t}'")))?
    } else {
        body.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}'")))?
    };
    Ok(if neg { -v } else { v })
}

// Exact for inputs with at most 16 significant hex digits, which covers
// every binary64 as printed by `%a`.
fn parse_hex(s: &str) -> Option<f64> {
    let (mant, exp) = match s.find(['p', 'P']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits: String = int.chars().chain(frac.chars()).collect();
    let trimmed = digits.trim_start_matches('0');
    if trimmed.len() > 16 {
        return None;
    }
    let m = if trimmed.is_empty() { 0 } else { u64::from_str_radix(trimmed, 16).ok()? };
    let e = exp.checked_sub(4 * frac.len() as i32)?;
    Some(scale_pow2(m as f64, e))
}

fn scale_pow2(mut x: f64, mut e: i32) -> f64 {
    // stepwise so intermediate powers stay representable
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with('%') {
            continue;
        }
        let v = parse_value(l).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Empty("vector file"));
    }
    Ok(out)
}

/// One value per line, shortest round-trip decimal.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for x in v {
        writeln!(f, "{x:?}")?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_and_hex() {
        assert_eq!(parse_value("0.5").unwrap(), 0.5);
        assert_eq!(parse_value("-2e3").unwrap(), -2000.0);
        assert_eq!(parse_value("0x1.8p+1").unwrap(), 3.0);
        assert_eq!(parse_value("-0x1p-1074").unwrap(), -5e-324);
        assert_eq!(parse_value("0x1.fffffffffffffp+1023").unwrap(), f64::MAX);
        assert_eq!(parse_value("0X10").unwrap(), 16.0);
        assert!(parse_value("0xg").is_err());
        assert!(parse_value("abc").is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        let v = vec![0.1, -3.0, 1e-310, 6.02e23];
        write_vector(&p, &v).unwrap();
        assert_eq!(read_vector(&p).unwrap(), v);
        fs::write(&p, "# header\n1\n\n0x1p1\n").unwrap();
        assert_eq!(read_vector(&p).unwrap(), vec![1.0, 2.0]);
        fs::write(&p, "1\nx\n").unwrap();
        assert!(read_vector(&p).is_err());
    }
}
