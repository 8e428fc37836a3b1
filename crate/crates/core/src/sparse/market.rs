use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

/// The banner and size line of a coordinate Matrix Market file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixMarketHeader {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Entries stored in the file (one triangle for symmetric files).
    pub stored_entries: usize,
    pub symmetric: bool,
}

fn mm_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket { line, msg: msg.into() }
}

fn parse_banner(line: &str) -> Result<Symmetry> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(mm_err(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
    }
    if tokens[2] != "coordinate" {
        return Err(mm_err(1, format!("unsupported format '{}', only coordinate is read", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(mm_err(1, format!("unsupported field '{other}', need real or integer"))),
    }
    match tokens[4].as_str() {
        "general" => Ok(Symmetry::General),
        "symmetric" => Ok(Symmetry::Symmetric),
        other => Err(mm_err(1, format!("unsupported symmetry '{other}'"))),
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next line that is neither blank nor a comment.
    fn next_data(&mut self) -> Result<Option<String>> {
        for line in self.inner.by_ref() {
            self.number += 1;
            let line = line?;
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('%') {
                return Ok(Some(trimmed.to_string()));
            }
        }
        Ok(None)
    }
}

fn read_header<R: BufRead>(reader: R) -> Result<(MatrixMarketHeader, Lines<R>)> {
    let mut lines = Lines { inner: reader.lines(), number: 0 };
    let banner = match lines.inner.next() {
        Some(l) => l?,
        None => return Err(mm_err(1, "empty file")),
    };
    lines.number = 1;
    let symmetry = parse_banner(&banner)?;
    let size = lines.next_data()?.ok_or_else(|| mm_err(lines.number, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| mm_err(lines.number, format!("bad size token '{t}'"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(mm_err(lines.number, "size line needs rows, columns and entries"));
    }
    if symmetry == Symmetry::Symmetric && dims[0] != dims[1] {
        return Err(mm_err(lines.number, "symmetric matrix must be square"));
    }
    let header = MatrixMarketHeader {
        n_rows: dims[0],
        n_cols: dims[1],
        stored_entries: dims[2],
        symmetric: symmetry == Symmetry::Symmetric,
    };
    Ok((header, lines))
}

pub fn read_matrix_market_header(path: &Path) -> Result<MatrixMarketHeader> {
    Ok(read_header(BufReader::new(File::open(path)?))?.0)
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    read_matrix_market_from(BufReader::new(File::open(path)?))
}

/// Parse a coordinate Matrix Market stream. Symmetric storage is expanded to
/// both triangles; explicit zeros are kept.
pub fn read_matrix_market_from<R: BufRead>(reader: R) -> Result<CsrMatrix> {
    let (header, mut lines) = read_header(reader)?;
    let mut triplets = Vec::with_capacity(if header.symmetric { 2 * header.stored_entries } else { header.stored_entries });
    for _ in 0..header.stored_entries {
        let line = lines
            .next_data()?
            .ok_or_else(|| mm_err(lines.number, format!("expected {} entries, file ended early", header.stored_entries)))?;
        let n = lines.number;
        let mut tok = line.split_whitespace();
        let mut index = |what: &str, bound: usize| -> Result<usize> {
            let t = tok.next().ok_or_else(|| mm_err(n, format!("missing {what} index")))?;
            let i: usize = t.parse().map_err(|_| mm_err(n, format!("bad {what} index '{t}'")))?;
            if i == 0 || i > bound {
                return Err(mm_err(n, format!("{what} index {i} out of bounds 1..={bound}")));
            }
            Ok(i - 1)
        };
        let r = index("row", header.n_rows)?;
        let c = index("column", header.n_cols)?;
        let t = tok.next().ok_or_else(|| mm_err(n, "missing value"))?;
        let v: f64 = t.parse().map_err(|_| mm_err(n, format!("bad value '{t}'")))?;
        if !v.is_finite() {
            return Err(mm_err(n, format!("non-finite value '{t}'")));
        }
        if tok.next().is_some() {
            return Err(mm_err(n, "trailing tokens after value"));
        }
        triplets.push((r, c, v));
        if header.symmetric && r != c {
            triplets.push((c, r, v));
        }
    }
    if lines.next_data()?.is_some() {
        return Err(mm_err(lines.number, "more entries than declared"));
    }
    CsrMatrix::from_triplets(header.n_rows, header.n_cols, &triplets)
}

pub fn write_matrix_market(m: &CsrMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market_to(m, &mut w)?;
    w.flush()?;
    Ok(())
}

/// General coordinate format; values use the shortest decimal that parses
/// back to the same binary64.
pub fn write_matrix_market_to<W: Write>(m: &CsrMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{} {} {:?}", i + 1, j + 1, v)?;
    }
    Ok(())
}
