//! Matrix Market coordinate files (`real symmetric` only).
//!
//! Indices are 1-based on disk and 0-based in memory. Values are written with
//! 17 significant digits so a write/read cycle is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::sparse::{SparseError, SparseSymMatrix};

pub const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

#[derive(Debug, Error)]
pub enum MtxError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid matrix: {0}")]
    Matrix(#[from] SparseError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> MtxError {
    MtxError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymMatrix, MtxError> {
    let file = File::open(path)?;
    parse_matrix_market(BufReader::new(file))
}

/// Parse from any buffered reader.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SparseSymMatrix, MtxError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, header) = match lines.next() {
        Some((no, l)) => (no, l?),
        None => return Err(parse_err(1, "empty file")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(lineno, format!("malformed header `{header}`")));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(lineno, format!("unsupported format `{}`", tokens[2])));
    }
    if tokens[3] != "real" {
        return Err(parse_err(lineno, format!("unsupported field `{}`", tokens[3])));
    }
    if tokens[4] != "symmetric" {
        return Err(parse_err(lineno, format!("unsupported symmetry `{}`", tokens[4])));
    }

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected `rows cols entries`"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(lineno, format!("bad integer `{s}`")))
                };
                let (rows, cols, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if rows != cols {
                    return Err(parse_err(lineno, format!("symmetric matrix must be square, got {rows}x{cols}")));
                }
                size = Some((rows, nnz));
                triplets.reserve(nnz);
            }
            Some((n, nnz)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected `row col value`"));
                }
                if triplets.len() == nnz {
                    return Err(parse_err(lineno, format!("more than the declared {nnz} entries")));
                }
                let index = |s: &str| -> Result<usize, MtxError> {
                    let i = s
                        .parse::<usize>()
                        .map_err(|_| parse_err(lineno, format!("bad index `{s}`")))?;
                    if i == 0 || i > n {
                        return Err(parse_err(lineno, format!("index {i} outside 1..={n}")));
                    }
                    Ok(i - 1)
                };
                let (i, j) = (index(fields[0])?, index(fields[1])?);
                let v = fields[2]
                    .parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("bad value `{}`", fields[2])))?;
                triplets.push((i, j, v));
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| parse_err(lineno, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(parse_err(
            lineno,
            format!("declared {nnz} entries, found {}", triplets.len()),
        ));
    }
    Ok(SparseSymMatrix::from_triplets(n, &triplets)?)
}

pub fn write_matrix_market(a: &SparseSymMatrix, path: impl AsRef<Path>) -> Result<(), MtxError> {
    let mut w = BufWriter::new(File::create(path)?);
    format_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Write the lower triangle in coordinate form.
pub fn format_matrix_market<W: Write>(a: &SparseSymMatrix, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "% written by certify")?;
    writeln!(w, "{} {} {}", a.dim(), a.dim(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
