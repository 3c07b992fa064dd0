//! MatrixMarket coordinate format (1-based on disk).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn mm_err(line: usize, message: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let file = File::open(path.as_ref())?;
    parse_matrix_market(BufReader::new(file))
}

/// Parses a coordinate MatrixMarket stream. Symmetric storage is expanded.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<CsrMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(mm_err(1, "empty input")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(mm_err(lineno, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if tokens[2] != "coordinate" {
        return Err(mm_err(lineno, format!("unsupported format '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(mm_err(lineno, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(mm_err(lineno, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((nrows, ncols, nnz)) = size else {
            if parts.len() != 3 {
                return Err(mm_err(lineno, "size line must hold 'rows cols entries'"));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| mm_err(lineno, format!("invalid count '{s}'")))
            };
            let dims = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            if symmetry != Symmetry::General && dims.0 != dims.1 {
                return Err(mm_err(lineno, "symmetric storage requires a square matrix"));
            }
            triplets.reserve(dims.2 * if symmetry == Symmetry::General { 1 } else { 2 });
            size = Some(dims);
            continue;
        };
        let want = if field == Field::Pattern { 2 } else { 3 };
        if parts.len() != want {
            return Err(mm_err(lineno, format!("expected {want} fields, found {}", parts.len())));
        }
        if seen == nnz {
            return Err(mm_err(lineno, format!("more than the declared {nnz} entries")));
        }
        let index = |s: &str, bound: usize| -> Result<usize> {
            let v = s
                .parse::<usize>()
                .map_err(|_| mm_err(lineno, format!("invalid index '{s}'")))?;
            if v == 0 || v > bound {
                return Err(mm_err(lineno, format!("index {v} outside 1..={bound}")));
            }
            Ok(v - 1)
        };
        let i = index(parts[0], nrows)?;
        let j = index(parts[1], ncols)?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Real | Field::Integer => parts[2]
                .parse::<f64>()
                .map_err(|_| mm_err(lineno, format!("invalid value '{}'", parts[2])))?,
        };
        triplets.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((j, i, v)),
                Symmetry::SkewSymmetric => triplets.push((j, i, -v)),
            }
        }
        seen += 1;
    }
    let Some((nrows, ncols, nnz)) = size else {
        return Err(mm_err(0, "missing size line"));
    };
    if seen != nnz {
        return Err(mm_err(0, format!("declared {nnz} entries but found {seen}")));
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Writes `a` in general coordinate form with full-precision values.
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}
