//! Plain-text matrix files.
//!
//! Symmetric matrices use the `symmat` format:
//!
//! ```text
//! symmat 3
//! 2 0 0
//! 0 2 0
//! 0 0 5
//! ```
//!
//! The parser symmetrizes whatever it reads. Rectangular blocks (tangent or
//! cotangent eigenvector blocks, raw gradients) use the same layout with a
//! `mat <rows> <cols>` header.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linop::DenseSymmetric;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_rows(
    lines: &mut dyn Iterator<Item = (usize, &str)>,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| parse_err(i + 2, format!("expected {rows} rows, found {i}")))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            if count == cols {
                return Err(parse_err(lineno, format!("expected {cols} values")));
            }
            out[(i, count)] = tok
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("{tok:?}: {e}")))?;
            count += 1;
        }
        if count != cols {
            return Err(parse_err(lineno, format!("expected {cols} values, found {count}")));
        }
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(parse_err(lineno, "trailing data after matrix"));
    }
    Ok(out)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses a `symmat <n>` file.
pub fn parse_symmat(text: &str) -> Result<DenseSymmetric> {
    DenseSymmetric::new(parse_symmat_entries(text)?)
}

/// Entries of a `symmat <n>` file exactly as written, without
/// symmetrization.
pub fn parse_symmat_entries(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let (lineno, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("symmat") {
        return Err(parse_err(lineno, "expected `symmat <n>` header"));
    }
    let n: usize = head
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(lineno, "missing or invalid dimension"))?;
    if head.next().is_some() || n == 0 {
        return Err(parse_err(lineno, "malformed header"));
    }
    parse_rows(&mut lines, n, n)
}

/// Parses a `mat <rows> <cols>` file.
pub fn parse_mat(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let (lineno, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("mat") {
        return Err(parse_err(lineno, "expected `mat <rows> <cols>` header"));
    }
    let mut dim = || -> Result<usize> {
        head.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lineno, "missing or invalid dimension"))
    };
    let (rows, cols) = (dim()?, dim()?);
    let out = parse_rows(&mut lines, rows, cols)?;
    if let Some((i, j)) = (0..cols)
        .flat_map(|j| (0..rows).map(move |i| (i, j)))
        .find(|&(i, j)| !out[(i, j)].is_finite())
    {
        return Err(Error::NonFinite { row: i, col: j });
    }
    Ok(out)
}

fn write_rows(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{:e}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
}

/// Serializes in `symmat` format. Values use the shortest exact
/// round-trip representation.
pub fn write_symmat(m: &DenseSymmetric) -> String {
    let mut out = format!("symmat {}\n", m.entries().nrows());
    write_rows(&mut out, m.entries());
    out
}

pub fn write_mat(m: &DMatrix<f64>) -> String {
    let mut out = format!("mat {} {}\n", m.nrows(), m.ncols());
    write_rows(&mut out, m);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn parses_and_symmetrizes() {
        let m = parse_symmat("symmat 2\n1 2\n0 1\n").unwrap();
        assert_eq!(m.entries(), &dmatrix![1.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_symmat("").is_err());
        assert!(parse_symmat("mat 2 2\n1 0\n0 1").is_err());
        assert!(parse_symmat("symmat 2\n1 0\n0").is_err());
        assert!(parse_symmat("symmat 2\n1 0\n0 1\n3 3").is_err());
        assert!(parse_symmat("symmat 2\n1 x\n0 1").is_err());
        assert!(matches!(
            parse_symmat("symmat 2\n1 inf\n0 1"),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn rectangular_block() {
        let text = write_mat(&dmatrix![1.0, -2.5; 0.0, 1e-30; 3.0, 4.0]);
        assert!(text.starts_with("mat 3 2\n"));
        assert_eq!(parse_mat(&text).unwrap(), dmatrix![1.0, -2.5; 0.0, 1e-30; 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn symmat_round_trip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 16)) {
            let m = DenseSymmetric::new(DMatrix::from_vec(4, 4, vals)).unwrap();
            let back = parse_symmat(&write_symmat(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
