//! Matrix Market reader for real symmetric and complex Hermitian matrices.
//!
//! Both `coordinate` and `array` layouts are accepted. For `symmetric` and
//! `hermitian` storage the stored (lower) triangle is mirrored, conjugating
//! in the Hermitian case. `general` files are read as given.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::CsrMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum MmMatrix {
    Real(CsrMatrix<f64>),
    Complex(CsrMatrix<Complex64>),
}

impl MmMatrix {
    pub fn dim(&self) -> usize {
        match self {
            MmMatrix::Real(a) => a.n,
            MmMatrix::Complex(a) => a.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::MatrixMarket(msg.into())
}

fn parse_header(line: &str) -> Result<(Layout, Field, Symmetry)> {
    let toks: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(bad(format!("bad header line `{}`", line.trim())));
    }
    let layout = match toks[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(bad(format!("unsupported layout `{other}`"))),
    };
    let field = match toks[3].as_str() {
        "real" | "double" | "integer" => Field::Real,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return Err(bad(format!("unsupported field `{other}`"))),
    };
    let sym = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(bad(format!("unsupported symmetry `{other}`"))),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err(bad("pattern field is only valid for coordinate layout"));
    }
    if sym == Symmetry::Hermitian && field != Field::Complex {
        return Err(bad("hermitian storage requires the complex field"));
    }
    Ok((layout, field, sym))
}

fn parse_num(tok: Option<&str>, what: &str) -> Result<f64> {
    tok.ok_or_else(|| bad(format!("missing {what}")))?
        .parse::<f64>()
        .map_err(|_| bad(format!("cannot parse {what}")))
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| bad(format!("missing {what}")))?
        .parse::<usize>()
        .map_err(|_| bad(format!("cannot parse {what}")))
}

pub fn read_path(path: impl AsRef<Path>) -> Result<MmMatrix> {
    read(File::open(path)?)
}

pub fn read<R: Read>(reader: R) -> Result<MmMatrix> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| bad("empty input"))??;
    let (layout, field, sym) = parse_header(&header)?;

    let mut data = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        data.push(line);
    }
    let mut it = data.iter();
    let size_line = it.next().ok_or_else(|| bad("missing size line"))?;
    let mut st = size_line.split_whitespace();
    let rows = parse_usize(st.next(), "row count")?;
    let cols = parse_usize(st.next(), "column count")?;
    if rows != cols {
        return Err(bad(format!("matrix must be square, got {rows}x{cols}")));
    }
    if rows == 0 {
        return Err(bad("matrix dimension must be positive"));
    }
    let n = rows;

    let mut entries: Vec<(usize, usize, f64, f64)> = Vec::new();
    match layout {
        Layout::Coordinate => {
            let nnz = parse_usize(st.next(), "entry count")?;
            for _ in 0..nnz {
                let line = it.next().ok_or_else(|| bad("fewer entries than declared"))?;
                let mut tk = line.split_whitespace();
                let i = parse_usize(tk.next(), "row index")?;
                let j = parse_usize(tk.next(), "column index")?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(bad(format!("index ({i},{j}) out of range")));
                }
                let (re, im) = match field {
                    Field::Pattern => (1.0, 0.0),
                    Field::Real => (parse_num(tk.next(), "value")?, 0.0),
                    Field::Complex => (
                        parse_num(tk.next(), "real part")?,
                        parse_num(tk.next(), "imaginary part")?,
                    ),
                };
                entries.push((i - 1, j - 1, re, im));
            }
        }
        Layout::Array => {
            // column-major; symmetric storage lists only i >= j
            let mut positions = Vec::new();
            for j in 0..n {
                let start = if sym == Symmetry::General { 0 } else { j };
                for i in start..n {
                    positions.push((i, j));
                }
            }
            for (i, j) in positions {
                let line = it.next().ok_or_else(|| bad("fewer array entries than expected"))?;
                let mut tk = line.split_whitespace();
                let (re, im) = match field {
                    Field::Complex => (
                        parse_num(tk.next(), "real part")?,
                        parse_num(tk.next(), "imaginary part")?,
                    ),
                    _ => (parse_num(tk.next(), "value")?, 0.0),
                };
                if re != 0.0 || im != 0.0 {
                    entries.push((i, j, re, im));
                }
            }
        }
    }

    let expand = sym != Symmetry::General;
    let conj = sym == Symmetry::Hermitian;
    if field == Field::Complex {
        Ok(MmMatrix::Complex(build(n, &entries, expand, conj)?))
    } else {
        Ok(MmMatrix::Real(build(n, &entries, expand, false)?))
    }
}

fn build<S: Scalar>(
    n: usize,
    entries: &[(usize, usize, f64, f64)],
    expand: bool,
    conj: bool,
) -> Result<CsrMatrix<S>> {
    let mut trip = Vec::with_capacity(entries.len() * 2);
    for &(i, j, re, im) in entries {
        if expand && i < j {
            return Err(bad(format!(
                "entry ({},{}) lies in the upper triangle of a symmetric file",
                i + 1,
                j + 1
            )));
        }
        let v = S::from_parts(re, im);
        trip.push((i, j, v));
        if expand && i != j {
            trip.push((j, i, if conj { v.conjugate() } else { v }));
        }
    }
    Ok(CsrMatrix::from_triplets(n, &trip))
}

/// Write the lower triangle of a Hermitian CSR matrix in coordinate form.
pub fn write_coordinate<S: Scalar, W: Write>(a: &CsrMatrix<S>, mut w: W) -> Result<()> {
    let (field, sym) = if S::IS_COMPLEX {
        ("complex", "hermitian")
    } else {
        ("real", "symmetric")
    };
    let mut lower = Vec::new();
    for i in 0..a.n {
        for p in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[p];
            if j <= i {
                lower.push((i, j, a.values[p]));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate {field} {sym}")?;
    writeln!(w, "{} {} {}", a.n, a.n, lower.len())?;
    for (i, j, v) in lower {
        if S::IS_COMPLEX {
            writeln!(w, "{} {} {:e} {:e}", i + 1, j + 1, v.real(), v.imaginary())?;
        } else {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v.real())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::LinearOperator;

    #[test]
    fn reads_real_symmetric_coordinate() {
        let src = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n3 3 5\n";
        let MmMatrix::Real(a) = read(src.as_bytes()).unwrap() else {
            panic!("expected real matrix")
        };
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.apply(&[1.0, 1.0, 1.0]), vec![1.0, 1.0, 5.0]);
    }

    #[test]
    fn reads_complex_hermitian_and_conjugates() {
        let src = "%%MatrixMarket matrix coordinate complex hermitian\n2 2 3\n1 1 1 0\n2 1 0 1\n2 2 3 0\n";
        let MmMatrix::Complex(a) = read(src.as_bytes()).unwrap() else {
            panic!("expected complex matrix")
        };
        let z = Complex64::new;
        // A = [[1, -i], [i, 3]]
        let y = a.apply(&[z(1.0, 0.0), z(0.0, 0.0)]);
        assert_eq!(y, vec![z(1.0, 0.0), z(0.0, 1.0)]);
        let y = a.apply(&[z(0.0, 0.0), z(1.0, 0.0)]);
        assert_eq!(y, vec![z(0.0, -1.0), z(3.0, 0.0)]);
    }

    #[test]
    fn reads_symmetric_array() {
        let src = "%%MatrixMarket matrix array real symmetric\n2 2\n4\n1\n3\n";
        let MmMatrix::Real(a) = read(src.as_bytes()).unwrap() else {
            panic!()
        };
        assert_eq!(a.apply(&[1.0, 0.0]), vec![4.0, 1.0]);
        assert_eq!(a.apply(&[0.0, 1.0]), vec![1.0, 3.0]);
    }

    #[test]
    fn reads_hermitian_array() {
        let src = "%%MatrixMarket matrix array complex hermitian\n2 2\n2 0\n0 -1\n5 0\n";
        let MmMatrix::Complex(a) = read(src.as_bytes()).unwrap() else {
            panic!()
        };
        let z = Complex64::new;
        assert_eq!(a.apply(&[z(0.0, 0.0), z(1.0, 0.0)]), vec![z(0.0, 1.0), z(5.0, 0.0)]);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read("garbage\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real hermitian\n2 2 1\n1 1 1\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n".as_bytes()).is_err());
    }

    #[test]
    fn write_then_read_preserves_operator() {
        let z = Complex64::new;
        let a = CsrMatrix::from_triplets(
            2,
            &[(0, 0, z(1.0, 0.0)), (1, 0, z(0.5, 2.0)), (0, 1, z(0.5, -2.0)), (1, 1, z(-3.0, 0.0))],
        );
        let mut buf = Vec::new();
        write_coordinate(&a, &mut buf).unwrap();
        let MmMatrix::Complex(b) = read(buf.as_slice()).unwrap() else {
            panic!()
        };
        assert_eq!(a, b);
    }
}
