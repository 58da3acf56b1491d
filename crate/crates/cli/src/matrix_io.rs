//! Matrix files: JSON `{rows, cols, data: [[re, im], ...]}` and a read-only CSV variant.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use mimome::{CMatrix, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `[re, im]` pairs.
    pub data: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        MatrixFile { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            bail!(
                "matrix declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            );
        }
        if self.rows == 0 || self.cols == 0 {
            bail!("matrix has an empty dimension ({}x{})", self.rows, self.cols);
        }
        if let Some(i) = self.data.iter().position(|z| !z[0].is_finite() || !z[1].is_finite()) {
            bail!("entry ({}, {}) is not finite", i / self.cols, i % self.cols);
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            C64::new(re, im)
        }))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix file serializes")
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            anyhow!("parse error at line {}, column {}: {e}", e.line(), e.column())
        })
    }

    /// One row per line, entries separated by commas, each `a`, `bi` or `a+bi`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = 0;
        let mut cols = None;
        let mut data = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            match cols {
                None => cols = Some(fields.len()),
                Some(c) if c != fields.len() => bail!(
                    "parse error at line {}: expected {c} columns, found {}",
                    ln + 1,
                    fields.len()
                ),
                _ => {}
            }
            for (col, f) in fields.iter().enumerate() {
                let z = parse_complex(f.trim()).ok_or_else(|| {
                    anyhow!("parse error at line {}, column {}: bad entry {:?}", ln + 1, col + 1, f.trim())
                })?;
                data.push([z.re, z.im]);
            }
            rows += 1;
        }
        let cols = cols.ok_or_else(|| anyhow!("parse error: no rows"))?;
        Ok(MatrixFile { rows, cols, data })
    }
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`, with optional exponents.
pub fn parse_complex(s: &str) -> Option<C64> {
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    let b = body.as_bytes();
    let split = (1..b.len())
        .rev()
        .find(|&k| (b[k] == b'+' || b[k] == b'-') && !matches!(b[k - 1], b'e' | b'E'));
    let imag = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        t => t.parse::<f64>().ok(),
    };
    match split {
        Some(k) => Some(C64::new(body[..k].parse().ok()?, imag(&body[k..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

pub fn read_matrix(path: &Path) -> Result<(CMatrix, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = std::str::from_utf8(&bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let file = if is_csv {
        MatrixFile::parse_csv(text)
    } else {
        MatrixFile::parse_json(text)
    }
    .with_context(|| format!("in {}", path.display()))?;
    let m = file.to_matrix().with_context(|| format!("in {}", path.display()))?;
    Ok((m, bytes))
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    fs::write(path, MatrixFile::from_matrix(m).to_json()).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complex_tokens() {
        let cases = [
            ("1", C64::new(1.0, 0.0)),
            ("-2.5", C64::new(-2.5, 0.0)),
            ("3i", C64::new(0.0, 3.0)),
            ("-i", C64::new(0.0, -1.0)),
            ("1+2i", C64::new(1.0, 2.0)),
            ("1-2i", C64::new(1.0, -2.0)),
            ("-1e-3+4E+2i", C64::new(-1e-3, 400.0)),
            ("2e5-1e-2i", C64::new(2e5, -1e-2)),
            ("1+i", C64::new(1.0, 1.0)),
        ];
        for (s, z) in cases {
            assert_eq!(parse_complex(s), Some(z), "{s}");
        }
        for bad in ["", "i1", "1+2", "abc", "1++2i", "1+2j"] {
            assert_eq!(parse_complex(bad), None, "{bad}");
        }
    }

    #[test]
    fn csv_reports_position() {
        let err = MatrixFile::parse_csv("1,2\n3,x+1i\n").unwrap_err().to_string();
        assert!(err.contains("line 2, column 2"), "{err}");
        let err = MatrixFile::parse_csv("1,2\n3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn csv_reads_rows() {
        let f = MatrixFile::parse_csv("# hr\n1, 2i\n\n3-1i, 0\n").unwrap();
        assert_eq!((f.rows, f.cols), (2, 2));
        assert_eq!(f.data, vec![[1.0, 0.0], [0.0, 2.0], [3.0, -1.0], [0.0, 0.0]]);
    }

    #[test]
    fn json_reports_position() {
        let err = MatrixFile::parse_json("{\"rows\": 1,\n \"cols\": 1,\n \"data\": [[1, ]]}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn inconsistent_files_are_rejected() {
        let f = MatrixFile { rows: 2, cols: 2, data: vec![[1.0, 0.0]] };
        assert!(f.to_matrix().is_err());
        let f = MatrixFile { rows: 0, cols: 0, data: vec![] };
        assert!(f.to_matrix().is_err());
        assert!(MatrixFile::parse_json("{\"rows\":1,\"cols\":1,\"data\":[[1,0]],\"x\":1}").is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |x| x.is_finite()),
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE),
            Just(5e-324),
            Just(f64::MAX),
        ]
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_identical(
            (r, c, data) in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), prop::collection::vec((finite(), finite()), r * c))
            })
        ) {
            let f = MatrixFile { rows: r, cols: c, data: data.iter().map(|&(a, b)| [a, b]).collect() };
            let m = f.to_matrix().unwrap();
            let back = MatrixFile::parse_json(&MatrixFile::from_matrix(&m).to_json()).unwrap();
            prop_assert_eq!(back.rows, r);
            prop_assert_eq!(back.cols, c);
            for (x, y) in back.data.iter().zip(&f.data) {
                prop_assert_eq!(x[0].to_bits(), y[0].to_bits());
                prop_assert_eq!(x[1].to_bits(), y[1].to_bits());
            }
        }
    }
}
