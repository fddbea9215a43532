//! Row-major sample matrices and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// `n x d` matrix of observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(data, rows.len(), cols)
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::Shape {
                expected: rows,
                got: bad.len(),
            });
        }
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(data, rows, cols)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Schema(format!(
                "column {bad} requested but the data has {} columns",
                self.cols
            )));
        }
        let data = self
            .rows()
            .flat_map(|r| cols.iter().map(move |&c| r[c]))
            .collect();
        Self::new(data, self.rows, cols.len())
    }

    /// Writes a CSV with header `u1,...,ud` (or the given names).
    pub fn write_csv<W: Write>(&self, out: W, header: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let default: Vec<String> = (1..=self.cols).map(|j| format!("u{j}")).collect();
        w.write_record(header.unwrap_or(&default))?;
        for r in self.rows() {
            w.write_record(r.iter().map(|x| format_number(*x)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads numeric CSV. A first row containing any non-numeric cell is
    /// treated as a header.
    pub fn read_csv<R: Read>(input: R, delimiter: u8) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut cols = None;
        for (idx, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(str::parse::<f64>).collect();
            let row = match parsed {
                Ok(r) => r,
                Err(_) if idx == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        row: idx + 1,
                        message: e.to_string(),
                    })
                }
            };
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse {
                    row: idx + 1,
                    message: "non-finite value".into(),
                });
            }
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(Error::Parse {
                        row: idx + 1,
                        message: format!("expected {c} fields, found {}", row.len()),
                    })
                }
                _ => {}
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // drop the sign of negative zero
        return "0".into();
    }
    let s = format!("{x:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = SampleMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![1e-17, 0.999_999_999_999]])
            .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, None).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("u1,u2\n0.1,0.3333333333333333\n"));
        let back = SampleMatrix::read_csv(&buf[..], b',').unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn headerless_and_bad_rows() {
        let m = SampleMatrix::read_csv("1;2\n3;4\n".as_bytes(), b';').unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.column(1), vec![2.0, 4.0]);
        let err = SampleMatrix::read_csv("a,b\n1,2\n3,x\n".as_bytes(), b',').unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }));
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(1e-20), "1e-20");
    }
}
