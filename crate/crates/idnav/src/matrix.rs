//! Dense row-major matrix with a plain-text serialization format.
//!
//! The text format is a header line `N L` (rows, columns) followed by one
//! space-separated row per line. Floats are written with Rust's shortest
//! round-trip formatting, so save/load is bit-exact.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        if rows.is_empty() {
            return Err(MatrixError::Dimension("no rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(MatrixError::Dimension("empty row".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(MatrixError::Dimension(format!(
                    "ragged rows: expected {cols} columns, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.rows, self.cols).unwrap();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MatrixError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MatrixError::Parse {
            line: 1,
            msg: "empty document".into(),
        })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(MatrixError::Parse {
                line: 1,
                msg: "header must be `N L`".into(),
            });
        }
        let rows: usize = dims[0].parse().map_err(|e| MatrixError::Parse {
            line: 1,
            msg: format!("bad row count: {e}"),
        })?;
        let cols: usize = dims[1].parse().map_err(|e| MatrixError::Parse {
            line: 1,
            msg: format!("bad column count: {e}"),
        })?;
        let mut data = Vec::with_capacity(rows * cols);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|e| MatrixError::Parse {
                    line: idx + 1,
                    msg: format!("bad value {tok:?}: {e}"),
                })?;
                data.push(v);
            }
        }
        if data.len() != rows * cols {
            return Err(MatrixError::Parse {
                line: 1,
                msg: format!(
                    "expected {} values for a {rows}x{cols} matrix, got {}",
                    rows * cols,
                    data.len()
                ),
            });
        }
        Ok(Matrix { rows, cols, data })
    }
}
