//! Serialization helpers shared by the library and the command-line tool.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::qops::{CMatrix, C64};

/// Formats a value with 9 significant digits (scientific notation).
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{:.8e}", x)
}

/// Builds CSV text from a header and rows of numbers.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt9(x)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

/// Complex matrix as separate real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = m.nrows();
        let cols = m.ncols();
        Self {
            re: (0..rows).map(|i| (0..cols).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..rows).map(|i| (0..cols).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, |r| r.len());
        CMatrix::from_fn(rows, cols, |i, j| C64::new(self.re[i][j], self.im[i][j]))
    }
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    std::fs::write(path, text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
