//! Matrix file formats.
//!
//! Two interchangeable representations are written for plotting and
//! downstream tooling:
//!
//! * CSV with a header row and the scale value as the first column of every
//!   data row. Complex matrices interleave columns as `t0_re,t0_im,...`;
//!   real matrices use one column per sample. Numbers are printed in the
//!   shortest form that reparses to the identical float.
//! * Raw binary: a 16-byte header of two little-endian u64 values
//!   (n_scales, n_times) followed by row-major little-endian f64 data,
//!   re/im interleaved for complex matrices. Scale values are not stored.

use std::path::Path;

use num_complex::Complex64;

use super::{ScaleGrid, WcohMatrix, WcsMatrix};
use crate::error::{Error, Result};
use crate::fsutil;

pub fn write_wcs_csv(path: &Path, matrix: &WcsMatrix) -> Result<()> {
    let n = matrix.n_times();
    let mut text = String::from("scale");
    for t in 0..n {
        text.push_str(&format!(",t{t}_re,t{t}_im"));
    }
    text.push('\n');
    for (r, row) in matrix.values().chunks(n).enumerate() {
        text.push_str(&matrix.grid().scale(r).to_string());
        for v in row {
            text.push(',');
            text.push_str(&v.re.to_string());
            text.push(',');
            text.push_str(&v.im.to_string());
        }
        text.push('\n');
    }
    fsutil::write_atomic(path, text.as_bytes())
}

pub fn read_wcs_csv(path: &Path) -> Result<WcsMatrix> {
    let (scales, n_times, numbers) = read_matrix_csv(path, 2)?;
    let values = numbers
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    WcsMatrix::from_values(ScaleGrid::new(scales)?, n_times, values)
}

pub fn write_wcoh_csv(path: &Path, matrix: &WcohMatrix) -> Result<()> {
    let n = matrix.n_times();
    let mut text = String::from("scale");
    for t in 0..n {
        text.push_str(&format!(",t{t}"));
    }
    text.push('\n');
    for (r, row) in matrix.values().chunks(n).enumerate() {
        text.push_str(&matrix.grid().scale(r).to_string());
        for v in row {
            text.push(',');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    fsutil::write_atomic(path, text.as_bytes())
}

pub fn read_wcoh_csv(path: &Path) -> Result<WcohMatrix> {
    let (scales, n_times, values) = read_matrix_csv(path, 1)?;
    WcohMatrix::from_values(ScaleGrid::new(scales)?, n_times, values)
}

/// Shared CSV reader: returns the scale column, the sample count, and the
/// flat row-major numbers (`stride` of them per sample).
fn read_matrix_csv(path: &Path, stride: usize) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let text = fsutil::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty matrix file"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("scale") {
        return Err(Error::parse(path, 1, "first header column must be \"scale\""));
    }
    let data_cols = cols.count();
    if data_cols == 0 || data_cols % stride != 0 {
        return Err(Error::parse(
            path,
            1,
            format!("expected a multiple of {stride} data columns, found {data_cols}"),
        ));
    }
    let n_times = data_cols / stride;

    let mut scales = Vec::new();
    let mut numbers = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let scale: f64 = fields
            .next()
            .expect("split always yields one field")
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, "bad scale value"))?;
        scales.push(scale);
        let mut count = 0;
        for field in fields {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad number {field:?}")))?;
            numbers.push(value);
            count += 1;
        }
        if count != data_cols {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {data_cols} values, found {count}"),
            ));
        }
    }
    Ok((scales, n_times, numbers))
}

pub fn write_wcs_binary(path: &Path, matrix: &WcsMatrix) -> Result<()> {
    let mut bytes = matrix_header(matrix.n_scales(), matrix.n_times());
    bytes.reserve(matrix.values().len() * 16);
    for v in matrix.values() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fsutil::write_atomic(path, &bytes)
}

pub fn read_wcs_binary(path: &Path) -> Result<(usize, usize, Vec<Complex64>)> {
    let (n_scales, n_times, numbers) = read_matrix_binary(path, 2)?;
    let values = numbers
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    Ok((n_scales, n_times, values))
}

pub fn write_wcoh_binary(path: &Path, matrix: &WcohMatrix) -> Result<()> {
    let mut bytes = matrix_header(matrix.n_scales(), matrix.n_times());
    bytes.reserve(matrix.values().len() * 8);
    for v in matrix.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fsutil::write_atomic(path, &bytes)
}

pub fn read_wcoh_binary(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    read_matrix_binary(path, 1)
}

fn matrix_header(n_scales: usize, n_times: usize) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(16);
    bytes.extend_from_slice(&(n_scales as u64).to_le_bytes());
    bytes.extend_from_slice(&(n_times as u64).to_le_bytes());
    bytes
}

fn read_matrix_binary(path: &Path, stride: usize) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fsutil::read_bytes(path)?;
    if bytes.len() < 16 {
        return Err(Error::SampleSizeMismatch {
            path: path.to_path_buf(),
            expected: 16,
            actual: bytes.len() as u64,
        });
    }
    let n_scales = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let n_times = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = 16 + n_scales
        .checked_mul(n_times)
        .and_then(|c| c.checked_mul(8 * stride))
        .ok_or_else(|| Error::InvalidRecord {
            msg: format!("matrix header claims {n_scales} x {n_times} entries"),
        })?;
    if bytes.len() != expected {
        return Err(Error::SampleSizeMismatch {
            path: path.to_path_buf(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    let numbers = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((n_scales, n_times, numbers))
}
