//! SIGMAT binary container and headerless CSV matrices.
//!
//! SIGMAT layout (all little-endian):
//!
//! | bytes  | content                               |
//! |--------|---------------------------------------|
//! | 0..6   | magic `SIGMAT`                        |
//! | 6      | version (1)                           |
//! | 7      | flags (0)                             |
//! | 8..16  | row count, u64                        |
//! | 16..24 | column count, u64                     |
//! | 24..32 | sample rate in Hz, binary64           |
//! | 32..40 | samples per cycle, u64                |
//! | 40..   | row-major binary32 payload            |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::SignatureMatrix;
use crate::error::{Error, Result};

pub const SIGMAT_MAGIC: &[u8; 6] = b"SIGMAT";
pub const SIGMAT_HEADER_LEN: usize = 40;
const VERSION: u8 = 1;

pub fn write_signature_matrix(matrix: &SignatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SIGMAT_MAGIC)?;
    w.write_all(&[VERSION, 0])?;
    w.write_all(&(matrix.rows() as u64).to_le_bytes())?;
    w.write_all(&(matrix.cols() as u64).to_le_bytes())?;
    w.write_all(&matrix.sample_rate_hz().to_le_bytes())?;
    w.write_all(&(matrix.samples_per_cycle() as u64).to_le_bytes())?;
    for v in matrix.data().iter() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn u64_at(bytes: &[u8], offset: usize) -> u64 {
    u64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8-byte slice"))
}

pub fn read_signature_matrix(path: impl AsRef<Path>) -> Result<SignatureMatrix> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_signature_matrix(&bytes)
}

pub(crate) fn parse_signature_matrix(bytes: &[u8]) -> Result<SignatureMatrix> {
    if bytes.len() < SIGMAT_HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated header: {} of {SIGMAT_HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if &bytes[0..6] != SIGMAT_MAGIC {
        return Err(Error::format(0, "bad magic, expected `SIGMAT`"));
    }
    if bytes[6] != VERSION {
        return Err(Error::format(6, format!("unsupported version {}", bytes[6])));
    }
    if bytes[7] != 0 {
        return Err(Error::format(7, format!("unsupported flags {:#04x}", bytes[7])));
    }
    let rows = u64_at(bytes, 8);
    let cols = u64_at(bytes, 16);
    let sample_rate = f64::from_le_bytes(bytes[24..32].try_into().expect("8-byte slice"));
    let spc = u64_at(bytes, 32);
    if rows == 0 || cols == 0 {
        return Err(Error::format(8, format!("empty dimensions {rows}x{cols}")));
    }
    let payload_len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .filter(|n| *n <= usize::MAX as u64 - SIGMAT_HEADER_LEN as u64)
        .ok_or_else(|| Error::format(8, format!("dimensions {rows}x{cols} overflow")))?;
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::format(24, format!("invalid sample rate {sample_rate}")));
    }
    if spc == 0 || cols % spc != 0 {
        return Err(Error::format(
            32,
            format!("samples_per_cycle {spc} does not divide column count {cols}"),
        ));
    }
    let expected = SIGMAT_HEADER_LEN as u64 + payload_len;
    let actual = bytes.len() as u64;
    if actual < expected {
        let full_rows = (actual - SIGMAT_HEADER_LEN as u64) / (cols * 4);
        return Err(Error::format(
            actual,
            format!("truncated payload: header declares {rows} rows, file holds {full_rows} complete rows"),
        ));
    }
    if actual > expected {
        return Err(Error::format(expected, "trailing bytes after payload"));
    }
    let mut values = Vec::with_capacity((rows * cols) as usize);
    for (i, chunk) in bytes[SIGMAT_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(Error::format(
                (SIGMAT_HEADER_LEN + 4 * i) as u64,
                "non-finite payload value",
            ));
        }
        values.push(v as f64);
    }
    let data = Array2::from_shape_vec((rows as usize, cols as usize), values)
        .expect("payload length checked");
    Ok(SignatureMatrix::from_parts_unchecked(data, sample_rate, spc as usize))
}

/// Writes one matrix row per line, comma separated, with an optional header.
pub fn write_csv_matrix(
    data: &Array2<f64>,
    header: Option<&[String]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(h) = header {
        writeln!(w, "{}", h.join(","))?;
    }
    let mut line = String::new();
    for row in data.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless numeric CSV. Blank lines are skipped; all rows must
/// have the same length.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    let mut offset = 0u64;
    for line in reader.lines() {
        let line = line?;
        let line_len = line.len() as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            offset += line_len;
            continue;
        }
        let mut n = 0;
        for field in trimmed.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(offset, format!("line {}: `{field}` is not a number", rows + 1))
            })?;
            values.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::format(
                    offset,
                    format!("line {} has {n} fields, expected {c}", rows + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
        offset += line_len;
    }
    let cols = cols.ok_or_else(|| Error::format(0, "CSV file holds no rows"))?;
    Ok(Array2::from_shape_vec((rows, cols), values).expect("row lengths checked"))
}
