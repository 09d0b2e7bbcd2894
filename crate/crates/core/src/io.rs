//! Matrix and label file formats.
//!
//! A matrix file is a 24-byte little-endian header followed by the row-major
//! payload:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `DCLU`                            |
//! | 4      | 2    | format version (u16, currently 1)       |
//! | 6      | 1    | dtype (0 = f32, 1 = f64)                |
//! | 7      | 1    | reserved, written as 0                  |
//! | 8      | 8    | rows (u64)                              |
//! | 16     | 8    | cols (u64)                              |
//!
//! A label file holds one decimal integer per line, each line terminated by
//! `\n`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{densify, FeatureMatrix};

pub const MAGIC: &[u8; 4] = b"DCLU";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

pub fn encode_matrix(m: &FeatureMatrix, dtype: Dtype) -> Vec<u8> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(dtype as u8);
    out.push(0);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for &v in m.view().iter() {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

/// Parses a matrix file image; `path` is only used in error messages.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let path_buf = || path.to_path_buf();
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { path: path_buf() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path_buf(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            path: path_buf(),
            version,
        });
    }
    let dtype = match bytes[6] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        code => return Err(Error::UnknownDtype { path: path_buf(), code }),
    };
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(dtype.size() as u64))
        .ok_or_else(|| Error::Shape(format!("{rows}x{cols} matrix is too large")))?;
    let found = payload.len() as u64;
    if found < expected {
        return Err(Error::TruncatedPayload {
            path: path_buf(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            path: path_buf(),
            expected,
            found,
        });
    }
    let values: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            path: path_buf(),
            row: pos as u64 / cols,
            col: pos as u64 % cols,
        });
    }
    let data = Array2::from_shape_vec((rows as usize, cols as usize), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    FeatureMatrix::new(data)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    decode_matrix(&fs::read(path)?, path)
}

/// Writes `m` as 64-bit floats.
pub fn write_matrix(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    write_matrix_as(path, m, Dtype::F64)
}

pub fn write_matrix_as(path: impl AsRef<Path>, m: &FeatureMatrix, dtype: Dtype) -> Result<()> {
    fs::write(path, encode_matrix(m, dtype))?;
    Ok(())
}

/// Reads a label file and compacts its ids to `0..k`.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v = trimmed.parse::<usize>().map_err(|_| Error::BadLabel {
            path: path.to_path_buf(),
            line: i + 1,
            text: line.to_string(),
        })?;
        raw.push(v);
    }
    Ok(densify(&raw).0)
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_labels(labels).as_bytes())?;
    Ok(())
}
