//! Little-endian header and payload helpers shared by the binary formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::Dtype;
use crate::error::{Error, FormatError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// `<dir>/<stem>.meta.json` for a payload at `<dir>/<stem>.<ext>`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Cursor over an in-memory file image.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::Truncated {
                expected: (self.pos + n) as u64,
                found: self.buf.len() as u64,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> std::result::Result<(), FormatError> {
        let found = self.take(4)?;
        if found != expected {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub fn version(&mut self) -> std::result::Result<(), FormatError> {
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(v));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> std::result::Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> std::result::Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Decodes exactly `count` values and requires the file to end there.
    pub fn payload(&mut self, dtype: Dtype, count: usize) -> std::result::Result<Vec<f64>, FormatError> {
        let expected = count
            .checked_mul(dtype.width())
            .ok_or_else(|| FormatError::DimensionMismatch(format!("{count} values overflow")))?;
        let remaining = self.buf.len() - self.pos;
        if remaining < expected {
            return Err(FormatError::Truncated {
                expected: (self.pos + expected) as u64,
                found: self.buf.len() as u64,
            });
        }
        if remaining > expected {
            return Err(FormatError::DimensionMismatch(format!(
                "header promises {expected} payload bytes but file carries {remaining}"
            )));
        }
        let bytes = self.take(expected)?;
        let values: Vec<f64> = match dtype {
            Dtype::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Dtype::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::NonFinite { index });
        }
        Ok(values)
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_payload<W: Write>(w: &mut W, dtype: Dtype, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    match dtype {
        Dtype::F32 => {
            for v in values {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Dtype::F64 => {
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_sidecar<T: DeserializeOwned>(payload_path: &Path) -> Result<T> {
    let path = sidecar_path(payload_path);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::format(
            payload_path,
            FormatError::Sidecar {
                path: path.clone(),
                message: e.to_string(),
            },
        )
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Error::format(
            payload_path,
            FormatError::Sidecar {
                path: path.clone(),
                message: e.to_string(),
            },
        )
    })
}

pub fn write_sidecar<T: Serialize>(payload_path: &Path, value: &T) -> Result<()> {
    let path = sidecar_path(payload_path);
    let mut text = serde_json::to_string_pretty(value).expect("sidecar types always serialize");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn sidecar_error(payload_path: &Path, message: impl Into<String>) -> Error {
    Error::format(
        payload_path,
        FormatError::Sidecar {
            path: sidecar_path(payload_path),
            message: message.into(),
        },
    )
}
