//! Shared layout of the binary artifacts:
//!
//! ```text
//! magic (8 bytes) | header length (u64 LE) | header (UTF-8 JSON) | f64 LE payload
//! ```
//!
//! The payload is a flat sequence of little-endian doubles whose meaning is
//! fixed by the header.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{LabError, Result};

pub fn encode<H: Serialize>(magic: &[u8; 8], header: &H, payload: &[f64]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| LabError::Usage(format!("header encoding: {e}")))?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for x in payload {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

/// Writes to a sibling temporary file and renames, so readers never see a
/// half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut f = fs::File::create(tmp).map_err(|e| LabError::io(tmp, e))?;
    f.write_all(bytes).map_err(|e| LabError::io(tmp, e))?;
    f.sync_all().map_err(|e| LabError::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| LabError::io(path, e))
}

pub fn decode<H: DeserializeOwned>(magic: &[u8; 8], bytes: &[u8], path: &Path) -> Result<(H, Vec<f64>)> {
    let corrupt = |reason: String| LabError::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 8 || &bytes[..8] != magic {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned();
        return Err(LabError::Incompatible {
            path: path.to_path_buf(),
            reason: format!(
                "expected magic {:?}, found {found:?}",
                String::from_utf8_lossy(magic)
            ),
        });
    }
    if bytes.len() < 16 {
        return Err(corrupt("truncated before header length".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(16))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| corrupt(format!("header of {header_len} bytes exceeds file size {}", bytes.len())))?;
    let header: H = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| corrupt(format!("header: {e}")))?;
    let body = &bytes[header_end..];
    if !body.len().is_multiple_of(8) {
        return Err(corrupt(format!("payload of {} bytes is not a whole number of doubles", body.len())));
    }
    let payload = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, payload))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| LabError::io(path, e))
}

/// Splits a payload into consecutive named arrays of declared lengths.
pub struct Cursor<'a> {
    data: &'a [f64],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    pub fn new(data: &'a [f64], path: &'a Path) -> Self {
        Cursor { data, pos: 0, path }
    }

    pub fn take(&mut self, name: &str, len: usize) -> Result<&'a [f64]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let out = &self.data[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(LabError::Corrupt {
                path: self.path.to_path_buf(),
                reason: format!(
                    "array `{name}` needs {len} values but only {} remain",
                    self.data.len() - self.pos
                ),
            }),
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(LabError::Corrupt {
                path: self.path.to_path_buf(),
                reason: format!("{} trailing values after the declared arrays", self.data.len() - self.pos),
            })
        }
    }
}
