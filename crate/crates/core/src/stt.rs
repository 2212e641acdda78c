//! STT binary tensor files.
//!
//! Layout (little-endian, no padding, no footer):
//!
//! | offset | size          | field                          |
//! |--------|---------------|--------------------------------|
//! | 0      | 4             | magic `STTK`                   |
//! | 4      | 4             | `u32` version, always 1        |
//! | 8      | 16            | `u32` V, T, P, C               |
//! | 24     | 4·V·T·P·C     | `f32` values, `(v,t,p,c)` order |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Dims, TokenTensor};

pub const MAGIC: [u8; 4] = *b"STTK";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(bytes.len() as u64, "truncated header"))
}

/// Decode an STT byte buffer.
pub fn decode(bytes: &[u8]) -> Result<TokenTensor> {
    match bytes.get(0..4) {
        Some(m) if m == MAGIC => {}
        Some(_) => return Err(Error::format(0, "bad magic")),
        None => return Err(Error::format(bytes.len() as u64, "truncated header")),
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        let off = 8 + 4 * i;
        *d = read_u32(bytes, off)? as usize;
        if *d == 0 {
            return Err(Error::format(off as u64, "zero dimension"));
        }
    }
    let dims = Dims::new(dims[0], dims[1], dims[2], dims[3]);
    let payload_len = dims
        .checked_len()
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(8, "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated payload: header declares {payload_len} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > payload_len {
        return Err(Error::format(
            (HEADER_LEN + payload_len) as u64,
            "trailing bytes after payload",
        ));
    }
    let mut data = Vec::with_capacity(payload_len / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let value = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !value.is_finite() {
            return Err(Error::format(
                (HEADER_LEN + 4 * i) as u64,
                "non-finite value",
            ));
        }
        data.push(value);
    }
    TokenTensor::new(dims, data)
}

pub fn encode(tensor: &TokenTensor) -> Vec<u8> {
    let d = tensor.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * tensor.data().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in [d.views, d.frames, d.patches, d.channels] {
        // Dims above u32::MAX cannot be built from memory-resident data in practice.
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_stt(path: impl AsRef<Path>) -> Result<TokenTensor> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

pub fn save_stt(tensor: &TokenTensor, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode(tensor))
}

/// Write via a temporary file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
