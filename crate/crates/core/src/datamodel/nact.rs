//! NACT: a minimal little-endian dense tensor file.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "NACT"
//! 4       1           version (1)
//! 5       1           dtype (1 = real32 LE, 2 = binary8)
//! 6       1           ndim (1..=4)
//! 7       1           zero padding
//! 8       8 * ndim    dims, u64 LE
//! ...     payload     row-major values
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::tensor::{ActivationTensor, DType};
use crate::error::{Error, Result};

pub const NACT_MAGIC: [u8; 4] = *b"NACT";
pub const NACT_VERSION: u8 = 1;

pub(crate) fn encode(tensor: &ActivationTensor) -> Vec<u8> {
    let dtype = tensor.dtype();
    let mut out = Vec::with_capacity(8 + 8 * tensor.ndim() + tensor.len() * dtype.element_size());
    out.extend_from_slice(&NACT_MAGIC);
    out.push(NACT_VERSION);
    out.push(dtype.code());
    out.push(tensor.ndim() as u8);
    out.push(0);
    for &d in tensor.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match dtype {
        DType::Real32 => {
            for v in tensor.as_f32().unwrap() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        DType::Binary8 => out.extend_from_slice(tensor.as_binary().unwrap()),
    }
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Result<ActivationTensor> {
    if bytes.len() < 8 {
        return Err(Error::Format(format!(
            "header needs 8 bytes, file has {}",
            bytes.len()
        )));
    }
    if bytes[0..4] != NACT_MAGIC {
        return Err(Error::Format(format!("bad magic {:02X?}", &bytes[0..4])));
    }
    if bytes[4] != NACT_VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let dtype = DType::from_code(bytes[5])
        .ok_or_else(|| Error::Format(format!("unknown dtype code {}", bytes[5])))?;
    let ndim = bytes[6] as usize;
    if !(1..=4).contains(&ndim) {
        return Err(Error::Format(format!("ndim {ndim} outside 1..=4")));
    }
    let header = 8 + 8 * ndim;
    if bytes.len() < header {
        return Err(Error::Truncated {
            expected: header as u64,
            found: bytes.len() as u64,
        });
    }
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let off = 8 + 8 * i;
        let d = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        dims.push(usize::try_from(d).map_err(|_| Error::Format(format!("dim {d} too large")))?);
    }
    let count = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let payload_len = count
        .checked_mul(dtype.element_size() as u64)
        .ok_or_else(|| Error::Format("payload size overflow".into()))?;
    let available = (bytes.len() - header) as u64;
    if available < payload_len {
        return Err(Error::Truncated {
            expected: header as u64 + payload_len,
            found: bytes.len() as u64,
        });
    }
    if available > payload_len {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            available - payload_len
        )));
    }
    let payload = &bytes[header..];
    match dtype {
        DType::Real32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ActivationTensor::from_f32(dims, data)
        }
        DType::Binary8 => ActivationTensor::from_binary(dims, payload.to_vec()),
    }
}

/// Write `tensor` to `path`. The tensor's invariants are checked at construction,
/// so nothing invalid can reach the file.
pub fn write_nact(tensor: &ActivationTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(tensor);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_nact(path: impl AsRef<Path>) -> Result<ActivationTensor> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
