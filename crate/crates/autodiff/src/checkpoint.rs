//! `CPCW` weight checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"CPCW"
//! version  u32
//! count    u32
//! count × { name_len u16, name [u8; name_len] (UTF-8),
//!           rank u8, extents [u32; rank], data [f32; Π extents] }
//! ```
//!
//! Values are always stored as `f32`; an `f32` parameter set round-trips
//! bit-exactly.

use std::io::{Read, Write};

use crate::error::{Result, TensorError};
use crate::params::ParamSet;
use crate::scalar::Float;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CPCW";
pub const VERSION: u32 = 1;

pub fn write<T: Float, W: Write>(params: &ParamSet<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (_, name, t) in params.iter() {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| TensorError::invalid("checkpoint", format!("name too long: {name}")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(bytes)?;
        let rank = u8::try_from(t.rank())
            .map_err(|_| TensorError::invalid("checkpoint", format!("rank too large: {name}")))?;
        w.write_all(&[rank])?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.numel() * 4);
        for v in t.data() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn to_bytes<T: Float>(params: &ParamSet<T>) -> Vec<u8> {
    let mut out = Vec::new();
    write(params, &mut out).expect("writing to a Vec cannot fail");
    out
}

/// Reader that tracks the byte offset for error messages.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        let mut filled = 0;
        while filled < n {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(TensorError::Checkpoint {
                        msg: format!("truncated while reading {what}"),
                        offset: self.offset + filled as u64,
                    })
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += n as u64;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Reads every `(name, tensor)` record in file order.
pub fn read<R: Read>(r: R) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut c = Cursor { inner: r, offset: 0 };
    let magic = c.bytes(4, "magic")?;
    if magic != MAGIC {
        return Err(TensorError::Checkpoint { msg: format!("bad magic {magic:?}, expected \"CPCW\""), offset: 0 });
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(TensorError::Checkpoint {
            msg: format!("unsupported version {version}, expected {VERSION}"),
            offset: 4,
        });
    }
    let count = c.u32("parameter count")?;
    let mut out = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let start = c.offset;
        let len = c.bytes(2, "name length")?;
        let name_bytes = c.bytes(u16::from_le_bytes([len[0], len[1]]) as usize, "name")?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| TensorError::Checkpoint { msg: "parameter name is not UTF-8".into(), offset: start + 2 })?;
        let rank = c.bytes(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32("extent")? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = c.bytes(numel * 4, "tensor data")?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        let tensor = Tensor::from_vec(&shape, data)
            .map_err(|e| TensorError::Checkpoint { msg: format!("parameter {name}: {e}"), offset: start })?;
        out.push((name, tensor));
    }
    let mut probe = [0u8; 1];
    if c.inner.read(&mut probe)? != 0 {
        return Err(TensorError::Checkpoint { msg: "trailing bytes after last parameter".into(), offset: c.offset });
    }
    Ok(out)
}

/// Loads a checkpoint into an existing parameter set (names and shapes
/// must match exactly).
pub fn load_into<T: Float, R: Read>(params: &mut ParamSet<T>, r: R) -> Result<()> {
    let records = read(r)?;
    params.load_values(&records)
}
