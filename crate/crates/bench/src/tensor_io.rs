//! Binary tensor files: magic `DNT1`, format version (u32), number of modes
//! (u32), the extents (u64 each), then the entries in natural order as
//! binary64. Every field is little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use densekrp::{DenseTensor, Shape};

use crate::error::{BenchError, Result};

pub const MAGIC: [u8; 4] = *b"DNT1";
pub const VERSION: u32 = 1;

const CHUNK_VALUES: usize = 8192;

pub fn write_tensor<W: Write>(mut w: W, tensor: &DenseTensor) -> Result<()> {
    let dims = tensor.shape().dims();
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(CHUNK_VALUES * 8);
    for chunk in tensor.values().chunks(CHUNK_VALUES) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads exactly `buf.len()` bytes, reporting a short read as a format
/// error at `offset`.
fn read_field<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..])? {
            0 => {
                return Err(BenchError::Format {
                    offset: *offset + got as u64,
                    message: format!("truncated {what}: expected {} bytes, found {got}", buf.len()),
                })
            }
            k => got += k,
        }
    }
    *offset += buf.len() as u64;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut offset = 0u64;
    let mut magic = [0u8; 4];
    read_field(&mut r, &mut magic, &mut offset, "magic")?;
    if magic != MAGIC {
        return Err(BenchError::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let mut word = [0u8; 4];
    read_field(&mut r, &mut word, &mut offset, "version")?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(BenchError::Format {
            offset: 4,
            message: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    read_field(&mut r, &mut word, &mut offset, "mode count")?;
    let nmodes = u32::from_le_bytes(word) as usize;
    let mut dims = Vec::with_capacity(nmodes.min(64));
    for _ in 0..nmodes {
        let mut d = [0u8; 8];
        let at = offset;
        read_field(&mut r, &mut d, &mut offset, "extent")?;
        let d = usize::try_from(u64::from_le_bytes(d)).map_err(|_| BenchError::Format {
            offset: at,
            message: "extent does not fit in memory".into(),
        })?;
        dims.push(d);
    }
    let shape = Shape::new(&dims).map_err(|e| BenchError::Format {
        offset: 12,
        message: e.to_string(),
    })?;

    let expected = shape.total() as u64 * 8;
    let payload_start = offset;
    let mut values = Vec::new();
    values
        .try_reserve_exact(shape.total())
        .map_err(|e| densekrp::Error::Resource(format!("cannot allocate {} entries: {e}", shape.total())))?;
    let mut buf = vec![0u8; CHUNK_VALUES * 8];
    while values.len() < shape.total() {
        let want = (shape.total() - values.len()).min(CHUNK_VALUES) * 8;
        let mut got = 0;
        while got < want {
            match r.read(&mut buf[got..want])? {
                0 => {
                    let actual = values.len() as u64 * 8 + got as u64;
                    return Err(BenchError::Format {
                        offset: payload_start + actual,
                        message: format!("truncated payload: expected {expected} bytes, found {actual}"),
                    });
                }
                k => got += k,
            }
        }
        values.extend(buf[..want].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(BenchError::Format {
            offset: payload_start + expected,
            message: format!("trailing data after {expected}-byte payload"),
        });
    }
    Ok(DenseTensor::new(shape, values)?)
}

pub fn save(path: &Path, tensor: &DenseTensor) -> Result<()> {
    write_tensor(BufWriter::new(File::create(path)?), tensor)
}

pub fn load(path: &Path) -> Result<DenseTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}
