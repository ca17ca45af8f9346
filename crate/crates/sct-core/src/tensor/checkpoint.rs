//! Parameter checkpoints: a flat binary blob of named arrays.
//!
//! Layout (all integers little-endian):
//! magic `SCTL`, version `u32`, array count `u32`, then per array:
//! name length `u32`, name bytes, rank `u32`, dims `u64` each, and the raw
//! payload as 4-byte little-endian IEEE-754 floats. 64-bit tensors are
//! narrowed to f32 on save and widened back on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::shape::numel;
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"SCTL";
const VERSION: u32 = 1;

/// One named array from a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn save_checkpoint<T: Scalar>(path: &Path, entries: &[(String, Tensor<T>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, tensor) in entries {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in tensor.data().iter() {
            w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<CheckpointArray>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?} in {}",
            magic,
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut arrays = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|e| Error::Checkpoint(format!("array name is not utf-8: {e}")))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n = numel(&shape);
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 4];
        for _ in 0..n {
            r.read_exact(&mut b)?;
            data.push(f32::from_le_bytes(b));
        }
        arrays.push(CheckpointArray { name, shape, data });
    }
    Ok(arrays)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Copies checkpoint arrays into the given named parameters. Every parameter
/// must be present with a matching shape; the error message lists every
/// offending array.
pub fn apply_arrays<T: Scalar>(
    params: &[(String, Tensor<T>)],
    arrays: &[CheckpointArray],
) -> Result<()> {
    let by_name: std::collections::HashMap<&str, &CheckpointArray> =
        arrays.iter().map(|a| (a.name.as_str(), a)).collect();
    let mut problems = Vec::new();
    for (name, tensor) in params {
        match by_name.get(name.as_str()) {
            None => problems.push(format!("missing array {name}")),
            Some(a) if a.shape != tensor.shape() => problems.push(format!(
                "{name}: checkpoint shape {:?} vs model shape {:?}",
                a.shape,
                tensor.shape()
            )),
            Some(_) => {}
        }
    }
    if !problems.is_empty() {
        return Err(Error::Checkpoint(problems.join("; ")));
    }
    for (name, tensor) in params {
        let a = by_name[name.as_str()];
        let widened: Vec<T> = a.data.iter().map(|&v| T::from_f64(v as f64)).collect();
        tensor.set_data(&widened)?;
    }
    Ok(())
}
