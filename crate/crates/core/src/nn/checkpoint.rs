//! Binary parameter checkpoints.
//!
//! Layout (all integers u32 little-endian): magic `TSRLCKPT`, version,
//! tensor count, then per tensor its name length and UTF-8 name, rank,
//! dimensions, and the values as f32 little-endian.

use std::io::{Read, Write};

use super::model::ModelInstance;
use super::tensor::Tensor;
use super::NnError;

const MAGIC: &[u8; 8] = b"TSRLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get(r: &mut impl Read) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn save_checkpoint<W: Write>(m: &ModelInstance, mut w: W) -> Result<(), NnError> {
    w.write_all(MAGIC)?;
    put(&mut w, CHECKPOINT_VERSION)?;
    put(&mut w, m.params().len() as u32)?;
    for (name, t) in m.params().iter() {
        put(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put(&mut w, t.shape().len() as u32)?;
        for &d in t.shape() {
            put(&mut w, d as u32)?;
        }
        for &v in t.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Loads values into `m`. Names and shapes must match the model exactly.
pub fn load_checkpoint<R: Read>(m: &mut ModelInstance, mut r: R) -> Result<(), NnError> {
    let bad = |msg: String| NnError::Checkpoint(msg);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let version = get(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let count = get(&mut r)? as usize;
    if count != m.params().len() {
        return Err(bad(format!("{count} tensors, model has {}", m.params().len())));
    }
    let mut loaded = Vec::with_capacity(count);
    for expected in m.params().names() {
        let len = get(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8".into()))?;
        if &name != expected {
            return Err(bad(format!("found tensor {name}, expected {expected}")));
        }
        let rank = get(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| get(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let want = m.params().get(expected).unwrap().shape();
        if shape != want {
            return Err(NnError::ShapeMismatch {
                expected: want.to_vec(),
                found: shape,
            });
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; 4 * n];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        loaded.push(Tensor::new(shape, data));
    }
    for (slot, t) in m.params_mut().tensors_mut().iter_mut().zip(loaded) {
        *slot = t;
    }
    Ok(())
}
