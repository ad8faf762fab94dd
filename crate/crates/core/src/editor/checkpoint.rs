//! Flat binary checkpoints.
//!
//! ```text
//! magic    8 bytes  "MXEFILM\0"
//! version  u32      1
//! config   6 × u32  channels, kernel, blocks, embed_dim, hidden, n_masks
//!          f32      m_max
//! tensors  u32      count, then per tensor:
//!                   u32 name length, UTF-8 name, u32 rank, rank × u32 dims
//! values   f32 × Σ  every tensor in table order
//! ```
//! All integers and floats are little-endian. Parameters are stored as
//! 32-bit floats, so a round trip quantises them.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{EditorError, FilmConfig, FilmMaskNet};

pub const MAGIC: &[u8; 8] = b"MXEFILM\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("shape table does not match the configuration: {0}")]
    ShapeTable(String),
    #[error(transparent)]
    Editor(#[from] EditorError),
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f32(r: &mut impl Read) -> std::io::Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn small(v: usize) -> std::io::Result<u32> {
    u32::try_from(v).map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32"))
}

pub fn write_checkpoint(net: &FilmMaskNet, mut w: impl Write) -> Result<(), CheckpointError> {
    let c = net.config();
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    for v in [c.channels, c.kernel, c.blocks, c.embed_dim, c.hidden, c.n_masks] {
        put_u32(&mut w, small(v)?)?;
    }
    w.write_all(&(c.m_max as f32).to_le_bytes())?;
    let shapes = net.tensor_shapes();
    put_u32(&mut w, small(shapes.len())?)?;
    for (name, dims) in shapes {
        put_u32(&mut w, small(name.len())?)?;
        w.write_all(name.as_bytes())?;
        put_u32(&mut w, small(dims.len())?)?;
        for d in dims {
            put_u32(&mut w, small(*d)?)?;
        }
    }
    for p in net.params() {
        w.write_all(&(*p as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<FilmMaskNet, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = get_u32(&mut r)? as usize;
    }
    let m_max = f64::from(get_f32(&mut r)?);
    let config = FilmConfig {
        channels: dims[0],
        kernel: dims[1],
        blocks: dims[2],
        embed_dim: dims[3],
        hidden: dims[4],
        n_masks: dims[5],
        m_max,
    };
    config.validate()?;
    // a freshly initialised network provides the expected table
    let expected = FilmMaskNet::new(config, 0)?;
    let count = get_u32(&mut r)? as usize;
    if count != expected.tensor_shapes().len() {
        return Err(CheckpointError::ShapeTable(format!(
            "{count} tensors, expected {}",
            expected.tensor_shapes().len()
        )));
    }
    for (name, shape) in expected.tensor_shapes() {
        let len = get_u32(&mut r)? as usize;
        if len > 256 {
            return Err(CheckpointError::ShapeTable("tensor name too long".into()));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let rank = get_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(CheckpointError::ShapeTable(format!("rank {rank}")));
        }
        let got: Vec<usize> = (0..rank).map(|_| get_u32(&mut r).map(|v| v as usize)).collect::<Result<_, _>>()?;
        if buf != name.as_bytes() || &got != shape {
            return Err(CheckpointError::ShapeTable(format!(
                "{} {:?} where {name} {shape:?} was expected",
                String::from_utf8_lossy(&buf),
                got
            )));
        }
    }
    let params = (0..expected.params().len())
        .map(|_| get_f32(&mut r).map(f64::from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FilmMaskNet::from_params(config, params)?)
}

pub fn save_checkpoint(net: &FilmMaskNet, path: &Path) -> Result<(), CheckpointError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<FilmMaskNet, CheckpointError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
