//! `PDHM` checkpoint files.
//!
//! ```text
//! "PDHM"                      4 bytes
//! version                     u32 LE (= 1)
//! input shape tag             u8: 0 = flat, 1 = image
//!   flat:  m                  u32 LE
//!   image: height width chans u32 LE each
//! code_bits                   u32 LE
//! layer count                 u32 LE
//! per layer: tag u8 + fields u32 LE
//!   1 conv    kernel out_channels stride
//!   2 maxpool (no fields)
//!   3 dense   out_dim
//!   4 relu    (no fields)
//! parameter matrices          f64 LE, declaration order, row-major
//! ```

use std::io::{Read, Write};

use crate::error::{PdhError, Result};
use crate::model::config::{InputShape, Layer, ModelConfig};
use crate::model::Parameters;
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PDHM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| PdhError::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn write_checkpoint<W: Write>(w: &mut W, params: &Parameters) -> Result<()> {
    let cfg = params.config();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    match cfg.input {
        InputShape::Flat(m) => {
            w.write_all(&[0])?;
            put_u32(w, m)?;
        }
        InputShape::Image { height, width, channels } => {
            w.write_all(&[1])?;
            put_u32(w, height)?;
            put_u32(w, width)?;
            put_u32(w, channels)?;
        }
    }
    put_u32(w, cfg.code_bits)?;
    put_u32(w, cfg.layers.len())?;
    for layer in &cfg.layers {
        match *layer {
            Layer::Conv { kernel, out_channels, stride } => {
                w.write_all(&[1])?;
                put_u32(w, kernel)?;
                put_u32(w, out_channels)?;
                put_u32(w, stride)?;
            }
            Layer::MaxPool => w.write_all(&[2])?,
            Layer::Dense { out_dim } => {
                w.write_all(&[3])?;
                put_u32(w, out_dim)?;
            }
            Layer::Relu => w.write_all(&[4])?,
        }
    }
    for t in params.tensors() {
        for v in t.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Parameters> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(PdhError::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let version = get_u32(r)?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(PdhError::Format(format!("unsupported checkpoint version {version}")));
    }
    let input = match get_u8(r)? {
        0 => InputShape::Flat(get_u32(r)?),
        1 => InputShape::Image { height: get_u32(r)?, width: get_u32(r)?, channels: get_u32(r)? },
        t => return Err(PdhError::Format(format!("unknown input shape tag {t}"))),
    };
    let code_bits = get_u32(r)?;
    let count = get_u32(r)?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        layers.push(match get_u8(r)? {
            1 => Layer::Conv { kernel: get_u32(r)?, out_channels: get_u32(r)?, stride: get_u32(r)? },
            2 => Layer::MaxPool,
            3 => Layer::Dense { out_dim: get_u32(r)? },
            4 => Layer::Relu,
            t => return Err(PdhError::Format(format!("unknown layer tag {t}"))),
        });
    }
    let config = ModelConfig { input, layers, code_bits };
    let shapes = config.param_shapes().map_err(|e| PdhError::Format(format!("checkpoint config: {e}")))?;
    let mut tensors = Vec::with_capacity(shapes.len());
    let mut buf = [0u8; 8];
    for (rows, cols) in shapes {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push(Matrix::new(rows, cols, data)?);
    }
    if r.read(&mut buf)? != 0 {
        return Err(PdhError::Format("trailing bytes after checkpoint".into()));
    }
    Parameters::from_tensors(config, tensors)
}
