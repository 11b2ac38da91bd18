//! Binary tensor files.
//!
//! Layout (little-endian):
//! - magic: 8 bytes `SEQSEL01`
//! - header: u32 frames, u32 grid rows, u32 grid cols, u32 channels
//! - data: f32 per value, row-major (frame, row, col, channel)
//!
//! Values are held as f64 in memory and narrowed to f32 on write, so a
//! tensor whose values are all f32-representable round-trips bit-exactly.

use std::path::Path;

use crate::grid::GridShape;
use crate::submodular::{LexicalProbMap, RegionFeatureMap};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SEQSEL01";
pub const HEADER_LEN: usize = 8 + 4 * 4;

const HEADER_FIELDS: [&str; 4] = ["frames", "rows", "cols", "channels"];

/// A 4-d tensor in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub frames: usize,
    pub grid: GridShape,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(frames: usize, grid: GridShape, channels: usize, data: Vec<f64>) -> Result<Self> {
        let expected = frames
            .checked_mul(grid.len())
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::Shape("tensor size overflows".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for a {frames}x{}x{}x{channels} tensor",
                data.len(),
                grid.rows,
                grid.cols
            )));
        }
        Ok(Tensor {
            frames,
            grid,
            channels,
            data,
        })
    }

    pub fn from_probmap(map: &LexicalProbMap) -> Self {
        Tensor {
            frames: map.frames(),
            grid: map.grid(),
            channels: map.vocab_size(),
            data: map.values().to_vec(),
        }
    }

    pub fn from_featmap(map: &RegionFeatureMap) -> Self {
        Tensor {
            frames: map.frames(),
            grid: map.grid(),
            channels: map.dim(),
            data: map.values().to_vec(),
        }
    }

    pub fn into_probmap(self) -> Result<LexicalProbMap> {
        LexicalProbMap::new(self.grid, self.frames, self.channels, self.data)
    }

    pub fn into_featmap(self) -> Result<RegionFeatureMap> {
        RegionFeatureMap::new(self.grid, self.frames, self.channels, self.data)
    }
}

fn data_offset(index: usize) -> u64 {
    (HEADER_LEN + 4 * index) as u64
}

/// Serializes `tensor`; `field` names the tensor in error messages.
pub fn encode(tensor: &Tensor, field: &str) -> Result<Vec<u8>> {
    let dims = [tensor.frames, tensor.grid.rows, tensor.grid.cols, tensor.channels];
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * tensor.data.len());
    out.extend_from_slice(MAGIC);
    for (name, d) in HEADER_FIELDS.iter().zip(dims) {
        let d = u32::try_from(d).map_err(|_| Error::Format {
            field: format!("{field}.{name}"),
            offset: out.len() as u64,
            message: format!("dimension {d} does not fit in u32"),
        })?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for (i, &v) in tensor.data.iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::Format {
                field: format!("{field}.data"),
                offset: data_offset(i),
                message: format!("value {v} is not representable as a finite f32"),
            });
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], offset: usize, len: usize, field: &str) -> Result<&'a [u8]> {
    bytes.get(offset..offset + len).ok_or_else(|| Error::Truncated {
        field: field.to_string(),
        offset: offset as u64,
        needed: len as u64,
        available: bytes.len().saturating_sub(offset) as u64,
    })
}

/// Parses a tensor file. Fails closed: truncation, trailing bytes, a bad
/// magic, zero dimensions or non-finite values are errors naming the field
/// and byte offset.
pub fn decode(bytes: &[u8], field: &str) -> Result<Tensor> {
    let magic = take(bytes, 0, MAGIC.len(), &format!("{field}.magic"))?;
    if magic != MAGIC {
        return Err(Error::Format {
            field: format!("{field}.magic"),
            offset: 0,
            message: format!("expected {:?}, found {:?}", String::from_utf8_lossy(MAGIC), String::from_utf8_lossy(magic)),
        });
    }
    let mut dims = [0usize; 4];
    for (k, name) in HEADER_FIELDS.iter().enumerate() {
        let offset = MAGIC.len() + 4 * k;
        let raw = take(bytes, offset, 4, &format!("{field}.{name}"))?;
        let d = u32::from_le_bytes(raw.try_into().expect("4 bytes"));
        if d == 0 {
            return Err(Error::Format {
                field: format!("{field}.{name}"),
                offset: offset as u64,
                message: "dimension is zero".into(),
            });
        }
        dims[k] = d as usize;
    }
    let [frames, rows, cols, channels] = dims;
    let count = frames
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .and_then(|n| n.checked_mul(channels))
        .and_then(|n| n.checked_mul(4).map(|_| n))
        .ok_or_else(|| Error::Format {
            field: format!("{field}.header"),
            offset: MAGIC.len() as u64,
            message: "dimensions overflow".into(),
        })?;
    let payload = take(bytes, HEADER_LEN, count * 4, &format!("{field}.data"))?;
    if bytes.len() > HEADER_LEN + count * 4 {
        return Err(Error::Format {
            field: format!("{field}.data"),
            offset: (HEADER_LEN + count * 4) as u64,
            message: format!("{} trailing bytes", bytes.len() - HEADER_LEN - count * 4),
        });
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::Format {
                field: format!("{field}.data"),
                offset: data_offset(i),
                message: format!("non-finite value {v}"),
            });
        }
        data.push(v as f64);
    }
    Tensor::new(frames, GridShape::new(rows, cols)?, channels, data)
}

/// Decodes a probability tensor, rejecting values outside `[0, 1]` with
/// their offset.
pub fn decode_probmap(bytes: &[u8], field: &str) -> Result<LexicalProbMap> {
    let tensor = decode(bytes, field)?;
    if let Some(i) = tensor.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Format {
            field: format!("{field}.data"),
            offset: data_offset(i),
            message: format!("probability {} outside [0, 1]", tensor.data[i]),
        });
    }
    tensor.into_probmap()
}

/// Decodes a feature tensor, rejecting zero vectors with their offset.
pub fn decode_featmap(bytes: &[u8], field: &str) -> Result<RegionFeatureMap> {
    let tensor = decode(bytes, field)?;
    if let Some(r) = tensor
        .data
        .chunks_exact(tensor.channels)
        .position(|x| x.iter().all(|&v| v == 0.0))
    {
        return Err(Error::Format {
            field: format!("{field}.data"),
            offset: data_offset(r * tensor.channels),
            message: "zero feature vector".into(),
        });
    }
    tensor.into_featmap()
}

pub fn write_tensor(path: &Path, tensor: &Tensor, field: &str) -> Result<()> {
    std::fs::write(path, encode(tensor, field)?)?;
    Ok(())
}

pub fn read_tensor(path: &Path, field: &str) -> Result<Tensor> {
    decode(&std::fs::read(path)?, field)
}
