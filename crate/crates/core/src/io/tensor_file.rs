use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::regionmask::BinaryMask;
use crate::tensor::FeatureMap;
use crate::Real;

pub const TENSOR_MAGIC: &[u8; 4] = b"OTSR";
pub const TENSOR_VERSION: u32 = 1;

/// An n-dimensional `f32` tensor in C order.
///
/// Layout (little-endian): magic `OTSR`, `u32` version, `u32` ndim,
/// `ndim × u32` dims, then `prod(dims) × f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Format(format!(
                "tensor dims {dims:?} imply {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&TENSOR_VERSION.to_le_bytes())?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dim {d} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format(format!("bad tensor magic {magic:?}")));
        }
        let version = read_u32(&mut r)?;
        if version != TENSOR_VERSION {
            return Err(Error::Format(format!("unsupported tensor version {version}")));
        }
        let ndim = read_u32(&mut r)? as usize;
        if ndim > 16 {
            return Err(Error::Format(format!("implausible tensor rank {ndim}")));
        }
        let dims = (0..ndim)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes).map_err(truncated)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn from_feature_map<T: Real>(f: &FeatureMap<T>) -> Self {
        let (c, h, w) = f.shape();
        Self {
            dims: vec![c, h, w],
            data: f.values().iter().map(|v| v.to_f64_lossy() as f32).collect(),
        }
    }

    pub fn to_feature_map<T: Real>(&self) -> Result<FeatureMap<T>> {
        let &[c, h, w] = self.dims.as_slice() else {
            return Err(Error::Format(format!(
                "feature map needs 3 dims, got {:?}",
                self.dims
            )));
        };
        FeatureMap::from_vec(c, h, w, self.data.iter().map(|&v| T::lit(v as f64)).collect())
    }

    /// Masks are stored as `height × width` tensors of 0.0 / 1.0.
    pub fn from_mask(m: &BinaryMask) -> Self {
        Self {
            dims: vec![m.height(), m.width()],
            data: m.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn to_mask(&self) -> Result<BinaryMask> {
        let &[h, w] = self.dims.as_slice() else {
            return Err(Error::Format(format!("mask needs 2 dims, got {:?}", self.dims)));
        };
        let mut bits = Vec::with_capacity(self.data.len());
        for &v in &self.data {
            bits.push(if v == 1.0 {
                true
            } else if v == 0.0 {
                false
            } else {
                return Err(Error::Format(format!("mask value {v} is not 0 or 1")));
            });
        }
        BinaryMask::from_bits(w, h, bits)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    Error::Format(format!("truncated tensor file: {e}"))
}
