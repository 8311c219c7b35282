use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FisheyeCenter, PanoramaSpec};
use crate::error::{domain, Error, Result};
use crate::Real;

pub const MAP_MAGIC: &[u8; 4] = b"OMAP";
pub const MAP_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameDims {
    pub width: usize,
    pub height: usize,
}

impl FrameDims {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    fn contains<T: Real>(&self, x: T, y: T) -> bool {
        x >= T::zero()
            && y >= T::zero()
            && x < T::from_usize_lossy(self.width)
            && y < T::from_usize_lossy(self.height)
    }
}

/// Unwrap parameters: pole, radius and start angle (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingParams<T> {
    pub center: FisheyeCenter<T>,
    pub radius_px: T,
    pub phi_deg: T,
}

impl<T: Real> MappingParams<T> {
    pub fn new(center: FisheyeCenter<T>, radius_px: T, phi_deg: T) -> Result<Self> {
        if !(radius_px > T::zero() && radius_px.is_finite()) {
            return Err(domain(format!("unwrap radius must be positive, got {radius_px}")));
        }
        if !(center.x.is_finite() && center.y.is_finite() && phi_deg.is_finite()) {
            return Err(domain("unwrap center and angle must be finite"));
        }
        Ok(Self { center, radius_px, phi_deg })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MappedPoint<T> {
    /// Continuous fisheye coordinate.
    InFrame(T, T),
    OutOfFrame,
}

impl<T: Copy> MappedPoint<T> {
    pub fn coords(&self) -> Option<(T, T)> {
        match *self {
            MappedPoint::InFrame(x, y) => Some((x, y)),
            MappedPoint::OutOfFrame => None,
        }
    }
}

/// Angle `θ` (degrees) and fisheye radius `r_f` of a continuous panorama
/// coordinate.
pub fn polar_of<T: Real>(x_p: T, y_p: T, spec: PanoramaSpec, params: &MappingParams<T>) -> (T, T) {
    let w = T::from_usize_lossy(spec.width_px);
    let h = T::from_usize_lossy(spec.height_px);
    let theta = T::lit(360.0) * x_p / w;
    let r_f = params.radius_px * (h - y_p) / h;
    (theta, r_f)
}

/// Fisheye coordinate seen by continuous panorama coordinate `(x_p, y_p)`.
///
/// Panorama pixel `(i, j)` is sampled at `(i + 0.5, j + 0.5)`; the
/// fisheye result is continuous in the same convention.
pub fn map_pixel<T: Real>(
    x_p: T,
    y_p: T,
    spec: PanoramaSpec,
    params: &MappingParams<T>,
    fisheye: FrameDims,
) -> MappedPoint<T> {
    let (theta, r_f) = polar_of(x_p, y_p, spec, params);
    let ang = (params.phi_deg - theta).to_radians();
    let x_f = params.center.x + r_f * ang.cos();
    let y_f = params.center.y - r_f * ang.sin();
    if fisheye.contains(x_f, y_f) {
        MappedPoint::InFrame(x_f, y_f)
    } else {
        MappedPoint::OutOfFrame
    }
}

/// Per-panorama-pixel lookup of fisheye source coordinates.
///
/// Entries are `f32` pairs row-major over the panorama; `(NaN, NaN)` marks
/// an out-of-frame pixel. This is also the cache file layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingTable {
    spec: PanoramaSpec,
    fisheye: FrameDims,
    entries: Vec<[f32; 2]>,
}

const OUT: [f32; 2] = [f32::NAN, f32::NAN];

impl MappingTable {
    pub fn spec(&self) -> PanoramaSpec {
        self.spec
    }

    pub fn fisheye_dims(&self) -> FrameDims {
        self.fisheye
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, x_p: usize, y_p: usize) -> Option<(f32, f32)> {
        let [x, y] = self.entries[y_p * self.spec.width_px + x_p];
        if x.is_nan() {
            None
        } else {
            Some((x, y))
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = Option<(f32, f32)>> + '_ {
        self.entries.iter().map(|&[x, y]| if x.is_nan() { None } else { Some((x, y)) })
    }

    /// Table whose every entry is out of frame.
    pub fn all_out_of_frame(spec: PanoramaSpec, fisheye: FrameDims) -> Self {
        Self { spec, fisheye, entries: vec![OUT; spec.len()] }
    }

    /// Bit pattern of every entry, for byte-level comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Little-endian: `OMAP`, u32 version, u32 w, u32 h, then `w·h × (f32, f32)`.
    ///
    /// The fisheye size is not part of the format; supply it on load.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAP_MAGIC)?;
        w.write_all(&MAP_VERSION.to_le_bytes())?;
        w.write_all(&(self.spec.width_px as u32).to_le_bytes())?;
        w.write_all(&(self.spec.height_px as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.entries.len() * 8);
        for [x, y] in &self.entries {
            buf.extend_from_slice(&x.to_le_bytes());
            buf.extend_from_slice(&y.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R, fisheye: FrameDims) -> Result<Self> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)
            .map_err(|e| Error::Format(format!("truncated mapping table: {e}")))?;
        if &head[..4] != MAP_MAGIC {
            return Err(Error::Format("bad mapping table magic".into()));
        }
        let u = |i: usize| u32::from_le_bytes([head[i], head[i + 1], head[i + 2], head[i + 3]]);
        if u(4) != MAP_VERSION {
            return Err(Error::Format(format!("unsupported mapping table version {}", u(4))));
        }
        let spec = PanoramaSpec::new(u(8) as usize, u(12) as usize)?;
        let mut bytes = vec![0u8; spec.len() * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("truncated mapping table: {e}")))?;
        let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        let mut entries = Vec::with_capacity(spec.len());
        for rec in bytes.chunks_exact(8) {
            let (x, y) = (f(&rec[..4]), f(&rec[4..]));
            if x.is_nan() != y.is_nan() {
                return Err(Error::Format("mapping entry with a single NaN coordinate".into()));
            }
            if !x.is_nan() && !fisheye.contains(x, y) {
                return Err(Error::Format(format!(
                    "mapping entry ({x}, {y}) outside {}x{} fisheye",
                    fisheye.width, fisheye.height
                )));
            }
            entries.push([x, y]);
        }
        Ok(Self { spec, fisheye, entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, fisheye: FrameDims) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?), fisheye)
    }
}

/// Evaluates [`map_pixel`] at every panorama pixel center.
pub fn build_mapping<T: Real>(
    spec: PanoramaSpec,
    params: &MappingParams<T>,
    fisheye: FrameDims,
) -> MappingTable {
    let half = T::lit(0.5);
    let mut entries = vec![OUT; spec.len()];
    entries
        .par_chunks_mut(spec.width_px)
        .enumerate()
        .for_each(|(row, out)| {
            let y_p = T::from_usize_lossy(row) + half;
            for (col, e) in out.iter_mut().enumerate() {
                let x_p = T::from_usize_lossy(col) + half;
                if let MappedPoint::InFrame(x, y) = map_pixel(x_p, y_p, spec, params, fisheye) {
                    let (xf, yf) = (x.to_f64_lossy() as f32, y.to_f64_lossy() as f32);
                    // rounding to f32 may land exactly on the far edge
                    if fisheye.contains(xf, yf) {
                        *e = [xf, yf];
                    }
                }
            }
        });
    MappingTable { spec, fisheye, entries }
}
