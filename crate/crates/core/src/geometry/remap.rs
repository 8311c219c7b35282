use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MappingTable;
use crate::error::{mismatch, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

impl std::str::FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            other => Err(format!("unknown interpolation {other:?} (nearest|bilinear)")),
        }
    }
}

/// Resamples a fisheye frame into the panorama described by `table`.
/// Out-of-frame pixels are black.
pub fn remap(frame: &Image, table: &MappingTable, interp: Interpolation) -> Result<Image> {
    let dims = table.fisheye_dims();
    if frame.width() != dims.width || frame.height() != dims.height {
        return Err(mismatch(format!(
            "frame is {}x{} but the table was built for {}x{}",
            frame.width(),
            frame.height(),
            dims.width,
            dims.height
        )));
    }
    let spec = table.spec();
    let ch = frame.channels();
    let mut out = Image::new(spec.width_px, spec.height_px, ch)?;
    let row_len = spec.width_px * ch;
    out.pixels_mut()
        .par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y_p, row)| {
            for x_p in 0..spec.width_px {
                let Some((xf, yf)) = table.entry(x_p, y_p) else {
                    continue;
                };
                let px = &mut row[x_p * ch..(x_p + 1) * ch];
                match interp {
                    Interpolation::Nearest => {
                        let (x, y) = (xf as usize, yf as usize);
                        px.copy_from_slice(frame.pixel(x, y));
                    }
                    Interpolation::Bilinear => sample_bilinear(frame, xf, yf, px),
                }
            }
        });
    Ok(out)
}

/// Bilinear sample at continuous `(x, y)`, where pixel `(i, j)` has its
/// center at `(i + 0.5, j + 0.5)`; edges are clamped.
fn sample_bilinear(frame: &Image, x: f32, y: f32, out: &mut [u8]) {
    let max_x = (frame.width() - 1) as f32;
    let max_y = (frame.height() - 1) as f32;
    let u = (x - 0.5).clamp(0.0, max_x);
    let v = (y - 0.5).clamp(0.0, max_y);
    let (x0, y0) = (u.floor() as usize, v.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(frame.width() - 1), (y0 + 1).min(frame.height() - 1));
    let (fx, fy) = (u - x0 as f32, v - y0 as f32);
    for (c, o) in out.iter_mut().enumerate() {
        let p00 = frame.get(x0, y0, c) as f32;
        let p10 = frame.get(x1, y0, c) as f32;
        let p01 = frame.get(x0, y1, c) as f32;
        let p11 = frame.get(x1, y1, c) as f32;
        let top = p00 + (p10 - p00) * fx;
        let bot = p01 + (p11 - p01) * fx;
        *o = (top + (bot - top) * fy).round().clamp(0.0, 255.0) as u8;
    }
}
