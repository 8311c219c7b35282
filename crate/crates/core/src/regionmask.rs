//! Clip-level person masks and their application to feature maps.

use crate::error::{domain, mismatch, Result};
use crate::io::BoxesRecord;
use crate::tensor::FeatureMap;
use crate::Real;

/// Half-open pixel box `[x0, x1) × [y0, y1)` detected in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub frame_index: i64,
}

impl BoundingBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize, frame_index: i64) -> Self {
        Self { x0, y0, x1, y1, frame_index }
    }

    fn validate(&self, frame_w: usize, frame_h: usize) -> Result<()> {
        if self.x0 >= self.x1 || self.y0 >= self.y1 || self.x1 > frame_w || self.y1 > frame_h {
            return Err(domain(format!(
                "box [{}, {}) x [{}, {}) in frame {} is empty or outside {frame_w}x{frame_h}",
                self.x0, self.x1, self.y0, self.y1, self.frame_index
            )));
        }
        Ok(())
    }
}

/// Flattens a boxes file into boxes, rejecting negative coordinates.
pub fn boxes_from_records(records: &[BoxesRecord]) -> Result<Vec<BoundingBox>> {
    let mut out = Vec::new();
    for rec in records {
        for &[x0, y0, x1, y1] in &rec.boxes {
            let c = |v: i64| {
                usize::try_from(v)
                    .map_err(|_| domain(format!("negative box coordinate {v} in frame {}", rec.frame)))
            };
            out.push(BoundingBox::new(c(x0)?, c(y0)?, c(x1)?, c(y1)?, rec.frame));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(mismatch(format!(
                "mask has {} cells, expected {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Union of all boxes across the clip's frames at frame resolution.
pub fn clip_mask(boxes: &[BoundingBox], frame_w: usize, frame_h: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::zeros(frame_w, frame_h);
    for b in boxes {
        b.validate(frame_w, frame_h)?;
        for y in b.y0..b.y1 {
            mask.bits[y * frame_w + b.x0..y * frame_w + b.x1].fill(true);
        }
    }
    Ok(mask)
}

/// Source index range `[lo, hi)` feeding target cell `t` along one axis.
///
/// When shrinking, source cell `s` belongs to target `floor(s · dst / src)`,
/// so the ranges partition the source. When growing, each target takes the
/// single source cell `floor(t · src / dst)`.
fn pre_image(t: usize, src: usize, dst: usize) -> (usize, usize) {
    if dst > src {
        let lo = t * src / dst;
        return (lo, lo + 1);
    }
    let lo = (t * src).div_ceil(dst);
    let hi = ((t + 1) * src).div_ceil(dst).min(src);
    (lo, hi)
}

/// Any-coverage resize: a target cell is set iff some source cell in its
/// pre-image rectangle is set.
pub fn downsample_mask(mask: &BinaryMask, target_w: usize, target_h: usize) -> Result<BinaryMask> {
    if target_w == 0 || target_h == 0 {
        return Err(domain(format!("target mask must be at least 1x1, got {target_w}x{target_h}")));
    }
    if mask.width == 0 || mask.height == 0 {
        return Err(domain("source mask is empty"));
    }
    // Integral image makes each rectangle query O(1).
    let (w, h) = (mask.width, mask.height);
    let mut integral = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += mask.get(x, y) as u32;
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let rect = |x0: usize, y0: usize, x1: usize, y1: usize| {
        integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
            - integral[y0 * (w + 1) + x1]
            - integral[y1 * (w + 1) + x0]
    };
    let mut out = BinaryMask::zeros(target_w, target_h);
    for ty in 0..target_h {
        let (y0, y1) = pre_image(ty, h, target_h);
        for tx in 0..target_w {
            let (x0, x1) = pre_image(tx, w, target_w);
            out.set(tx, ty, rect(x0, y0, x1, y1) > 0);
        }
    }
    Ok(out)
}

/// Zeroes every feature outside the mask, in all channels.
pub fn apply_mask<T: Real>(f: &FeatureMap<T>, m: &BinaryMask) -> Result<FeatureMap<T>> {
    if m.width != f.width() || m.height != f.height() {
        return Err(mismatch(format!(
            "mask is {}x{} but feature map is {}x{}",
            m.width,
            m.height,
            f.width(),
            f.height()
        )));
    }
    let mut out = f.clone();
    let plane = f.height() * f.width();
    for chunk in out.values_mut().chunks_exact_mut(plane) {
        for (v, &keep) in chunk.iter_mut().zip(&m.bits) {
            if !keep {
                *v = T::zero();
            }
        }
    }
    Ok(out)
}
