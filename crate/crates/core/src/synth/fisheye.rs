use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::FisheyeCenter;
use crate::image::Image;
use crate::io::KeypointRecord;

/// Pixels whose centers lie within this distance of a ray are painted.
pub const RAY_HALF_WIDTH: f64 = 0.75;

/// Unit image-space direction of a ray at `angle_deg`, counter-clockwise
/// from `+x` with `y` pointing down.
pub fn ray_direction(angle_deg: f64) -> (f64, f64) {
    let a = angle_deg.to_radians();
    (a.cos(), -a.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisheyeTruth {
    pub image: Image,
    pub center: FisheyeCenter<f64>,
    pub rays_deg: Vec<f64>,
}

/// White radial rays from `center` to the frame border on black, RGB.
pub fn gen_fisheye(frame_w: usize, frame_h: usize, center: (f64, f64), rays_deg: &[f64]) -> Result<FisheyeTruth> {
    let (cx, cy) = center;
    if !(cx >= 0.0 && cy >= 0.0 && cx < frame_w as f64 && cy < frame_h as f64) {
        return Err(domain(format!("center ({cx}, {cy}) is outside the {frame_w}x{frame_h} frame")));
    }
    let mut image = Image::new(frame_w, frame_h, 3)?;
    let dirs: Vec<(f64, f64)> = rays_deg.iter().map(|&a| ray_direction(a)).collect();
    for y in 0..frame_h {
        for x in 0..frame_w {
            let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let hit = dirs.iter().any(|&(dx, dy)| {
                let along = px * dx + py * dy;
                let across = (px * dy - py * dx).abs();
                along >= -RAY_HALF_WIDTH && across <= RAY_HALF_WIDTH
            });
            if hit {
                for c in 0..3 {
                    image.set(x, y, c, 255);
                }
            }
        }
    }
    Ok(FisheyeTruth { image, center: FisheyeCenter::new(cx, cy), rays_deg: rays_deg.to_vec() })
}

/// Standing people seen from above: each spine lies on a ray through the
/// center, hip first, shoulder further out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineSpec {
    pub n_lines: usize,
    /// Hip distance from the center, `[lo, hi)` pixels.
    pub hip_radius: (f64, f64),
    /// Hip-to-shoulder length, `[lo, hi)` pixels.
    pub length: (f64, f64),
    /// Standard deviation of Gaussian noise added to every keypoint coordinate.
    pub jitter_sigma: f64,
}

impl Default for SpineSpec {
    fn default() -> Self {
        Self { n_lines: 16, hip_radius: (10.0, 50.0), length: (40.0, 60.0), jitter_sigma: 0.5 }
    }
}

/// Keypoints of `spec.n_lines` people in frame `frame`, at random bearings.
pub fn gen_spines<R: Rng + ?Sized>(
    spec: &SpineSpec,
    center: (f64, f64),
    frame: i64,
    rng: &mut R,
) -> Result<Vec<KeypointRecord>> {
    let (h0, h1) = spec.hip_radius;
    let (l0, l1) = spec.length;
    if !(0.0 <= h0 && h0 < h1 && 0.0 < l0 && l0 < l1) {
        return Err(domain("spine radius and length ranges must be non-empty and non-negative"));
    }
    let jitter = Normal::new(0.0, spec.jitter_sigma).map_err(|_| domain("jitter sigma must be finite and >= 0"))?;
    let (cx, cy) = center;
    Ok((0..spec.n_lines)
        .map(|_| {
            let (dx, dy) = ray_direction(rng.random_range(0.0..360.0));
            let hip = rng.random_range(h0..h1);
            let shoulder = hip + rng.random_range(l0..l1);
            let mut point = |r: f64| [cx + r * dx + jitter.sample(rng), cy + r * dy + jitter.sample(rng)];
            let mid_hip = point(hip);
            let mid_shoulder = point(shoulder);
            KeypointRecord { frame, mid_shoulder, mid_hip }
        })
        .collect())
}
