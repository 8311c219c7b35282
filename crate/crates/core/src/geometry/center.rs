use serde::{Deserialize, Serialize};

use super::SpineLine;
use crate::error::{domain, Error, Result};
use crate::Real;

/// Image point where all world-vertical lines meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisheyeCenter<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> FisheyeCenter<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

const IRLS_MAX_ITERS: usize = 100;
const IRLS_STEP_TOL: f64 = 1e-4;
const IRLS_EPS: f64 = 1e-6;
/// Above this many lines the O(K³) vertex scan is skipped.
const VERTEX_SCAN_MAX_LINES: usize = 256;

/// Sum of absolute point-to-line distances.
pub fn line_objective<T: Real>(lines: &[SpineLine<T>], x: T, y: T) -> T {
    lines.iter().map(|l| l.distance(x, y)).sum()
}

/// Point with the smallest total distance to all `lines`.
///
/// Iteratively reweighted least squares starting from the sum-of-squares
/// solution, followed by a scan of pairwise line intersections: the
/// objective is convex and piecewise linear, so its minimum sits on a vertex
/// of the line arrangement, which IRLS only approaches asymptotically.
pub fn estimate_center<T: Real>(lines: &[SpineLine<T>]) -> Result<FisheyeCenter<T>> {
    if lines.len() < 2 {
        return Err(Error::Underdetermined(format!(
            "need at least 2 spine lines, got {}",
            lines.len()
        )));
    }
    let ones = vec![T::one(); lines.len()];
    let (mut x, mut y) = weighted_solve(lines, &ones).ok_or_else(|| {
        Error::Underdetermined(format!("all {} spine lines are parallel", lines.len()))
    })?;

    let eps = T::lit(IRLS_EPS);
    let tol = T::lit(IRLS_STEP_TOL);
    let mut weights = ones;
    for _ in 0..IRLS_MAX_ITERS {
        for (w, l) in weights.iter_mut().zip(lines) {
            *w = T::one() / l.distance(x, y).max(eps);
        }
        let Some((nx, ny)) = weighted_solve(lines, &weights) else {
            break;
        };
        let step = (nx - x).hypot(ny - y);
        x = nx;
        y = ny;
        if step < tol {
            break;
        }
    }

    if lines.len() <= VERTEX_SCAN_MAX_LINES {
        let mut best = line_objective(lines, x, y);
        for (i, li) in lines.iter().enumerate() {
            for lj in &lines[i + 1..] {
                if let Some((vx, vy)) = li.intersect(lj) {
                    let obj = line_objective(lines, vx, vy);
                    if obj < best {
                        best = obj;
                        x = vx;
                        y = vy;
                    }
                }
            }
        }
    }

    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::Numeric("center estimate diverged".into()));
    }
    Ok(FisheyeCenter { x, y })
}

/// Minimizer of `Σ w_i (a_i x + b_i y + c_i)²`, `None` if singular.
fn weighted_solve<T: Real>(lines: &[SpineLine<T>], weights: &[T]) -> Option<(T, T)> {
    let (mut m00, mut m01, mut m11, mut r0, mut r1, mut wsum) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (l, &w) in lines.iter().zip(weights) {
        m00 += w * l.a * l.a;
        m01 += w * l.a * l.b;
        m11 += w * l.b * l.b;
        r0 -= w * l.a * l.c;
        r1 -= w * l.b * l.c;
        wsum += w;
    }
    let det = m00 * m11 - m01 * m01;
    // det ≤ (trace/2)² = (Σw/2)², so compare relative to Σw²
    if !(det > wsum * wsum * T::epsilon() * T::lit(64.0)) {
        return None;
    }
    Some(((m11 * r0 - m01 * r1) / det, (m00 * r1 - m01 * r0) / det))
}

/// Coordinate-wise mean of per-frame center estimates.
pub fn averaged_center<T: Real>(per_frame: &[FisheyeCenter<T>]) -> Result<FisheyeCenter<T>> {
    if per_frame.is_empty() {
        return Err(domain("cannot average an empty list of centers"));
    }
    let n = T::from_usize_lossy(per_frame.len());
    let x = per_frame.iter().map(|c| c.x).sum::<T>() / n;
    let y = per_frame.iter().map(|c| c.y).sum::<T>() / n;
    Ok(FisheyeCenter { x, y })
}

/// Distance from the center to the furthest frame corner, so every frame
/// pixel lies within the unwrap radius.
pub fn fisheye_radius<T: Real>(center: FisheyeCenter<T>, frame_w: usize, frame_h: usize) -> T {
    let (w, h) = (T::from_usize_lossy(frame_w), T::from_usize_lossy(frame_h));
    [(T::zero(), T::zero()), (w, T::zero()), (T::zero(), h), (w, h)]
        .into_iter()
        .map(|(cx, cy)| (center.x - cx).hypot(center.y - cy))
        .fold(T::zero(), T::max)
}
