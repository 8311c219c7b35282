use crate::error::{Error, Result};
use crate::Real;

/// A line `a·x + b·y + c = 0` with `a² + b² = 1`.
///
/// The sign is fixed so that `a > 0`, or `a == 0` and `b > 0`, making the
/// representation unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpineLine<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> SpineLine<T> {
    /// Spine through a person's mid-shoulder and mid-hip keypoints.
    pub fn from_keypoints(mid_shoulder: (T, T), mid_hip: (T, T)) -> Result<Self> {
        let (dx, dy) = (mid_hip.0 - mid_shoulder.0, mid_hip.1 - mid_shoulder.1);
        let len = dx.hypot(dy);
        if !(len > T::lit(1e-6)) {
            return Err(Error::Degenerate(format!(
                "keypoints ({}, {}) and ({}, {}) coincide",
                mid_shoulder.0, mid_shoulder.1, mid_hip.0, mid_hip.1
            )));
        }
        Ok(Self::from_normal(-dy / len, dx / len, mid_shoulder))
    }

    /// Line with unit normal `(a, b)` through `point`.
    pub fn from_normal(a: T, b: T, point: (T, T)) -> Self {
        let (a, b) = if a > T::zero() || (a == T::zero() && b > T::zero()) {
            (a, b)
        } else {
            (-a, -b)
        };
        // avoid negative zero so axis-aligned lines compare equal to literals
        let a = a + T::zero();
        let b = b + T::zero();
        let c = -(a * point.0 + b * point.1) + T::zero();
        Self { a, b, c }
    }

    pub fn signed_distance(&self, x: T, y: T) -> T {
        self.a * x + self.b * y + self.c
    }

    pub fn distance(&self, x: T, y: T) -> T {
        self.signed_distance(x, y).abs()
    }

    /// Intersection with `other`, or `None` when (nearly) parallel.
    pub fn intersect(&self, other: &Self) -> Option<(T, T)> {
        let det = self.a * other.b - self.b * other.a;
        if det.abs() <= T::epsilon() * T::lit(16.0) {
            return None;
        }
        let x = (self.b * other.c - other.b * self.c) / det;
        let y = (other.a * self.c - self.a * other.c) / det;
        Some((x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_lines() {
        let v = SpineLine::from_keypoints((0.0f64, 0.0), (0.0, 10.0)).unwrap();
        assert_eq!((v.a, v.b, v.c), (1.0, 0.0, 0.0));
        let h = SpineLine::from_keypoints((0.0f64, 0.0), (10.0, 0.0)).unwrap();
        assert_eq!((h.a, h.b, h.c), (0.0, 1.0, 0.0));
        // orientation of the keypoints does not matter
        let h2 = SpineLine::from_keypoints((10.0f64, 0.0), (0.0, 0.0)).unwrap();
        assert_eq!(h, h2);
    }

    #[test]
    fn passes_through_both_keypoints() {
        let l = SpineLine::from_keypoints((1.0f64, 1.0), (3.0, 5.0)).unwrap();
        assert!((l.a * l.a + l.b * l.b - 1.0).abs() < 1e-9);
        assert!(l.signed_distance(1.0, 1.0).abs() < 1e-9);
        assert!(l.signed_distance(3.0, 5.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_keypoints_rejected() {
        let err = SpineLine::from_keypoints((2.0f64, 2.0), (2.0, 2.0 + 1e-9)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn intersection_of_perpendicular_lines() {
        let a = SpineLine::from_keypoints((5.0f64, 0.0), (5.0, 1.0)).unwrap();
        let b = SpineLine::from_keypoints((0.0f64, 7.0), (1.0, 7.0)).unwrap();
        assert_eq!(a.intersect(&b), Some((5.0, 7.0)));
        assert_eq!(a.intersect(&a), None);
    }
}
