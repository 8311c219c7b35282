use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::Real;

/// Field of view of the fisheye camera, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraFov<T> {
    pub hfov_deg: T,
    pub vfov_deg: T,
}

impl<T: Real> CameraFov<T> {
    pub fn new(hfov_deg: T, vfov_deg: T) -> Result<Self> {
        let fov = Self { hfov_deg, vfov_deg };
        fov.validate()?;
        Ok(fov)
    }

    pub fn validate(&self) -> Result<()> {
        let full = T::lit(360.0);
        for (name, v) in [("hfov", self.hfov_deg), ("vfov", self.vfov_deg)] {
            if !(v > T::zero() && v <= full) {
                return Err(domain(format!("{name} must lie in (0, 360] degrees, got {v}")));
            }
        }
        Ok(())
    }
}

/// Panorama size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PanoramaSpec {
    pub width_px: usize,
    pub height_px: usize,
}

impl PanoramaSpec {
    pub fn new(width_px: usize, height_px: usize) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(domain(format!("panorama must be at least 1x1, got {width_px}x{height_px}")));
        }
        Ok(Self { width_px, height_px })
    }

    pub fn len(&self) -> usize {
        self.width_px * self.height_px
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Panorama width from its height, keeping `h / w = vfov / (2 · hfov)`.
pub fn panorama_dims<T: Real>(fov: CameraFov<T>, height_px: usize) -> Result<PanoramaSpec> {
    fov.validate()?;
    if height_px == 0 {
        return Err(domain("panorama height must be >= 1"));
    }
    let w = T::from_usize_lossy(height_px) * T::lit(2.0) * fov.hfov_deg / fov.vfov_deg;
    let w = w.round().to_usize().unwrap_or(0);
    PanoramaSpec::new(w, height_px)
}
