//! Top-view fisheye → panorama unwrapping.
//!
//! World-vertical lines (approximated by people's spines) meet at a single
//! image point, the center. Once the center is known, each panorama column
//! is an angle around it and each row a radius, so the unwrap needs no
//! camera calibration.

mod center;
mod fov;
mod mapping;
mod remap;
mod spine;

pub use center::{averaged_center, estimate_center, fisheye_radius, line_objective, FisheyeCenter};
pub use fov::{panorama_dims, CameraFov, PanoramaSpec};
pub use mapping::{
    build_mapping, map_pixel, polar_of, FrameDims, MappedPoint, MappingParams, MappingTable,
    MAP_MAGIC, MAP_VERSION,
};
pub use remap::{remap, Interpolation};
pub use spine::SpineLine;
