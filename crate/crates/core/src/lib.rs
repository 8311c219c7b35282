//! Calibration-free unwrapping of top-view fisheye video into panoramas, and
//! a weakly-supervised multi-instance multi-label (MIML) action head that
//! learns from clip-level labels only.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`). Type aliases
//! at the crate root pin the common `f64` instantiations.
//!
//! Pipeline at a glance:
//!
//! 1. [`geometry`]: spine lines → center → mapping table → panorama.
//! 2. [`regionmask`]: person boxes → clip mask → masked feature map.
//! 3. [`miml`]: instance split → shared fc → aggregation → losses → SGD.
//! 4. [`localize`]: Grad-CAM heatmaps through the trained head.
//! 5. [`eval`]: average precision, mAP and localization hit rate.
//!
//! [`synth`] generates fisheye frames and planted-actor feature datasets for
//! testing all of the above without recorded footage.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod io;
pub mod localize;
pub mod miml;
pub mod regionmask;
pub mod scalar;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FeatureMapF64 = tensor::FeatureMap<f64>;
pub type FeatureMapF32 = tensor::FeatureMap<f32>;
pub type MimlHeadF64 = miml::MimlHead<f64>;
pub type MimlHeadF32 = miml::MimlHead<f32>;
pub type InstanceBatchF64 = miml::InstanceBatch<f64>;
pub type HyperparamsF64 = miml::Hyperparams<f64>;
pub type TrainSampleF64 = miml::TrainSample<f64>;
pub type SpineLineF64 = geometry::SpineLine<f64>;
pub type FisheyeCenterF64 = geometry::FisheyeCenter<f64>;
pub type MappingParamsF64 = geometry::MappingParams<f64>;
pub type HeatmapF64 = localize::Heatmap<f64>;
