//! Synthetic data with known ground truth.
//!
//! [`gen_miml_dataset`] plants actors into feature maps; [`gen_fisheye`] and
//! [`gen_spines`] draw top-view frames and person keypoints around a known
//! center.

mod dataset;
mod fisheye;

pub use dataset::{gen_miml_dataset, signatures, SynthDataset, SynthSpec, SynthSplit};
pub use fisheye::{gen_fisheye, gen_spines, ray_direction, FisheyeTruth, SpineSpec};
