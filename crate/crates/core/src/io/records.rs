use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One detected person in the keypoints file: `{frame, mid_shoulder, mid_hip}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointRecord {
    pub frame: i64,
    pub mid_shoulder: [f64; 2],
    pub mid_hip: [f64; 2],
}

/// Person boxes of one frame: `{frame, boxes: [[x0,y0,x1,y1], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxesRecord {
    pub frame: i64,
    pub boxes: Vec<[i64; 4]>,
}

/// One clip of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub features: String,
    pub boxes: Option<String>,
    pub labels: Vec<u8>,
    /// Resolution the boxes are expressed in, `[width, height]`. Falls back
    /// to the configured frame size when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthPlacement {
    pub instance: usize,
    pub class: usize,
}

/// Planted actors of one synthetic clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTruth {
    pub sample: usize,
    pub block_width: usize,
    pub placements: Vec<TruthPlacement>,
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let f = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_keypoints_file(path: impl AsRef<Path>) -> Result<Vec<KeypointRecord>> {
    read_json(path)
}

pub fn read_boxes_file(path: impl AsRef<Path>) -> Result<Vec<BoxesRecord>> {
    read_json(path)
}
