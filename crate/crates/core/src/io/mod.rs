//! On-disk formats: the `OTSR` binary tensor container, JSON records
//! (keypoints, boxes, dataset manifests, planted truth) and saved heads.

mod dataset;
mod model;
mod records;
mod tensor_file;

pub use dataset::{load_dataset, save_dataset, MANIFEST_FILE, TRUTH_FILE};
pub use model::{head_from_tensor, head_to_tensor, load_model, save_model, ModelCard};
pub use records::{
    read_boxes_file, read_json, read_keypoints_file, write_json, BoxesRecord, KeypointRecord,
    ManifestEntry, SampleTruth, TruthPlacement,
};
pub use tensor_file::{RawTensor, TENSOR_MAGIC, TENSOR_VERSION};
