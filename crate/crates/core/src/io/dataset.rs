use std::path::{Path, PathBuf};

use super::{read_boxes_file, read_json, write_json, BoxesRecord, ManifestEntry, RawTensor, SampleTruth};
use crate::error::{domain, Error, Result};
use crate::miml::{BagLabel, TrainSample};
use crate::regionmask::{boxes_from_records, clip_mask, downsample_mask};
use crate::Real;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";

fn relative(dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Loads every clip of a manifest. Paths are relative to the manifest's
/// directory. Boxes become a clip mask at the entry's `frame_size` (or
/// `default_frame_size`), resized to the feature grid.
pub fn load_dataset<T: Real>(manifest: impl AsRef<Path>, default_frame_size: Option<[usize; 2]>) -> Result<Vec<TrainSample<T>>> {
    let manifest = manifest.as_ref();
    let entries: Vec<ManifestEntry> = read_json(manifest).map_err(|e| with_path(manifest, e))?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let n_classes = entries.first().map(|e| e.labels.len());
    entries
        .iter()
        .map(|entry| {
            if Some(entry.labels.len()) != n_classes {
                return Err(domain(format!("{}: clips disagree on the class count", manifest.display())));
            }
            let fpath = relative(dir, &entry.features);
            let features = RawTensor::load(&fpath)
                .and_then(|t| t.to_feature_map::<T>())
                .map_err(|e| with_path(&fpath, e))?;
            let mask = match &entry.boxes {
                None => None,
                Some(b) => {
                    let bpath = relative(dir, b);
                    let records = read_boxes_file(&bpath).map_err(|e| with_path(&bpath, e))?;
                    let [fw, fh] = entry.frame_size.or(default_frame_size).ok_or_else(|| {
                        domain(format!("{}: no frame size given for its boxes", bpath.display()))
                    })?;
                    let full = clip_mask(&boxes_from_records(&records)?, fw, fh)?;
                    Some(downsample_mask(&full, features.width(), features.height())?)
                }
            };
            TrainSample::new(features, mask, BagLabel::from_01(&entry.labels)?)
        })
        .collect()
}

/// Writes `features/clip_NNNNN.otsr`, optional `boxes/clip_NNNNN.json`,
/// optional `truth.json` and the manifest into `dir`.
pub fn save_dataset<T: Real>(
    dir: impl AsRef<Path>,
    samples: &[TrainSample<T>],
    boxes: Option<&[Vec<BoxesRecord>]>,
    frame_size: Option<[usize; 2]>,
    truth: Option<&[SampleTruth]>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if boxes.is_some_and(|b| b.len() != samples.len()) {
        return Err(domain("one boxes list per clip is required"));
    }
    std::fs::create_dir_all(dir.join("features"))?;
    if boxes.is_some() {
        std::fs::create_dir_all(dir.join("boxes"))?;
    }
    let mut entries = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let features = format!("features/clip_{i:05}.otsr");
        RawTensor::from_feature_map(&s.features).save(dir.join(&features))?;
        let boxes_path = match boxes {
            Some(b) => {
                let p = format!("boxes/clip_{i:05}.json");
                write_json(dir.join(&p), &b[i])?;
                Some(p)
            }
            None => None,
        };
        entries.push(ManifestEntry {
            features,
            frame_size: boxes_path.as_ref().and(frame_size),
            boxes: boxes_path,
            labels: s.label.to_01(),
        });
    }
    if let Some(t) = truth {
        write_json(dir.join(TRUTH_FILE), t)?;
    }
    let manifest = dir.join(MANIFEST_FILE);
    write_json(&manifest, &entries)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_miml_dataset, SynthSpec};

    #[test]
    fn synthetic_split_round_trips_through_disk() {
        let spec = SynthSpec { n_samples: 6, n_test: 0, ..Default::default() };
        let ds = gen_miml_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(
            dir.path(),
            &ds.train.samples,
            Some(&ds.train.boxes),
            Some(spec.frame_size()),
            Some(&ds.train.truth),
        )
        .unwrap();
        let back: Vec<TrainSample<f64>> = load_dataset(&manifest, None).unwrap();
        assert_eq!(back.len(), 6);
        for (a, b) in back.iter().zip(&ds.train.samples) {
            assert_eq!(a.mask, b.mask);
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.values().iter().zip(b.features.values()) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
        let truth: Vec<SampleTruth> = read_json(dir.path().join(TRUTH_FILE)).unwrap();
        assert_eq!(truth, ds.train.truth);
    }

    #[test]
    fn missing_files_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join(MANIFEST_FILE);
        std::fs::write(&m, r#"[{"features": "nope.otsr", "boxes": null, "labels": [1]}]"#).unwrap();
        let err = load_dataset::<f64>(&m, None).unwrap_err().to_string();
        assert!(err.contains("nope.otsr"), "{err}");
    }
}
