//! Ranking metrics for bag-level predictions and a localization hit rate.
//!
//! Average precision here is the information-retrieval definition: the mean
//! of precision@rank taken at each positive, with scores sorted descending
//! and ties kept in input order. No 11-point interpolation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use num_traits::Num;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::io::SampleTruth;
use crate::localize::Heatmap;
use crate::miml::{predict, Hyperparams, MimlHead, TrainSample};
use crate::Real;

/// AP of one class. Generic over the output field so exact rationals can
/// be used as well as floats.
pub fn average_precision<S, T>(scores: &[S], labels: &[bool]) -> Result<T>
where
    S: PartialOrd + Copy,
    T: Num + Copy,
{
    if scores.len() != labels.len() {
        return Err(domain(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.partial_cmp(s).is_none()) {
        return Err(domain("scores must be comparable (no NaN)"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable: equal scores keep their input order
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("checked comparable"));

    let (mut rank, mut hits, mut n_pos) = (T::zero(), T::zero(), T::zero());
    let mut sum = T::zero();
    let mut any = false;
    for idx in order {
        rank = rank + T::one();
        if labels[idx] {
            any = true;
            hits = hits + T::one();
            n_pos = n_pos + T::one();
            sum = sum + hits / rank;
        }
    }
    if !any {
        return Err(Error::UndefinedClass(0));
    }
    Ok(sum / n_pos)
}

/// Mean over the classes whose AP is defined.
pub fn mean_ap<T: Real>(per_class: &[Option<T>]) -> Result<T> {
    let defined: Vec<T> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(domain("no class has a defined average precision"));
    }
    Ok(defined.iter().copied().sum::<T>() / T::from_usize_lossy(defined.len()))
}

/// Per-class AP from a `samples × classes` score table; `None` for classes
/// without positives.
pub fn per_class_ap(scores: &[Vec<f64>], labels: &[&[bool]]) -> Result<Vec<Option<f64>>> {
    if scores.len() != labels.len() {
        return Err(domain(format!("{} score rows for {} label rows", scores.len(), labels.len())));
    }
    let n_classes = labels.first().map_or(0, |l| l.len());
    if scores.iter().any(|s| s.len() != n_classes) || labels.iter().any(|l| l.len() != n_classes) {
        return Err(domain("ragged score or label table"));
    }
    (0..n_classes)
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
            let l: Vec<bool> = labels.iter().map(|row| row[c]).collect();
            match average_precision::<f64, f64>(&s, &l) {
                Ok(ap) => Ok(Some(ap)),
                Err(Error::UndefinedClass(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

pub fn mean_ap_from_scores(scores: &[Vec<f64>], labels: &[&[bool]]) -> Result<f64> {
    mean_ap(&per_class_ap(scores, labels)?)
}

/// Bag probabilities `p^a` for every sample, in input order.
pub fn bag_probabilities<T: Real>(
    samples: &[TrainSample<T>],
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
) -> Result<Vec<Vec<f64>>> {
    samples
        .par_iter()
        .map(|s| Ok(predict(s, head, hp)?.scores.bag_probs.iter().map(|p| p.to_f64_lossy()).collect()))
        .collect()
}

/// mAP of `head` over a labelled set.
pub fn dataset_map<T: Real>(samples: &[TrainSample<T>], head: &MimlHead<T>, hp: &Hyperparams<T>) -> Result<f64> {
    let probs = bag_probabilities(samples, head, hp)?;
    let labels: Vec<&[bool]> = samples.iter().map(|s| s.label.0.as_slice()).collect();
    mean_ap_from_scores(&probs, &labels)
}

/// One row of a prediction file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub sample_id: usize,
    pub class: usize,
    pub score: f64,
    pub label: bool,
}

pub const PREDICTION_HEADER: &str = "sample_id,class,score,label";

pub fn write_predictions(records: &[PredictionRecord]) -> String {
    let mut out = String::from(PREDICTION_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{:e},{}", r.sample_id, r.class, r.score, r.label as u8);
    }
    out
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("sample_id")) {
            continue;
        }
        let bad = || Error::Format(format!("prediction line {}: {line:?}", lineno + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let [sid, class, score, label] = f.as_slice() else {
            return Err(bad());
        };
        out.push(PredictionRecord {
            sample_id: sid.parse().map_err(|_| bad())?,
            class: class.parse().map_err(|_| bad())?,
            score: score.parse().map_err(|_| bad())?,
            label: match *label {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            },
        });
    }
    Ok(out)
}

/// Per-class AP from prediction records. Classes are indexed `0..=max_class`;
/// each class must carry one score per sample.
pub fn ap_from_predictions(records: &[PredictionRecord]) -> Result<Vec<Option<f64>>> {
    let mut by_class: BTreeMap<usize, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_class.entry(r.class).or_default().push(r);
    }
    let n_classes = by_class.keys().next_back().map_or(0, |&c| c + 1);
    (0..n_classes)
        .map(|c| {
            let mut rows = by_class.get(&c).cloned().unwrap_or_default();
            rows.sort_by_key(|r| r.sample_id);
            if rows.windows(2).any(|w| w[0].sample_id == w[1].sample_id) {
                return Err(domain(format!("class {c} has duplicate sample ids")));
            }
            let s: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let l: Vec<bool> = rows.iter().map(|r| r.label).collect();
            match average_precision::<f64, f64>(&s, &l) {
                Ok(ap) => Ok(Some(ap)),
                Err(Error::UndefinedClass(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// CSV with one `class,ap` row per class (empty AP for undefined classes)
/// followed by a `mAP` row.
pub fn write_ap_table(per_class: &[Option<f64>], class_names: Option<&[String]>) -> Result<String> {
    let mut out = String::from("class,ap\n");
    for (c, ap) in per_class.iter().enumerate() {
        let name = class_names.and_then(|n| n.get(c)).cloned().unwrap_or_else(|| c.to_string());
        match ap {
            Some(v) => writeln!(out, "{name},{v:.6}"),
            None => writeln!(out, "{name},"),
        }
        .expect("writing to a String");
    }
    writeln!(out, "mAP,{:.6}", mean_ap(per_class)?).expect("writing to a String");
    Ok(out)
}

/// A class heatmap for one sample.
#[derive(Debug, Clone)]
pub struct ClassHeatmap<T> {
    pub sample: usize,
    pub class: usize,
    pub heatmap: Heatmap<T>,
}

/// Fraction of planted actions whose class heatmap peaks inside a block
/// where that class was planted.
///
/// Only `(sample, class)` pairs that have both a heatmap and a planted
/// placement count. When a class is planted in several blocks of a sample,
/// a peak in any of them is a hit.
pub fn localization_hit_rate<T: Real>(heatmaps: &[ClassHeatmap<T>], truth: &[SampleTruth]) -> Result<f64> {
    let by_sample: BTreeMap<usize, &SampleTruth> = truth.iter().map(|t| (t.sample, t)).collect();
    let (mut hits, mut total) = (0usize, 0usize);
    for hm in heatmaps {
        let Some(t) = by_sample.get(&hm.sample) else {
            continue;
        };
        let spans: Vec<(usize, usize)> = t
            .placements
            .iter()
            .filter(|p| p.class == hm.class)
            .map(|p| (p.instance * t.block_width, (p.instance + 1) * t.block_width))
            .collect();
        if spans.is_empty() {
            continue;
        }
        total += 1;
        let (_, col) = hm.heatmap.argmax();
        if spans.iter().any(|&(lo, hi)| col >= lo && col < hi) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(domain("no heatmap corresponds to a planted action"));
    }
    Ok(hits as f64 / total as f64)
}
