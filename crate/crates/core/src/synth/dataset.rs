use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::io::{BoxesRecord, SampleTruth, TruthPlacement};
use crate::miml::{BagLabel, TrainSample};
use crate::regionmask::{boxes_from_records, clip_mask, downsample_mask};
use crate::tensor::{FeatureMap, Matrix};

/// Planted-actor dataset parameters.
///
/// The feature grid is `grid_h × grid_w` and is cut into `n_instances_max`
/// blocks of `grid_w / n_instances_max` columns. Each actor fills the full
/// width of one block over a span of rows and adds `signal_gain · u_c` there.
///
/// Two kinds of nuisance share the grid:
/// * idle people: free blocks, with probability `idle_prob`, hold a person
///   carrying `idle_ratio · signal_gain` of one *unlabeled* class; all idle
///   people of a clip share that class. They are inside the person mask.
/// * clutter: with probability `clutter_prob`, the cells of a block that no
///   person covers receive `clutter_ratio · signal_gain` of an unlabeled
///   class. Clutter is always outside the person mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Training clips.
    pub n_samples: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub n_instances_max: usize,
    pub feat_dim: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub noise_sigma: f64,
    pub signal_gain: f64,
    pub max_concurrent_actions: usize,
    /// Mean actor count per clip, before clamping to the feasible range.
    pub mean_concurrent_actions: f64,
    pub idle_prob: f64,
    pub idle_ratio: f64,
    pub clutter_prob: f64,
    pub clutter_ratio: f64,
    /// Frame pixels per feature cell, for the person boxes.
    pub frame_scale: usize,
    /// Frames of person boxes per clip.
    pub n_frames: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_samples: 512,
            n_test: 128,
            n_classes: 6,
            n_instances_max: 5,
            feat_dim: 64,
            grid_h: 8,
            grid_w: 40,
            noise_sigma: 0.3,
            signal_gain: 1.0,
            max_concurrent_actions: 7,
            mean_concurrent_actions: 4.0,
            idle_prob: 1.0,
            idle_ratio: 0.45,
            clutter_prob: 0.5,
            clutter_ratio: 0.0,
            frame_scale: 4,
            n_frames: 16,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.feat_dim == 0 || self.grid_h == 0 || self.n_instances_max == 0 {
            return Err(domain("classes, feature dim, grid height and instance count must be >= 1"));
        }
        if self.grid_w == 0 || !self.grid_w.is_multiple_of(self.n_instances_max) {
            return Err(domain(format!(
                "grid width {} must be a positive multiple of the instance count {}",
                self.grid_w, self.n_instances_max
            )));
        }
        let probs = [self.idle_prob, self.clutter_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(domain("probabilities must lie in [0, 1]"));
        }
        let nonneg = [self.noise_sigma, self.signal_gain, self.idle_ratio, self.clutter_ratio];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain("noise, gain and ratios must be finite and >= 0"));
        }
        if !(self.mean_concurrent_actions >= 1.0) {
            return Err(domain("mean concurrent actions must be >= 1"));
        }
        if self.frame_scale == 0 || self.n_frames == 0 {
            return Err(domain("frame scale and frame count must be >= 1"));
        }
        Ok(())
    }

    pub fn block_width(&self) -> usize {
        self.grid_w / self.n_instances_max
    }

    /// Largest actor count a clip can hold.
    pub fn action_limit(&self) -> usize {
        self.max_concurrent_actions.min(self.n_classes).min(self.n_instances_max)
    }

    pub fn frame_size(&self) -> [usize; 2] {
        [self.grid_w * self.frame_scale, self.grid_h * self.frame_scale]
    }
}

/// Clips of one split with their person boxes and planted truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub samples: Vec<TrainSample<f64>>,
    pub truth: Vec<SampleTruth>,
    pub boxes: Vec<Vec<BoxesRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    /// Unit class signatures, `C × D`.
    pub signatures: Matrix<f64>,
    pub train: SynthSplit,
    pub test: SynthSplit,
}

/// `C` unit vectors in `R^D`, mutually orthogonal when `D ≥ C`
/// (Gram-Schmidt over Gaussian draws).
pub fn signatures<R: Rng + ?Sized>(n_classes: usize, dim: usize, rng: &mut R) -> Matrix<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    while rows.len() < n_classes {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if dim >= n_classes {
            for u in &rows {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= dot * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a draw nearly inside the current span is redrawn
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix::from_vec(n_classes, dim, rows.concat()).expect("sized buffer")
}

/// Person occupying feature cells `[c0, c1) × [r0, r1)`.
#[derive(Debug, Clone, Copy)]
struct Person {
    c0: usize,
    c1: usize,
    r0: usize,
    r1: usize,
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    sig: &'a Matrix<f64>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn person(&mut self, block: usize) -> Person {
        let h = self.spec.grid_h;
        let min_h = (3 * h).div_ceil(4).max(1);
        let height = self.rng.random_range(min_h..=h);
        let r0 = self.rng.random_range(0..=h - height);
        let k = self.spec.block_width();
        Person { c0: block * k, c1: (block + 1) * k, r0, r1: r0 + height }
    }

    fn add(f: &mut FeatureMap<f64>, sig: &[f64], gain: f64, cells: impl Iterator<Item = (usize, usize)> + Clone) {
        for (d, &u) in sig.iter().enumerate() {
            for (r, c) in cells.clone() {
                let v = f.get(d, r, c) + gain * u;
                f.set(d, r, c, v);
            }
        }
    }

    fn pick_unlabeled(&mut self, labeled: &[bool]) -> Option<usize> {
        let free: Vec<usize> = (0..labeled.len()).filter(|&c| !labeled[c]).collect();
        free.choose(&mut self.rng).copied()
    }

    fn sample(&mut self, global_index: usize, local_index: usize) -> Result<(TrainSample<f64>, SampleTruth, Vec<BoxesRecord>)> {
        let spec = self.spec;
        let (c_n, n_blocks, h) = (spec.n_classes, spec.n_instances_max, spec.grid_h);
        let gain = spec.signal_gain;
        let mut f = FeatureMap::zeros(spec.feat_dim, h, spec.grid_w);
        let mut labeled = vec![false; c_n];
        let mut placements = Vec::new();
        let mut persons = Vec::new();

        if gain > 0.0 {
            let limit = spec.action_limit();
            let n_act = if limit <= 1 {
                limit
            } else {
                let p = ((spec.mean_concurrent_actions - 1.0) / (limit - 1) as f64).clamp(0.0, 1.0);
                1 + Binomial::new((limit - 1) as u64, p).expect("valid binomial").sample(&mut self.rng) as usize
            };
            // the first class cycles so every class appears once n ≥ C
            let first = global_index % c_n;
            let mut rest: Vec<usize> = (0..c_n).filter(|&c| c != first).collect();
            rest.shuffle(&mut self.rng);
            let classes: Vec<usize> = std::iter::once(first).chain(rest).take(n_act).collect();
            let blocks = index::sample(&mut self.rng, n_blocks, n_act).into_vec();
            let mut occupied = vec![false; n_blocks];
            for (&class, &block) in classes.iter().zip(&blocks) {
                let p = self.person(block);
                Self::add(&mut f, self.sig.row(class), gain, cells(p));
                labeled[class] = true;
                occupied[block] = true;
                placements.push(TruthPlacement { instance: block, class });
                persons.push(p);
            }
            placements.sort_by_key(|p| p.instance);

            let idle_class = self.pick_unlabeled(&labeled);
            for block in 0..n_blocks {
                if !occupied[block] && self.rng.random_bool(spec.idle_prob) {
                    let p = self.person(block);
                    if let (Some(c), true) = (idle_class, spec.idle_ratio > 0.0) {
                        Self::add(&mut f, self.sig.row(c), gain * spec.idle_ratio, cells(p));
                    }
                    persons.push(p);
                }
            }

            if spec.clutter_ratio > 0.0 {
                let k = spec.block_width();
                for block in 0..n_blocks {
                    if !self.rng.random_bool(spec.clutter_prob) {
                        continue;
                    }
                    let Some(c) = self.pick_unlabeled(&labeled) else { continue };
                    let span = block * k..(block + 1) * k;
                    let covered = |r: usize, col: usize| {
                        persons.iter().any(|p| (p.r0..p.r1).contains(&r) && (p.c0..p.c1).contains(&col))
                    };
                    let free: Vec<(usize, usize)> = (0..h)
                        .flat_map(|r| span.clone().map(move |col| (r, col)))
                        .filter(|&(r, col)| !covered(r, col))
                        .collect();
                    Self::add(&mut f, self.sig.row(c), gain * spec.clutter_ratio, free.into_iter());
                }
            }
        }

        if spec.noise_sigma > 0.0 {
            let noise = Normal::new(0.0, spec.noise_sigma).expect("finite sigma");
            for v in f.values_mut() {
                *v += noise.sample(&mut self.rng);
            }
        }

        let boxes = self.boxes(&persons);
        let [fw, fh] = spec.frame_size();
        let mask = downsample_mask(&clip_mask(&boxes_from_records(&boxes)?, fw, fh)?, spec.grid_w, h)?;
        let truth = SampleTruth { sample: local_index, block_width: spec.block_width(), placements };
        Ok((TrainSample::new(f, Some(mask), BagLabel(labeled))?, truth, boxes))
    }

    /// Per-frame boxes whose edges wander inside the person's border cells,
    /// so the clip union always covers exactly the person's cells.
    fn boxes(&mut self, persons: &[Person]) -> Vec<BoxesRecord> {
        let s = self.spec.frame_scale;
        (0..self.spec.n_frames)
            .map(|frame| {
                let boxes = persons
                    .iter()
                    .map(|p| {
                        let mut j = || self.rng.random_range(0..s) as i64;
                        let s = s as i64;
                        [
                            p.c0 as i64 * s + j(),
                            p.r0 as i64 * s + j(),
                            p.c1 as i64 * s - j(),
                            p.r1 as i64 * s - j(),
                        ]
                    })
                    .collect();
                BoxesRecord { frame: frame as i64, boxes }
            })
            .collect()
    }
}

fn cells(p: Person) -> impl Iterator<Item = (usize, usize)> + Clone {
    (p.r0..p.r1).flat_map(move |r| (p.c0..p.c1).map(move |c| (r, c)))
}

/// Generates the train and test splits. A single ChaCha8 stream seeded with
/// `spec.seed` draws the signatures, then every training clip, then every
/// test clip, in that order.
pub fn gen_miml_dataset(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sig = signatures(spec.n_classes, spec.feat_dim, &mut rng);
    let mut g = Generator { spec, sig: &sig, rng };
    let mut split = |offset: usize, n: usize| -> Result<SynthSplit> {
        let mut out = SynthSplit { samples: Vec::with_capacity(n), truth: Vec::with_capacity(n), boxes: Vec::with_capacity(n) };
        for i in 0..n {
            let (s, t, b) = g.sample(offset + i, i)?;
            out.samples.push(s);
            out.truth.push(t);
            out.boxes.push(b);
        }
        Ok(out)
    };
    let train = split(0, spec.n_samples)?;
    let test = split(spec.n_samples, spec.n_test)?;
    Ok(SynthDataset { signatures: sig, train, test })
}
