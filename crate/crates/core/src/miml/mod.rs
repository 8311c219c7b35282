//! Multi-instance multi-label head.
//!
//! A (masked) feature map is cut into width-`k` column blocks; each block is
//! average-pooled into one instance feature and scored by a single shared
//! fully-connected layer. Instance scores are aggregated per class into a
//! bag score, trained against clip-level labels with binary cross-entropy
//! plus a sparsity penalty that discourages one instance from claiming
//! several classes.

mod aggregate;
mod forward;
mod head;
mod instances;
mod loss;
mod train;

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, aggregate_with_weights, AggregateOutput};
pub use forward::{
    backward, forward, loss_gradients, loss_input_gradients, predict, total_loss, Forward,
    LossParts, Prediction, Scores,
};
pub use head::{HeadGradients, MimlHead};
pub use instances::{pool_backward, pool_features, split_instances, InstanceBatch, Pooled};
pub use loss::{bce_loss, bce_loss_probs, bce_score_gradient, sparsity_reg, sparsity_reg_gradient};
pub use train::{train, train_from, EpochMetrics, TrainOutcome};
pub(crate) use forward::input_gradient;

use crate::error::{domain, mismatch, Result};
use crate::regionmask::{apply_mask, BinaryMask};
use crate::tensor::FeatureMap;
use crate::Real;

/// How instance scores are combined into one bag score per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Avg,
    Max,
    /// Smooth maximum `(1/r) log((1/N) Σ exp(r s_i))`.
    #[default]
    Lse,
    /// Softmax over per-instance scalar logits from a learned `D → 1` layer.
    Attention,
}

impl Aggregator {
    pub const ALL: [Aggregator; 4] = [Self::Avg, Self::Max, Self::Lse, Self::Attention];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Avg => "avg",
            Self::Max => "max",
            Self::Lse => "lse",
            Self::Attention => "attention",
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown aggregator {s:?} (avg|max|lse|attention)"))
    }
}

/// How the feature map becomes instance features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Width-`k` column blocks, each average pooled (the MIML setting).
    #[default]
    Instances,
    /// Whole-map average pool into a single instance (baseline).
    GlobalAvg,
    /// Whole-map per-channel max pool into a single instance (baseline).
    GlobalMax,
}

impl Pooling {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Instances => "instances",
            Self::GlobalAvg => "global-avg",
            Self::GlobalMax => "global-max",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [Self::Instances, Self::GlobalAvg, Self::GlobalMax]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown pooling {s:?} (instances|global-avg|global-max)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Hyperparams<T> {
    /// Instance (block) width in feature-map columns.
    pub k: usize,
    pub lse_sharpness: T,
    /// Weight of the sparsity regularizer.
    pub reg_weight: T,
    pub lr: T,
    pub momentum: T,
    pub batch_size: usize,
    pub epochs: usize,
    /// The learning rate halves every this many epochs.
    pub lr_halve_every: usize,
    pub aggregator: Aggregator,
    pub pooling: Pooling,
    /// Multiply features by the clip mask before pooling.
    pub use_mask: bool,
}

impl<T: Real> Default for Hyperparams<T> {
    fn default() -> Self {
        Self {
            k: 8,
            lse_sharpness: T::lit(0.8),
            reg_weight: T::lit(0.001),
            lr: T::lit(0.01),
            momentum: T::lit(0.9),
            batch_size: 32,
            epochs: 50,
            lr_halve_every: 10,
            aggregator: Aggregator::Lse,
            pooling: Pooling::Instances,
            use_mask: true,
        }
    }
}

impl<T: Real> Hyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(domain("instance width k must be >= 1"));
        }
        if !(self.lse_sharpness > T::zero() && self.lse_sharpness.is_finite()) {
            return Err(domain(format!("lse sharpness must be > 0, got {}", self.lse_sharpness)));
        }
        if !(self.reg_weight >= T::zero() && self.reg_weight.is_finite()) {
            return Err(domain(format!("reg weight must be >= 0, got {}", self.reg_weight)));
        }
        if !(self.lr >= T::zero() && self.lr.is_finite()) {
            return Err(domain(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if !(self.momentum >= T::zero() && self.momentum < T::one()) {
            return Err(domain(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 || self.lr_halve_every == 0 {
            return Err(domain("batch size and lr_halve_every must be >= 1"));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> T {
        let halvings = (epoch / self.lr_halve_every) as i32;
        self.lr * T::lit(0.5).powi(halvings)
    }
}

/// Clip-level labels: `y[a]` is set iff action `a` occurs somewhere in the clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagLabel(pub Vec<bool>);

impl BagLabel {
    pub fn from_01(v: &[u8]) -> Result<Self> {
        v.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(domain(format!("label value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BagLabel)
    }

    pub fn to_01(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_real<T: Real>(&self) -> Vec<T> {
        self.0.iter().map(|&b| if b { T::one() } else { T::zero() }).collect()
    }
}

/// One clip: raw feature map, its feature-resolution person mask (if any)
/// and the bag label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample<T> {
    pub features: FeatureMap<T>,
    pub mask: Option<BinaryMask>,
    pub label: BagLabel,
}

impl<T: Real> TrainSample<T> {
    pub fn new(features: FeatureMap<T>, mask: Option<BinaryMask>, label: BagLabel) -> Result<Self> {
        if let Some(m) = &mask {
            if m.width() != features.width() || m.height() != features.height() {
                return Err(mismatch(format!(
                    "mask {}x{} does not match feature map {}x{}",
                    m.width(),
                    m.height(),
                    features.width(),
                    features.height()
                )));
            }
        }
        Ok(Self { features, mask, label })
    }

    /// The feature map the head sees: masked when `use_mask` and a mask exists.
    pub fn input(&self, use_mask: bool) -> Result<FeatureMap<T>> {
        match (&self.mask, use_mask) {
            (Some(m), true) => apply_mask(&self.features, m),
            _ => Ok(self.features.clone()),
        }
    }

    pub fn effective_mask(&self, use_mask: bool) -> Option<&BinaryMask> {
        self.mask.as_ref().filter(|_| use_mask)
    }
}
