use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{loss_backward, loss_parts, Forward};
use super::instances::pool_features;
use super::{Aggregator, Hyperparams, MimlHead, TrainSample};
use crate::error::{domain, mismatch, Error, Result};
use crate::eval::mean_ap_from_scores;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based epoch number.
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample BCE over the training set after the epoch.
    pub loss_bce: f64,
    pub loss_reg: f64,
    /// Training-set mAP after the epoch (NaN when no class has positives).
    pub train_map: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub head: MimlHead<T>,
    pub metrics: Vec<EpochMetrics>,
}

/// Trains a freshly initialized head with SGD + momentum.
///
/// All randomness (initialization, then one shuffle per epoch) comes from a
/// single ChaCha8 stream seeded with `seed`.
pub fn train<T: Real>(dataset: &[TrainSample<T>], hp: &Hyperparams<T>, seed: u64) -> Result<TrainOutcome<T>> {
    let first = dataset.first().ok_or_else(|| domain("training set is empty"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head = MimlHead::init(
        first.label.len(),
        first.features.channels(),
        hp.aggregator == Aggregator::Attention,
        &mut rng,
    );
    train_from(dataset, hp, head, &mut rng)
}

/// Trains starting from `head`.
///
/// Classic momentum: `v ← μ v − lr g`, `θ ← θ + v`, where `g` is the mean
/// gradient over the mini-batch. The final short batch of an epoch is kept.
pub fn train_from<T: Real, R: Rng + ?Sized>(
    dataset: &[TrainSample<T>],
    hp: &Hyperparams<T>,
    mut head: MimlHead<T>,
    rng: &mut R,
) -> Result<TrainOutcome<T>> {
    hp.validate()?;
    if dataset.is_empty() {
        return Err(domain("training set is empty"));
    }
    if (hp.aggregator == Aggregator::Attention) != head.attention.is_some() {
        return Err(mismatch("attention parameters must be present iff the aggregator is attention"));
    }
    let prepared = dataset
        .iter()
        .map(|s| {
            if s.label.len() != head.n_classes() {
                return Err(mismatch(format!(
                    "sample has {} labels, head has {} classes",
                    s.label.len(),
                    head.n_classes()
                )));
            }
            let input = s.input(hp.use_mask)?;
            Ok((pool_features(&input, hp.pooling, hp.k)?, input.shape()))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_params = head.num_params();
    let mut velocity = vec![T::zero(); n_params];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut metrics = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        let lr = hp.lr_at(epoch);
        order.shuffle(rng);
        for batch in order.chunks(hp.batch_size) {
            let mut grad = vec![T::zero(); n_params];
            for &idx in batch {
                let (pooled, shape) = &prepared[idx];
                let fwd = Forward::from_pooled(pooled.clone(), *shape, &head, hp)?;
                let (g, _) = loss_backward(&fwd, &dataset[idx], &head, hp);
                for (acc, v) in grad.iter_mut().zip(g.flat()) {
                    *acc += v;
                }
            }
            let scale = T::one() / T::from_usize_lossy(batch.len());
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = hp.momentum * *v - lr * *g * scale;
            }
            head.add_flat(&velocity);
        }
        if !head.is_finite() {
            return Err(Error::Numeric(format!("parameters became non-finite in epoch {}", epoch + 1)));
        }
        metrics.push(epoch_metrics(epoch, lr, &prepared, dataset, &head, hp)?);
    }
    Ok(TrainOutcome { head, metrics })
}

fn epoch_metrics<T: Real>(
    epoch: usize,
    lr: T,
    prepared: &[(super::Pooled<T>, (usize, usize, usize))],
    dataset: &[TrainSample<T>],
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
) -> Result<EpochMetrics> {
    let (mut bce, mut reg) = (0.0, 0.0);
    let mut probs = Vec::with_capacity(dataset.len());
    for ((pooled, shape), sample) in prepared.iter().zip(dataset) {
        let fwd = Forward::from_pooled(pooled.clone(), *shape, head, hp)?;
        let parts = loss_parts(&fwd, sample, hp);
        bce += parts.bce.to_f64_lossy();
        reg += parts.reg.to_f64_lossy();
        probs.push(fwd.scores.bag_probs.iter().map(|p| p.to_f64_lossy()).collect::<Vec<_>>());
    }
    let n = dataset.len() as f64;
    let labels: Vec<&[bool]> = dataset.iter().map(|s| s.label.0.as_slice()).collect();
    Ok(EpochMetrics {
        epoch: epoch + 1,
        lr: lr.to_f64_lossy(),
        loss_bce: bce / n,
        loss_reg: reg / n,
        train_map: mean_ap_from_scores(&probs, &labels).unwrap_or(f64::NAN),
    })
}
