use super::aggregate::{aggregate_with_weights, AggregateOutput};
use super::instances::{pool_backward, pool_features, Pooled};
use super::loss::{bce_loss, bce_score_gradient, sparsity_reg, sparsity_reg_gradient};
use super::{Aggregator, HeadGradients, Hyperparams, MimlHead, TrainSample};
use crate::error::{mismatch, Result};
use crate::scalar::sigmoid;
use crate::tensor::{FeatureMap, Matrix};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Scores<T> {
    /// `s_i^a`, `N × C`.
    pub instance_scores: Matrix<T>,
    /// `s^a`.
    pub bag_scores: Vec<T>,
    /// `p^a = sigmoid(s^a)`.
    pub bag_probs: Vec<T>,
    /// `p_i^a = sigmoid(s_i^a)`.
    pub instance_probs: Matrix<T>,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub pooled: Pooled<T>,
    pub input_shape: (usize, usize, usize),
    pub scores: Scores<T>,
    pub aggregate: AggregateOutput<T>,
}

impl<T: Real> Forward<T> {
    /// Forward pass from already pooled instance features.
    pub fn from_pooled(
        pooled: Pooled<T>,
        input_shape: (usize, usize, usize),
        head: &MimlHead<T>,
        hp: &Hyperparams<T>,
    ) -> Result<Self> {
        let s = head.instance_scores(&pooled.batch)?;
        let logits = match hp.aggregator {
            Aggregator::Attention => Some(head.attention_logits(&pooled.batch).ok_or_else(|| {
                mismatch("attention aggregation needs a head with attention parameters")
            })?),
            _ => None,
        };
        let agg = aggregate_with_weights(&s, hp.aggregator, hp.lse_sharpness, logits.as_deref())?;
        let scores = Scores {
            bag_probs: agg.bag.iter().map(|&v| sigmoid(v)).collect(),
            bag_scores: agg.bag.clone(),
            instance_probs: s.map(sigmoid),
            instance_scores: s,
        };
        Ok(Self { pooled, input_shape, scores, aggregate: agg })
    }
}

/// Mask (if enabled), pool and score one sample.
pub fn forward<T: Real>(sample: &TrainSample<T>, head: &MimlHead<T>, hp: &Hyperparams<T>) -> Result<Forward<T>> {
    if sample.label.len() != head.n_classes() {
        return Err(mismatch(format!(
            "label has {} classes but the head scores {}",
            sample.label.len(),
            head.n_classes()
        )));
    }
    let input = sample.input(hp.use_mask)?;
    let pooled = pool_features(&input, hp.pooling, hp.k)?;
    Forward::from_pooled(pooled, input.shape(), head, hp)
}

/// Back-propagates `d_bag = ∂L/∂s^a` and an optional direct `∂L/∂s_i^a`
/// term to the head parameters and the instance features.
pub fn backward<T: Real>(
    fwd: &Forward<T>,
    head: &MimlHead<T>,
    d_bag: &[T],
    d_inst: Option<&Matrix<T>>,
) -> (HeadGradients<T>, Matrix<T>) {
    let x = &fwd.pooled.batch.features;
    let (n, d) = (x.rows(), x.cols());
    let c = head.n_classes();
    let agg = &fwd.aggregate;

    let mut g = Matrix::zeros(n, c);
    for i in 0..n {
        for a in 0..c {
            let mut v = d_bag[a] * agg.weights.get(i, a);
            if let Some(extra) = d_inst {
                v += extra.get(i, a);
            }
            g.set(i, a, v);
        }
    }

    // attention logits: ∂s^a/∂g_i = β_i (s_i^a - s^a)
    let d_logit: Option<Vec<T>> = agg.attention.as_ref().map(|beta| {
        (0..n)
            .map(|i| {
                (0..c)
                    .map(|a| d_bag[a] * beta[i] * (fwd.scores.instance_scores.get(i, a) - agg.bag[a]))
                    .sum()
            })
            .collect()
    });

    let mut grads = HeadGradients::zeros_like(head);
    for a in 0..c {
        let row = grads.weights.row_mut(a);
        for i in 0..n {
            let gia = g.get(i, a);
            for (w, &xv) in row.iter_mut().zip(x.row(i)) {
                *w += gia * xv;
            }
        }
        grads.bias[a] = (0..n).map(|i| g.get(i, a)).sum();
    }

    let mut dx = Matrix::zeros(n, d);
    for i in 0..n {
        let out = dx.row_mut(i);
        for a in 0..c {
            let gia = g.get(i, a);
            for (o, &w) in out.iter_mut().zip(head.weights.row(a)) {
                *o += gia * w;
            }
        }
    }

    if let (Some(dl), Some(att), Some(ga)) = (&d_logit, &head.attention, &mut grads.attention) {
        for i in 0..n {
            for (k, &xv) in x.row(i).iter().enumerate() {
                ga[k] += dl[i] * xv;
            }
            ga[d] += dl[i];
            for (o, &v) in dx.row_mut(i).iter_mut().zip(&att[..d]) {
                *o += dl[i] * v;
            }
        }
    }
    (grads, dx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub bce: T,
    pub reg: T,
    /// `bce + reg_weight · reg`.
    pub total: T,
}

pub(crate) fn loss_parts<T: Real>(fwd: &Forward<T>, sample: &TrainSample<T>, hp: &Hyperparams<T>) -> LossParts<T> {
    let bce = bce_loss(&fwd.scores.bag_scores, &sample.label);
    let reg = sparsity_reg(&fwd.scores.instance_probs);
    LossParts { bce, reg, total: bce + hp.reg_weight * reg }
}

/// `L = L_bce + α L_reg` for one sample.
pub fn total_loss<T: Real>(sample: &TrainSample<T>, head: &MimlHead<T>, hp: &Hyperparams<T>) -> Result<LossParts<T>> {
    let fwd = forward(sample, head, hp)?;
    Ok(loss_parts(&fwd, sample, hp))
}

pub(crate) fn loss_backward<T: Real>(
    fwd: &Forward<T>,
    sample: &TrainSample<T>,
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
) -> (HeadGradients<T>, Matrix<T>) {
    let d_bag = bce_score_gradient(&fwd.scores.bag_scores, &sample.label);
    let d_inst = (hp.reg_weight > T::zero()).then(|| {
        sparsity_reg_gradient(&fwd.scores.instance_scores).map(|v| v * hp.reg_weight)
    });
    backward(fwd, head, &d_bag, d_inst.as_ref())
}

/// Exact gradients of [`total_loss`] with respect to the head parameters.
pub fn loss_gradients<T: Real>(
    sample: &TrainSample<T>,
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
) -> Result<(LossParts<T>, HeadGradients<T>)> {
    let fwd = forward(sample, head, hp)?;
    let parts = loss_parts(&fwd, sample, hp);
    let (grads, _) = loss_backward(&fwd, sample, head, hp);
    Ok((parts, grads))
}

/// Gradient of [`total_loss`] with respect to the raw (unmasked) feature map.
pub fn loss_input_gradients<T: Real>(
    sample: &TrainSample<T>,
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
) -> Result<FeatureMap<T>> {
    let fwd = forward(sample, head, hp)?;
    let (_, dx) = loss_backward(&fwd, sample, head, hp);
    Ok(input_gradient(&fwd, &dx, sample, hp))
}

/// Instance-feature gradient → raw feature-map gradient (pooling, then mask).
pub(crate) fn input_gradient<T: Real>(
    fwd: &Forward<T>,
    dx: &Matrix<T>,
    sample: &TrainSample<T>,
    hp: &Hyperparams<T>,
) -> FeatureMap<T> {
    let mut g = pool_backward(dx, &fwd.pooled, fwd.input_shape, hp.pooling, hp.k);
    if let Some(mask) = sample.effective_mask(hp.use_mask) {
        let plane = g.height() * g.width();
        for chunk in g.values_mut().chunks_exact_mut(plane) {
            for (v, &keep) in chunk.iter_mut().zip(mask.bits()) {
                if !keep {
                    *v = T::zero();
                }
            }
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub scores: Scores<T>,
    /// Classes with `p^a > 0.5`, ascending.
    pub predicted: Vec<usize>,
}

pub fn predict<T: Real>(sample: &TrainSample<T>, head: &MimlHead<T>, hp: &Hyperparams<T>) -> Result<Prediction<T>> {
    let fwd = forward(sample, head, hp)?;
    let half = T::lit(0.5);
    let predicted = fwd
        .scores
        .bag_probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > half)
        .map(|(a, _)| a)
        .collect();
    Ok(Prediction { scores: fwd.scores, predicted })
}
