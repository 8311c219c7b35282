use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::InstanceBatch;
use crate::error::{mismatch, Result};
use crate::tensor::Matrix;
use crate::Real;

/// Shared fully-connected scoring layer, `C × D` weights plus `C` biases,
/// and the optional `D → 1` attention layer (`D` weights then one bias).
#[derive(Debug, Clone, PartialEq)]
pub struct MimlHead<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub attention: Option<Vec<T>>,
}

impl<T: Real> MimlHead<T> {
    pub fn zeros(n_classes: usize, feat_dim: usize, with_attention: bool) -> Self {
        Self {
            weights: Matrix::zeros(n_classes, feat_dim),
            bias: vec![T::zero(); n_classes],
            attention: with_attention.then(|| vec![T::zero(); feat_dim + 1]),
        }
    }

    /// Weights uniform in `±1/√D`, biases zero.
    pub fn init<R: Rng + ?Sized>(n_classes: usize, feat_dim: usize, with_attention: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (feat_dim.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut draw = |n: usize| (0..n).map(|_| T::lit(dist.sample(rng))).collect::<Vec<T>>();
        let weights = Matrix::from_vec(n_classes, feat_dim, draw(n_classes * feat_dim))
            .expect("sized buffer");
        let attention = with_attention.then(|| {
            let mut a = draw(feat_dim);
            a.push(T::zero());
            a
        });
        Self { weights, bias: vec![T::zero(); n_classes], attention }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn feat_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn check_batch(&self, batch: &InstanceBatch<T>) -> Result<()> {
        if batch.feat_dim() != self.feat_dim() {
            return Err(mismatch(format!(
                "instance features have dim {} but the head expects {}",
                batch.feat_dim(),
                self.feat_dim()
            )));
        }
        Ok(())
    }

    /// `s = X Wᵀ + b`, one row per instance.
    pub fn instance_scores(&self, batch: &InstanceBatch<T>) -> Result<Matrix<T>> {
        self.check_batch(batch)?;
        let (n, c) = (batch.n_instances(), self.n_classes());
        let mut s = Matrix::zeros(n, c);
        for i in 0..n {
            let x = batch.instance(i);
            for a in 0..c {
                let dot: T = self.weights.row(a).iter().zip(x).map(|(&w, &v)| w * v).sum();
                s.set(i, a, dot + self.bias[a]);
            }
        }
        Ok(s)
    }

    /// Attention logit `v·x_i + c` per instance.
    pub fn attention_logits(&self, batch: &InstanceBatch<T>) -> Option<Vec<T>> {
        let att = self.attention.as_ref()?;
        let d = self.feat_dim();
        Some(
            (0..batch.n_instances())
                .map(|i| {
                    batch.instance(i).iter().zip(&att[..d]).map(|(&x, &w)| x * w).sum::<T>() + att[d]
                })
                .collect(),
        )
    }

    pub fn num_params(&self) -> usize {
        self.weights.data().len() + self.bias.len() + self.attention.as_ref().map_or(0, Vec::len)
    }

    /// Parameters in the fixed order weights, bias, attention.
    pub fn flat_params(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.weights.data());
        v.extend_from_slice(&self.bias);
        if let Some(a) = &self.attention {
            v.extend_from_slice(a);
        }
        v
    }

    /// Adds `delta` (in [`flat_params`](Self::flat_params) order) to every parameter.
    pub fn add_flat(&mut self, delta: &[T]) {
        assert_eq!(delta.len(), self.num_params(), "update has wrong length");
        let (w, rest) = delta.split_at(self.weights.data().len());
        let (b, a) = rest.split_at(self.bias.len());
        for (p, d) in self.weights.data_mut().iter_mut().zip(w) {
            *p += *d;
        }
        for (p, d) in self.bias.iter_mut().zip(b) {
            *p += *d;
        }
        if let Some(att) = &mut self.attention {
            for (p, d) in att.iter_mut().zip(a) {
                *p += *d;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flat_params().iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> MimlHead<U> {
        let c = |v: &T| U::lit(v.to_f64_lossy());
        MimlHead {
            weights: Matrix::from_vec(
                self.weights.rows(),
                self.weights.cols(),
                self.weights.data().iter().map(c).collect(),
            )
            .expect("same shape"),
            bias: self.bias.iter().map(c).collect(),
            attention: self.attention.as_ref().map(|a| a.iter().map(c).collect()),
        }
    }
}

/// Gradients shaped like [`MimlHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub attention: Option<Vec<T>>,
}

impl<T: Real> HeadGradients<T> {
    pub fn zeros_like(head: &MimlHead<T>) -> Self {
        Self {
            weights: Matrix::zeros(head.n_classes(), head.feat_dim()),
            bias: vec![T::zero(); head.n_classes()],
            attention: head.attention.as_ref().map(|a| vec![T::zero(); a.len()]),
        }
    }

    pub fn flat(&self) -> Vec<T> {
        let mut v = self.weights.data().to_vec();
        v.extend_from_slice(&self.bias);
        if let Some(a) = &self.attention {
            v.extend_from_slice(a);
        }
        v
    }

    pub fn norm(&self) -> T {
        self.flat().iter().map(|&g| g * g).sum::<T>().sqrt()
    }
}
