use super::Pooling;
use crate::error::{domain, Result};
use crate::tensor::{FeatureMap, Matrix};
use crate::Real;

/// `N × D` instance features, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBatch<T> {
    pub features: Matrix<T>,
}

impl<T: Real> InstanceBatch<T> {
    pub fn new(features: Matrix<T>) -> Self {
        Self { features }
    }

    pub fn n_instances(&self) -> usize {
        self.features.rows()
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn instance(&self, i: usize) -> &[T] {
        self.features.row(i)
    }
}

/// Splits `f` into `ceil(W / k)` column blocks and average-pools each.
///
/// Block `j` spans columns `[j·k, (j+1)·k)`; columns past `W` are zero
/// padding and still count in the `H·k` denominator.
pub fn split_instances<T: Real>(f: &FeatureMap<T>, k: usize) -> Result<InstanceBatch<T>> {
    if k == 0 {
        return Err(domain("instance width k must be >= 1"));
    }
    let (c, h, w) = f.shape();
    let n = w.div_ceil(k);
    let denom = T::from_usize_lossy(h * k);
    let mut feats = Matrix::zeros(n, c);
    for ch in 0..c {
        let plane = f.plane(ch);
        for i in 0..h {
            let row = &plane[i * w..(i + 1) * w];
            for (j, v) in row.iter().enumerate() {
                let cur = feats.get(j / k, ch);
                feats.set(j / k, ch, cur + *v);
            }
        }
    }
    for v in feats.data_mut() {
        *v /= denom;
    }
    Ok(InstanceBatch::new(feats))
}

/// Instance features plus what the backward pass needs to route gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub batch: InstanceBatch<T>,
    /// For global max pooling: per channel, the flat `(row, col)` index of
    /// the first maximal cell.
    pub argmax: Option<Vec<usize>>,
}

pub fn pool_features<T: Real>(f: &FeatureMap<T>, pooling: Pooling, k: usize) -> Result<Pooled<T>> {
    let (c, h, w) = f.shape();
    if h * w == 0 {
        return Err(domain("feature map has no spatial cells"));
    }
    match pooling {
        Pooling::Instances => Ok(Pooled { batch: split_instances(f, k)?, argmax: None }),
        Pooling::GlobalAvg => {
            let denom = T::from_usize_lossy(h * w);
            let row = (0..c).map(|ch| f.plane(ch).iter().copied().sum::<T>() / denom).collect();
            Ok(Pooled { batch: InstanceBatch::new(Matrix::from_vec(1, c, row)?), argmax: None })
        }
        Pooling::GlobalMax => {
            let mut row = Vec::with_capacity(c);
            let mut arg = Vec::with_capacity(c);
            for ch in 0..c {
                let (best_i, best) = f
                    .plane(ch)
                    .iter()
                    .enumerate()
                    .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
                row.push(best);
                arg.push(best_i);
            }
            Ok(Pooled { batch: InstanceBatch::new(Matrix::from_vec(1, c, row)?), argmax: Some(arg) })
        }
    }
}

/// Spreads instance-feature gradients `grad` (`N × D`) back onto the cells
/// of a `C × H × W` map.
pub fn pool_backward<T: Real>(
    grad: &Matrix<T>,
    pooled: &Pooled<T>,
    shape: (usize, usize, usize),
    pooling: Pooling,
    k: usize,
) -> FeatureMap<T> {
    let (c, h, w) = shape;
    let mut out = FeatureMap::zeros(c, h, w);
    match pooling {
        Pooling::Instances => {
            let denom = T::from_usize_lossy(h * k);
            for ch in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        out.set(ch, i, j, grad.get(j / k, ch) / denom);
                    }
                }
            }
        }
        Pooling::GlobalAvg => {
            let denom = T::from_usize_lossy(h * w);
            for ch in 0..c {
                let g = grad.get(0, ch) / denom;
                for i in 0..h {
                    for j in 0..w {
                        out.set(ch, i, j, g);
                    }
                }
            }
        }
        Pooling::GlobalMax => {
            let arg = pooled.argmax.as_ref().expect("max pooling records its argmax");
            for ch in 0..c {
                let cell = arg[ch];
                out.set(ch, cell / w, cell % w, grad.get(0, ch));
            }
        }
    }
    out
}
