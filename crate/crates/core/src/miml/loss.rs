use super::aggregate::first_argmax;
use super::BagLabel;
use crate::scalar::{sigmoid, softplus};
use crate::tensor::Matrix;
use crate::Real;

const PROB_CLAMP: f64 = 1e-12;

/// Binary cross-entropy summed over classes, from bag scores `s` with
/// `p = sigmoid(s)`. Evaluated as `softplus(s) - y·s`, which never takes the
/// log of a saturated probability.
pub fn bce_loss<T: Real>(bag_scores: &[T], y: &BagLabel) -> T {
    bag_scores
        .iter()
        .zip(&y.0)
        .map(|(&s, &yy)| if yy { softplus(-s) } else { softplus(s) })
        .sum()
}

/// The same loss from probabilities, clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss_probs<T: Real>(p: &[T], y: &BagLabel) -> T {
    let lo = T::lit(PROB_CLAMP);
    let hi = T::one() - lo;
    p.iter()
        .zip(&y.0)
        .map(|(&p, &yy)| {
            let p = p.max(lo).min(hi);
            if yy {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum()
}

/// `∂ bce / ∂ s^a = p^a - y^a`.
pub fn bce_score_gradient<T: Real>(bag_scores: &[T], y: &BagLabel) -> Vec<T> {
    bag_scores
        .iter()
        .zip(&y.0)
        .map(|(&s, &yy)| sigmoid(s) - if yy { T::one() } else { T::zero() })
        .collect()
}

/// `Σ_i (Σ_a p_i^a - max_a p_i^a) / max_a p_i^a` over instance probabilities.
pub fn sparsity_reg<T: Real>(p_inst: &Matrix<T>) -> T {
    (0..p_inst.rows())
        .map(|i| {
            let row = p_inst.row(i);
            let (_, m) = first_argmax(row.iter().copied());
            let total: T = row.iter().copied().sum();
            (total - m) / m
        })
        .sum()
}

/// `∂ L_reg / ∂ s_i^a` with respect to instance *scores*.
///
/// Writing `m = p_i^{a*}` for the (first) argmax class and `S = Σ_a p_i^a`:
/// non-argmax classes get `p(1-p) / m`, the argmax class `(1-m)(m-S)/m`.
pub fn sparsity_reg_gradient<T: Real>(s_inst: &Matrix<T>) -> Matrix<T> {
    let (n, c) = (s_inst.rows(), s_inst.cols());
    let mut g = Matrix::zeros(n, c);
    for i in 0..n {
        let p: Vec<T> = s_inst.row(i).iter().map(|&s| sigmoid(s)).collect();
        let (arg, m) = first_argmax(p.iter().copied());
        let total: T = p.iter().copied().sum();
        for (a, &pa) in p.iter().enumerate() {
            let v = if a == arg {
                (T::one() - m) * (m - total) / m
            } else {
                pa * (T::one() - pa) / m
            };
            g.set(i, a, v);
        }
    }
    g
}
