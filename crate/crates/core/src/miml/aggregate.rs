use super::Aggregator;
use crate::error::{domain, mismatch, Result};
use crate::tensor::Matrix;
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutput<T> {
    /// Bag score per class.
    pub bag: Vec<T>,
    /// `∂ bag[a] / ∂ s[i][a]`, `N × C`. Every column sums to one.
    pub weights: Matrix<T>,
    /// Softmax attention over instances, attention mode only.
    pub attention: Option<Vec<T>>,
}

/// Per-class bag scores from the `N × C` instance scores.
pub fn aggregate<T: Real>(
    s: &Matrix<T>,
    mode: Aggregator,
    lse_sharpness: T,
    attention_logits: Option<&[T]>,
) -> Result<Vec<T>> {
    aggregate_with_weights(s, mode, lse_sharpness, attention_logits).map(|o| o.bag)
}

pub fn aggregate_with_weights<T: Real>(
    s: &Matrix<T>,
    mode: Aggregator,
    lse_sharpness: T,
    attention_logits: Option<&[T]>,
) -> Result<AggregateOutput<T>> {
    let (n, c) = (s.rows(), s.cols());
    if n == 0 {
        return Err(domain("cannot aggregate an empty instance batch"));
    }
    let mut bag = vec![T::zero(); c];
    let mut weights = Matrix::zeros(n, c);
    let mut attention = None;
    match mode {
        Aggregator::Avg => {
            let inv = T::one() / T::from_usize_lossy(n);
            for (a, out) in bag.iter_mut().enumerate() {
                *out = s.column(a).sum::<T>() * inv;
                for i in 0..n {
                    weights.set(i, a, inv);
                }
            }
        }
        Aggregator::Max => {
            for (a, out) in bag.iter_mut().enumerate() {
                let (arg, best) = first_argmax(s.column(a));
                *out = best;
                weights.set(arg, a, T::one());
            }
        }
        Aggregator::Lse => {
            let r = lse_sharpness;
            if !(r > T::zero()) {
                return Err(domain(format!("lse sharpness must be > 0, got {r}")));
            }
            let log_n = T::from_usize_lossy(n).ln();
            let mut e = vec![T::zero(); n];
            for (a, out) in bag.iter_mut().enumerate() {
                let (_, m) = first_argmax(s.column(a));
                for (i, ei) in e.iter_mut().enumerate() {
                    *ei = (r * (s.get(i, a) - m)).exp();
                }
                let z: T = e.iter().copied().sum();
                *out = m + (z.ln() - log_n) / r;
                for (i, &ei) in e.iter().enumerate() {
                    weights.set(i, a, ei / z);
                }
            }
        }
        Aggregator::Attention => {
            let logits = attention_logits
                .ok_or_else(|| domain("attention aggregation needs attention logits"))?;
            if logits.len() != n {
                return Err(mismatch(format!("{} attention logits for {n} instances", logits.len())));
            }
            let beta = softmax(logits);
            for (a, out) in bag.iter_mut().enumerate() {
                *out = s.column(a).zip(&beta).map(|(v, &b)| v * b).sum();
                for (i, &b) in beta.iter().enumerate() {
                    weights.set(i, a, b);
                }
            }
            attention = Some(beta);
        }
    }
    Ok(AggregateOutput { bag, weights, attention })
}

/// Index and value of the first maximum.
pub(crate) fn first_argmax<T: Real>(values: impl Iterator<Item = T>) -> (usize, T) {
    values
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) })
}

pub(crate) fn softmax<T: Real>(x: &[T]) -> Vec<T> {
    let (_, m) = first_argmax(x.iter().copied());
    let e: Vec<T> = x.iter().map(|&v| (v - m).exp()).collect();
    let z: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn agg(s: &Matrix<f64>, mode: Aggregator, r: f64) -> Vec<f64> {
        let logits = vec![0.3; s.rows()];
        aggregate(s, mode, r, Some(&logits)).unwrap()
    }

    #[test]
    fn constant_instances_agree() {
        let s = col(&[1.7, 1.7, 1.7]);
        for mode in Aggregator::ALL {
            assert!((agg(&s, mode, 0.8)[0] - 1.7).abs() < 1e-12, "{mode:?}");
        }
    }

    #[test]
    fn lse_two_point_value() {
        // (1/0.8) ln((1 + e^0.8)/2), evaluated independently
        let expect = ((1.0 + 0.8f64.exp()) / 2.0).ln() / 0.8;
        let got = agg(&col(&[0.0, 1.0]), Aggregator::Lse, 0.8)[0];
        assert!((got - expect).abs() < 1e-14);
        // the quoted reference 0.59743 is rounded low by about 1.2e-5
        assert!((got - 0.59743).abs() < 2e-5);
        assert_eq!(agg(&col(&[0.0, 1.0]), Aggregator::Avg, 0.8)[0], 0.5);
        assert_eq!(agg(&col(&[0.0, 1.0]), Aggregator::Max, 0.8)[0], 1.0);
    }

    #[test]
    fn max_routes_to_first_argmax() {
        let out = aggregate_with_weights(&col(&[2.0, 5.0, 5.0]), Aggregator::Max, 1.0, None).unwrap();
        assert_eq!(out.weights.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn errors() {
        let empty = Matrix::<f64>::zeros(0, 3);
        assert!(aggregate(&empty, Aggregator::Avg, 1.0, None).is_err());
        assert!(aggregate(&col(&[1.0]), Aggregator::Lse, 0.0, None).is_err());
        assert!(aggregate(&col(&[1.0]), Aggregator::Attention, 1.0, None).is_err());
        assert!(aggregate(&col(&[1.0, 2.0]), Aggregator::Attention, 1.0, Some(&[0.0])).is_err());
    }

    #[test]
    fn lse_limits() {
        let s = col(&[-1.0, 0.25, 0.9, 0.4]);
        let max = 0.9;
        let avg = (-1.0 + 0.25 + 0.9 + 0.4) / 4.0;
        // r = 100 leaves a ln(4)/100 gap to the max by construction
        assert!((agg(&s, Aggregator::Lse, 100.0)[0] - max).abs() < 1e-3 + 4f64.ln() / 100.0);
        assert!((agg(&s, Aggregator::Lse, 1e-4)[0] - avg).abs() < 1e-3);
    }

    #[test]
    fn lse_large_scores_do_not_overflow() {
        let v = agg(&col(&[1000.0, 999.0]), Aggregator::Lse, 5.0)[0];
        assert!(v.is_finite() && v < 1000.0 && v > 999.0);
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(vals in proptest::collection::vec(-5.0f64..5.0, 1..8), r in 0.05f64..10.0) {
            let s = col(&vals);
            let logits: Vec<f64> = vals.iter().map(|v| v * 0.7).collect();
            for mode in Aggregator::ALL {
                let out = aggregate_with_weights(&s, mode, r, Some(&logits)).unwrap();
                let total: f64 = out.weights.data().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn ordering_and_shift(vals in proptest::collection::vec(-5.0f64..5.0, 1..8), r in 0.05f64..10.0, shift in -50.0f64..50.0) {
            let s = col(&vals);
            let avg = agg(&s, Aggregator::Avg, r)[0];
            let lse = agg(&s, Aggregator::Lse, r)[0];
            let max = agg(&s, Aggregator::Max, r)[0];
            prop_assert!(avg <= lse + 1e-12 && lse <= max + 1e-12);
            prop_assert!(agg(&s, Aggregator::Lse, r * 1.5)[0] >= lse - 1e-12);
            let shifted = s.map(|v| v + shift);
            for mode in [Aggregator::Avg, Aggregator::Max, Aggregator::Lse] {
                let a = agg(&shifted, mode, r)[0];
                let b = agg(&s, mode, r)[0] + shift;
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + shift.abs()));
            }
        }
    }
}
