//! Numerical kernels over probability vectors.

use crate::{Error, Result, Scalar};

/// Absolute slack allowed on `sum(p) == 1`. Grows with the vector length
/// for low-precision scalars.
pub fn distribution_tolerance<T: Scalar>(len: usize) -> T {
    let base = T::of(1e-6);
    let rounding = T::epsilon() * T::of_usize(len.max(1)) * T::of(4.0);
    if rounding > base {
        rounding
    } else {
        base
    }
}

pub fn validate_distribution<T: Scalar>(p: &[T]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < T::zero()) {
        return Err(Error::InvalidDistribution(format!("entry {i} is {v}")));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > distribution_tolerance::<T>(p.len()) {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Numerically stable softmax. An empty input gives an empty output.
pub fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let Some(max) = scores.iter().copied().reduce(T::max) else {
        return Vec::new();
    };
    let mut out: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: T = out.iter().copied().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// `ln(sum(exp(scores)))`, stable for large scores.
pub fn log_sum_exp<T: Scalar>(scores: &[T]) -> T {
    let Some(max) = scores.iter().copied().reduce(T::max) else {
        return T::neg_infinity();
    };
    max + scores.iter().map(|&s| (s - max).exp()).sum::<T>().ln()
}

pub(crate) fn entropy_unchecked<T: Scalar>(p: &[T]) -> T {
    let h = p
        .iter()
        .filter(|v| **v > T::zero())
        .map(|&v| -v * v.ln())
        .sum::<T>();
    if h < T::zero() {
        T::zero()
    } else {
        h
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy<T: Scalar>(p: &[T]) -> Result<T> {
    validate_distribution(p)?;
    Ok(entropy_unchecked(p))
}

/// Arg-max of `start[s] * end[e]` over `s <= e < s + max_span_len`.
/// Ties go to the smaller `s`, then the smaller `e`.
pub fn decode_best_span<T: Scalar>(start: &[T], end: &[T], max_span_len: usize) -> Result<(usize, usize)> {
    if start.len() != end.len() {
        return Err(Error::Shape(format!(
            "start has {} entries but end has {}",
            start.len(),
            end.len()
        )));
    }
    if start.is_empty() || max_span_len == 0 {
        return Err(Error::Shape("no admissible span".into()));
    }
    let n = start.len();
    let mut best = (0, 0);
    let mut best_score = start[0] * end[0];
    for s in 0..n {
        for e in s..n.min(s + max_span_len) {
            let score = start[s] * end[e];
            if score > best_score || best_score.is_nan() && !score.is_nan() {
                best_score = score;
                best = (s, e);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_examples() {
        assert_eq!(decode_best_span(&[0.7, 0.3], &[0.2, 0.8], 2).unwrap(), (0, 1));
        assert_eq!(decode_best_span(&[0.5, 0.5], &[0.5, 0.5], 30).unwrap(), (0, 0));
        let mut s = vec![0.0; 6];
        let mut e = vec![0.0; 6];
        s[2] = 1.0;
        e[4] = 1.0;
        assert_eq!(decode_best_span(&s, &e, 30).unwrap(), (2, 4));
        assert_eq!(decode_best_span(&s, &e, 2).unwrap(), (0, 0));
        assert!(decode_best_span(&[1.0], &[0.5, 0.5], 3).is_err());
        assert!(decode_best_span::<f64>(&[], &[], 3).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.25f64; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[0.5f64, 0.5]).unwrap() - 0.693_147_180_559_945_3).abs() < 1e-15);
        assert!(entropy(&[0.5f64, 0.6]).is_err());
        assert!(entropy(&[1.5f64, -0.5]).is_err());
        assert!(entropy::<f64>(&[]).is_err());
    }

    #[test]
    fn f32_kernels_agree_with_f64() {
        let scores = [0.3f64, -1.2, 2.5, 0.0];
        let p64 = softmax(&scores);
        let p32 = softmax(&scores.map(|v| v as f32));
        for (a, b) in p64.iter().zip(&p32) {
            assert!((a - f64::from(*b)).abs() < 1e-6);
        }
        let h32 = entropy(&p32).unwrap();
        assert!((f64::from(h32) - entropy(&p64).unwrap()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn softmax_is_shift_invariant(scores in prop::collection::vec(-20.0f64..20.0, 1..30), shift in -100.0f64..100.0) {
            let p = softmax(&scores);
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let q = softmax(&shifted);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(a));
            }
        }

        #[test]
        fn entropy_bounded_by_log_len(raw in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let h = entropy(&p).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
        }
    }
}
