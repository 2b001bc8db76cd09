//! Dense numeric primitives shared by the rest of the crate.

mod matrix;
mod rng;

pub use matrix::{dot, norm, Matrix};
pub use rng::RngStream;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidShape("softmax of an empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidNumeric("softmax input".into()));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Softmax without input validation. Callers guarantee finite, non-empty input.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    if !logits.is_finite() {
        return Err(Error::InvalidNumeric("softmax input".into()));
    }
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

/// Result of min-max normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Set when `max == min`; `values` is then all ones.
    pub degenerate: bool,
}

/// Rescales `v` affinely onto `[0, 1]`.
pub fn minmax_normalize(v: &[f64]) -> Result<Normalized> {
    if v.len() < 2 {
        return Err(Error::InvalidShape(format!(
            "min-max normalization needs at least 2 entries, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidNumeric("min-max input".into()));
    }
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(Normalized {
            values: vec![1.0; v.len()],
            degenerate: true,
        });
    }
    let span = max - min;
    let values = v
        .iter()
        .map(|&x| if x == max { 1.0 } else { (x - min) / span })
        .collect();
    Ok(Normalized {
        values,
        degenerate: false,
    })
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidShape(format!(
            "cosine of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector("cosine similarity operand".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// SGD with momentum and L2 weight decay.
///
/// `v <- momentum * v + (g + weight_decay * p)`, then `p <- p - learning_rate * v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    pub velocity: Vec<Matrix>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdState {
    pub fn new(
        shapes: &[(usize, usize)],
        learning_rate: f64,
        momentum: f64,
        weight_decay: f64,
    ) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidParam(format!("learning_rate {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidParam(format!("momentum {momentum}")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::InvalidParam(format!("weight_decay {weight_decay}")));
        }
        Ok(Self {
            velocity: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            learning_rate,
            momentum,
            weight_decay,
        })
    }

    /// In-place update of `params` and the velocity buffers.
    pub fn apply(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.velocity.len() {
            return Err(Error::InvalidShape(format!(
                "{} params, {} grads, {} velocity buffers",
                params.len(),
                grads.len(),
                self.velocity.len()
            )));
        }
        for ((p, g), v) in params.iter().zip(grads).zip(&self.velocity) {
            p.check_same_shape(g)?;
            p.check_same_shape(v)?;
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(self.velocity.iter_mut()) {
            let ps = p.as_mut_slice();
            for ((pv, &gv), vv) in ps.iter_mut().zip(g.as_slice()).zip(v.as_mut_slice()) {
                *vv = self.momentum * *vv + (gv + self.weight_decay * *pv);
                *pv -= self.learning_rate * *vv;
            }
            if !p.is_finite() {
                return Err(Error::InvalidNumeric("parameter after SGD step".into()));
            }
        }
        Ok(())
    }
}

/// Functional form of [`SgdState::apply`]: returns updated copies.
pub fn sgd_momentum_step(
    params: &[Matrix],
    grads: &[Matrix],
    state: &SgdState,
) -> Result<(Vec<Matrix>, SgdState)> {
    let mut params = params.to_vec();
    let mut state = state.clone();
    {
        let mut refs: Vec<&mut Matrix> = params.iter_mut().collect();
        let grads: Vec<&Matrix> = grads.iter().collect();
        state.apply(&mut refs, &grads)?;
    }
    Ok((params, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let s = softmax(&[1000.0, 1000.0, 1000.0]).unwrap();
        for v in s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let e = std::f64::consts::E;
        let s = softmax(&[1.0, 0.0]).unwrap();
        assert!((s[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((s[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((s[0] - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!(matches!(softmax(&[f64::NAN]), Err(Error::InvalidNumeric(_))));
        assert!(matches!(softmax(&[f64::INFINITY, 0.0]), Err(Error::InvalidNumeric(_))));
    }

    #[test]
    fn minmax_examples() {
        let n = minmax_normalize(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(n.values, vec![0.0, 0.5, 1.0]);
        assert!(!n.degenerate);
        let n = minmax_normalize(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(n.values, vec![1.0; 3]);
        assert!(n.degenerate);
        let n = minmax_normalize(&[0.2, 1.3, 0.5]).unwrap();
        assert_eq!(n.values[0], 0.0);
        assert_eq!(n.values[1], 1.0);
        assert!((n.values[2] - 0.3 / 1.1).abs() < 1e-12);
        assert!(matches!(minmax_normalize(&[1.0]), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[3.0, -1.0], &[3.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector(_))
        ));
    }

    fn one(v: f64) -> Vec<Matrix> {
        vec![Matrix::row_vector(&[v])]
    }

    #[test]
    fn sgd_examples() {
        let st = SgdState::new(&[(1, 1)], 0.1, 0.0, 0.0).unwrap();
        let (p, _) = sgd_momentum_step(&one(1.0), &one(0.0), &st).unwrap();
        assert_eq!(p, one(1.0));
        let (p, _) = sgd_momentum_step(&one(1.0), &one(1.0), &st).unwrap();
        assert!((p[0].get(0, 0) - 0.9).abs() < 1e-15);

        let st = SgdState::new(&[(1, 1)], 0.1, 0.9, 0.0).unwrap();
        let (p, st) = sgd_momentum_step(&one(1.0), &one(1.0), &st).unwrap();
        assert!((p[0].get(0, 0) - 0.9).abs() < 1e-15);
        let (p, _) = sgd_momentum_step(&p, &one(1.0), &st).unwrap();
        assert!((p[0].get(0, 0) - 0.71).abs() < 1e-15);

        let st = SgdState::new(&[(1, 2)], 0.1, 0.0, 0.0).unwrap();
        assert!(matches!(
            sgd_momentum_step(&one(1.0), &one(1.0), &st),
            Err(Error::InvalidShape(_))
        ));
        assert!(SgdState::new(&[(1, 1)], 0.0, 0.0, 0.0).is_err());
        assert!(SgdState::new(&[(1, 1)], 0.1, 1.0, 0.0).is_err());
        assert!(SgdState::new(&[(1, 1)], 0.1, 0.5, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in prop::collection::vec(-500.0f64..500.0, 1..20)) {
            let s = softmax(&v).unwrap();
            let sum: f64 = s.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(s.iter().all(|&p| p > 0.0 || p == 0.0) && s.iter().all(|&p| p <= 1.0));
        }

        #[test]
        fn minmax_idempotent(v in prop::collection::vec(-10.0f64..10.0, 2..15)) {
            let once = minmax_normalize(&v).unwrap();
            prop_assume!(!once.degenerate);
            let twice = minmax_normalize(&once.values).unwrap();
            for (a, b) in once.values.iter().zip(&twice.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cosine_scale_invariant(
            a in prop::collection::vec(-5.0f64..5.0, 3),
            b in prop::collection::vec(-5.0f64..5.0, 3),
            c in 0.01f64..100.0,
        ) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
            let lhs = cosine_similarity(&a, &b).unwrap();
            let rhs = cosine_similarity(&scaled, &b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn plain_sgd_matches_gradient_descent(
            p in prop::collection::vec(-3.0f64..3.0, 6),
            g in prop::collection::vec(-3.0f64..3.0, 6),
            lr in 1e-4f64..1.0,
        ) {
            let pm = vec![Matrix::from_vec(2, 3, p.clone()).unwrap()];
            let gm = vec![Matrix::from_vec(2, 3, g.clone()).unwrap()];
            let st = SgdState::new(&[(2, 3)], lr, 0.0, 0.0).unwrap();
            let (out, _) = sgd_momentum_step(&pm, &gm, &st).unwrap();
            for i in 0..6 {
                prop_assert_eq!(out[0].as_slice()[i], p[i] - lr * g[i]);
            }
        }
    }
}
