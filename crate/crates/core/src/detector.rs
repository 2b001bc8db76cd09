//! Shared-class detection from cumulative prediction probabilities.
//!
//! Two acceptance rules are provided: the fixed threshold `u_k >= alpha` on
//! min-max normalized cumulative probabilities, and the hard-binary-weights
//! (HBW) baseline, which places the threshold at the split of the sorted
//! values that maximizes between-group variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::model::{forward, ModelParams};
use crate::numkernel::{minmax_normalize, Matrix};

/// Relative tolerance under which two candidate split scores count as tied.
const SPLIT_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeProbs {
    /// `u_k = sum_i p_i[k]` over the batch.
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub degenerate: bool,
}

impl CumulativeProbs {
    /// Sums the rows of an `n x K` probability matrix.
    pub fn from_probs(probs: &Matrix) -> Result<Self> {
        if probs.rows() == 0 {
            return Err(Error::EmptyInput("cumulative probabilities of an empty batch".into()));
        }
        let raw = probs.col_sums().into_vec();
        let n = minmax_normalize(&raw)?;
        Ok(Self {
            raw,
            normalized: n.values,
            degenerate: n.degenerate,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.raw.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMethod {
    Alpha,
    Hbw,
    /// Every class accepted (detection disabled).
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedClassSet {
    /// Sorted, unique class indices.
    pub classes: Vec<usize>,
    pub threshold_used: f64,
    pub method: DetectionMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<Warning>,
}

impl SharedClassSet {
    /// A set that accepts every class in `0..k`.
    pub fn all(k: usize) -> Self {
        Self {
            classes: (0..k).collect(),
            threshold_used: 0.0,
            method: DetectionMethod::All,
            warning: None,
        }
    }

    /// A set built from explicit classes, e.g. ground truth in tests.
    pub fn from_classes(classes: impl IntoIterator<Item = usize>) -> Self {
        let mut classes: Vec<usize> = classes.into_iter().collect();
        classes.sort_unstable();
        classes.dedup();
        Self {
            classes,
            threshold_used: 0.0,
            method: DetectionMethod::All,
            warning: None,
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.classes.binary_search(&k).is_ok()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

pub fn cumulative_probabilities(params: &ModelParams, x_target: &Matrix) -> Result<CumulativeProbs> {
    if x_target.rows() == 0 {
        return Err(Error::EmptyInput("target batch".into()));
    }
    let trace = forward(params, x_target)?;
    CumulativeProbs::from_probs(&trace.probs)
}

/// Accepts every class with `normalized[k] >= alpha`.
///
/// A degenerate input accepts all classes and carries a
/// [`Warning::DegenerateDetection`].
pub fn detect_shared(cp: &CumulativeProbs, alpha: f64) -> Result<SharedClassSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha {alpha} outside (0, 1)")));
    }
    if cp.degenerate {
        return Ok(SharedClassSet {
            classes: (0..cp.num_classes()).collect(),
            threshold_used: alpha,
            method: DetectionMethod::Alpha,
            warning: Some(Warning::DegenerateDetection),
        });
    }
    let classes: Vec<usize> = cp
        .normalized
        .iter()
        .enumerate()
        .filter(|&(_, &u)| u >= alpha)
        .map(|(k, _)| k)
        .collect();
    if classes.is_empty() {
        return Err(Error::NoSharedClasses);
    }
    Ok(SharedClassSet {
        classes,
        threshold_used: alpha,
        method: DetectionMethod::Alpha,
        warning: None,
    })
}

/// Between-group variance `w_lo * w_hi * (mean_lo - mean_hi)^2` of splitting
/// ascending `sorted` values into `sorted[..cut]` and `sorted[cut..]`.
fn split_score(prefix: &[f64], cut: usize) -> f64 {
    let n = prefix.len() - 1;
    let total = prefix[n];
    let lo = prefix[cut];
    let w_lo = cut as f64 / n as f64;
    let w_hi = 1.0 - w_lo;
    let mean_lo = lo / cut as f64;
    let mean_hi = (total - lo) / (n - cut) as f64;
    w_lo * w_hi * (mean_lo - mean_hi).powi(2)
}

/// Variance-maximizing (Otsu-style) threshold over the normalized values.
///
/// Candidate thresholds are the distinct sorted values above the minimum, so
/// equal values never straddle the split. Among splits whose scores tie within
/// a relative `1e-12`, the lowest threshold (largest accepted set) wins.
pub fn hbw_threshold(cp: &CumulativeProbs) -> Result<SharedClassSet> {
    if cp.degenerate {
        return Err(Error::DegenerateDetection);
    }
    if cp.num_classes() < 2 {
        return Err(Error::InvalidInput("HBW needs at least two classes".into()));
    }
    let mut sorted = cp.normalized.clone();
    sorted.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    prefix.push(0.0);
    for v in &sorted {
        prefix.push(prefix.last().unwrap() + v);
    }

    let mut best: Option<(f64, f64)> = None; // (score, threshold)
    for cut in 1..sorted.len() {
        if sorted[cut] == sorted[cut - 1] {
            continue;
        }
        let score = split_score(&prefix, cut);
        let better = match best {
            None => true,
            Some((s, _)) => score > s * (1.0 + SPLIT_TIE_TOL) + f64::MIN_POSITIVE,
        };
        if better {
            best = Some((score, sorted[cut]));
        }
    }
    // non-degenerate input always has at least one distinct cut
    let (_, threshold) = best.ok_or(Error::DegenerateDetection)?;
    let classes = cp
        .normalized
        .iter()
        .enumerate()
        .filter(|&(_, &u)| u >= threshold)
        .map(|(k, _)| k)
        .collect();
    Ok(SharedClassSet {
        classes,
        threshold_used: threshold,
        method: DetectionMethod::Hbw,
        warning: None,
    })
}
