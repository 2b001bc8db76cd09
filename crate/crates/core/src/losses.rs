//! Loss values and their input gradients.
//!
//! * cross-entropy on labeled source plus pseudo-labeled target samples,
//! * prototype-to-source-center contrastive alignment,
//! * soft-target distillation on stored prototypes,
//!
//! combined as `ce + lambda * con + eta * dis`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result, Warning};
use crate::model::{forward_features, ModelParams};
use crate::numkernel::{dot, norm, softmax_in_place, Matrix};

/// Floor applied to probabilities before taking their log.
pub const LOG_CLAMP: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub con: f64,
    pub dis: f64,
    pub total: f64,
    pub lambda: f64,
    pub eta: f64,
}

pub fn total_loss(ce: f64, con: f64, dis: f64, lambda: f64, eta: f64) -> Result<LossBreakdown> {
    if ![ce, con, dis, lambda, eta].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidNumeric("loss term".into()));
    }
    Ok(LossBreakdown {
        ce,
        con,
        dis,
        total: ce + lambda * con + eta * dis,
        lambda,
        eta,
    })
}

/// Per-class mean source features `f_s^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCenters {
    pub centers: BTreeMap<usize, Vec<f64>>,
    pub counts: BTreeMap<usize, usize>,
}

impl SourceCenters {
    pub fn get(&self, k: usize) -> Option<&[f64]> {
        self.centers.get(&k).map(Vec::as_slice)
    }
}

pub fn source_centers(params: &ModelParams, source: &LabeledDataset) -> Result<SourceCenters> {
    if source.is_empty() {
        return Err(Error::EmptyInput("source dataset".into()));
    }
    let q = forward_features(params, &source.features)?;
    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (row, &y) in q.iter_rows().zip(&source.labels) {
        let s = sums.entry(y).or_insert_with(|| vec![0.0; q.cols()]);
        for (a, &v) in s.iter_mut().zip(row) {
            *a += v;
        }
        *counts.entry(y).or_default() += 1;
    }
    let centers = sums
        .into_iter()
        .map(|(k, s)| {
            let n = counts[&k] as f64;
            (k, s.into_iter().map(|v| v / n).collect())
        })
        .collect();
    Ok(SourceCenters { centers, counts })
}

/// Mean cross-entropy and its gradient at the logits, `(softmax - onehot) / n`.
pub fn ce_loss(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::InvalidShape(format!("{} labels for {n} rows", labels.len())));
    }
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, k)));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::InvalidLabel { label: bad, classes: k });
    }
    let mut grad = logits.clone();
    let mut value = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = grad.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        value += lse - row[y];
        softmax_in_place(row);
        row[y] -= 1.0;
    }
    let inv = 1.0 / n as f64;
    grad.as_mut_slice().iter_mut().for_each(|g| *g *= inv);
    Ok((value * inv, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConOptions {
    pub tau: f64,
    /// L2-normalize prototype features and centers before the dot product.
    pub normalize: bool,
}

impl Default for ConOptions {
    fn default() -> Self {
        Self {
            tau: 0.1,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConLoss {
    pub value: f64,
    /// Gradient with respect to the prototype features, `N x h`.
    pub d_features: Matrix,
    /// Gradient with respect to each source center.
    pub d_centers: BTreeMap<usize, Vec<f64>>,
}

fn unit(v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::ZeroVector("contrastive operand".into()));
    }
    Ok((v.iter().map(|x| x / n).collect(), n))
}

/// Pulls `d unit(v)` back to `d v`: `(g - u (u . g)) / |v|`.
fn unit_backward(u: &[f64], len: f64, g: &[f64]) -> Vec<f64> {
    let ug = dot(u, g);
    u.iter().zip(g).map(|(&ui, &gi)| (gi - ui * ug) / len).collect()
}

/// Contrastive alignment of prototype features to source centers.
///
/// For anchor `i` with label `y`, `l_i = -log softmax_j(v_i . f_j / tau)[y]`,
/// the softmax running over every class that has a center. The value is the
/// mean over anchors.
pub fn con_loss(
    features: &Matrix,
    labels: &[usize],
    centers: &SourceCenters,
    opts: ConOptions,
) -> Result<ConLoss> {
    if !(opts.tau > 0.0 && opts.tau.is_finite()) {
        return Err(Error::InvalidParam(format!("tau {}", opts.tau)));
    }
    let (n, h) = features.shape();
    if labels.len() != n {
        return Err(Error::InvalidShape(format!("{} labels for {n} anchors", labels.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| !centers.centers.contains_key(&y)) {
        return Err(Error::MissingCenter(y));
    }
    let classes: Vec<usize> = centers.centers.keys().copied().collect();
    let position: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(j, &k)| (k, j)).collect();
    let mut d_centers: BTreeMap<usize, Vec<f64>> = classes.iter().map(|&k| (k, vec![0.0; h])).collect();
    if n == 0 {
        return Ok(ConLoss {
            value: 0.0,
            d_features: Matrix::zeros(0, h),
            d_centers,
        });
    }

    // effective centers (optionally unit length) as rows of a matrix
    let mut center_rows = Vec::with_capacity(classes.len());
    let mut center_norms = Vec::with_capacity(classes.len());
    for k in &classes {
        let c = &centers.centers[k];
        if c.len() != h {
            return Err(Error::InvalidShape(format!("center {k} has length {}, expected {h}", c.len())));
        }
        if opts.normalize {
            let (u, l) = unit(c)?;
            center_rows.push(u);
            center_norms.push(l);
        } else {
            center_rows.push(c.clone());
            center_norms.push(1.0);
        }
    }
    let fmat = Matrix::from_rows(&center_rows)?;

    let inv_tau = 1.0 / opts.tau;
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut d_features = Matrix::zeros(n, h);
    let mut d_eff_centers = Matrix::zeros(classes.len(), h);
    for (i, &y) in labels.iter().enumerate() {
        let (v, vlen) = if opts.normalize {
            unit(features.row(i))?
        } else {
            (features.row(i).to_vec(), 1.0)
        };
        let mut z: Vec<f64> = fmat.iter_rows().map(|f| dot(&v, f) * inv_tau).collect();
        let yj = position[&y];
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        value += lse - z[yj];
        softmax_in_place(&mut z);
        z[yj] -= 1.0;
        // z now holds dl/dlogit_j; logit_j = v . f_j / tau
        let mut dv = vec![0.0; h];
        for (j, f) in fmat.iter_rows().enumerate() {
            let c = z[j] * inv_tau * inv_n;
            for (a, &fv) in dv.iter_mut().zip(f) {
                *a += c * fv;
            }
            for (b, &vv) in d_eff_centers.row_mut(j).iter_mut().zip(&v) {
                *b += c * vv;
            }
        }
        let dv = if opts.normalize { unit_backward(&v, vlen, &dv) } else { dv };
        d_features.row_mut(i).copy_from_slice(&dv);
    }
    for (j, k) in classes.iter().enumerate() {
        let g = d_eff_centers.row(j);
        let g = if opts.normalize {
            unit_backward(fmat.row(j), center_norms[j], g)
        } else {
            g.to_vec()
        };
        d_centers.insert(*k, g);
    }
    Ok(ConLoss {
        value: value * inv_n,
        d_features,
        d_centers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisLoss {
    pub value: f64,
    /// Gradient at the logits that produced `current_probs`.
    pub d_logits: Matrix,
    pub warning: Option<Warning>,
}

/// Soft-target cross-entropy `-(1/N) sum_i h_i . log p_i`.
///
/// The gradient at the logits is `((sum_k h_ik) p_i - h_i) / N`.
pub fn dis_loss(current_probs: &Matrix, soft_labels: &Matrix) -> Result<DisLoss> {
    current_probs.check_same_shape(soft_labels)?;
    let (n, k) = current_probs.shape();
    if n == 0 {
        return Ok(DisLoss {
            value: 0.0,
            d_logits: Matrix::zeros(0, k),
            warning: None,
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut clamped = 0usize;
    let mut value = 0.0;
    let mut grad = Matrix::zeros(n, k);
    for i in 0..n {
        let p = current_probs.row(i);
        let t = soft_labels.row(i);
        let mass: f64 = t.iter().sum();
        for j in 0..k {
            if t[j] != 0.0 {
                let pj = if p[j] < LOG_CLAMP {
                    clamped += 1;
                    LOG_CLAMP
                } else {
                    p[j]
                };
                value -= t[j] * pj.ln();
            }
            grad.set(i, j, (mass * p[j] - t[j]) * inv_n);
        }
    }
    let warning = (clamped > 0).then_some(Warning::LogClamped { count: clamped });
    if let Some(w) = &warning {
        log::warn!("distillation: {w}");
    }
    Ok(DisLoss {
        value: value * inv_n,
        d_logits: grad,
        warning,
    })
}
