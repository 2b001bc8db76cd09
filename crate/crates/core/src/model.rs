//! Two-layer tanh feature extractor `G` followed by a linear classifier `C`,
//! with a hand-written reverse pass.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{softmax_in_place, Matrix, RngStream};

/// Parameters of `G = {w1, b1, w2, b2}` and `C = {wc, bc}`.
///
/// Biases are stored as `1 x n` matrices so every block can go through the
/// same optimizer path.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub wc: Matrix,
    pub bc: Matrix,
}

/// Number of parameter blocks in [`ModelParams`].
pub const NUM_BLOCKS: usize = 6;

impl ModelParams {
    pub fn zeros(d: usize, h: usize, k: usize) -> Self {
        Self {
            w1: Matrix::zeros(d, h),
            b1: Matrix::zeros(1, h),
            w2: Matrix::zeros(h, h),
            b2: Matrix::zeros(1, h),
            wc: Matrix::zeros(h, k),
            bc: Matrix::zeros(1, k),
        }
    }

    /// Uniform Glorot initialization, zero biases.
    pub fn init(d: usize, h: usize, k: usize, rng: &mut RngStream) -> Result<Self> {
        if d == 0 || h == 0 || k == 0 {
            return Err(Error::InvalidShape(format!("model dims d={d} h={h} K={k}")));
        }
        let mut p = Self::zeros(d, h, k);
        for w in [&mut p.w1, &mut p.w2, &mut p.wc] {
            let s = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            for v in w.as_mut_slice() {
                *v = rng.uniform(-s, s);
            }
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.wc.cols()
    }

    pub fn blocks(&self) -> [&Matrix; NUM_BLOCKS] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.wc, &self.bc]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix; NUM_BLOCKS] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.wc,
            &mut self.bc,
        ]
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.blocks().iter().map(|b| b.shape()).collect()
    }

    /// `self += s * other`, block by block.
    pub fn add_scaled(&mut self, other: &ModelParams, s: f64) -> Result<()> {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_scaled(b, s)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.is_finite())
    }

    fn check_consistent(&self) -> Result<()> {
        let (d, h, k) = (self.input_dim(), self.hidden_dim(), self.num_classes());
        let expect = [(d, h), (1, h), (h, h), (1, h), (h, k), (1, k)];
        if d == 0 || h == 0 || k == 0 || self.shapes() != expect {
            return Err(Error::InvalidShape(format!(
                "inconsistent parameter blocks {:?}",
                self.shapes()
            )));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            d: self.input_dim(),
            h: self.hidden_dim(),
            k: self.num_classes(),
            w1: self.w1.as_slice().to_vec(),
            b1: self.b1.as_slice().to_vec(),
            w2: self.w2.as_slice().to_vec(),
            b2: self.b2.as_slice().to_vec(),
            wc: self.wc.as_slice().to_vec(),
            bc: self.bc.as_slice().to_vec(),
        }
    }

    pub fn from_checkpoint(c: ModelCheckpoint) -> Result<Self> {
        let p = Self {
            w1: Matrix::from_vec(c.d, c.h, c.w1)?,
            b1: Matrix::from_vec(1, c.h, c.b1)?,
            w2: Matrix::from_vec(c.h, c.h, c.w2)?,
            b2: Matrix::from_vec(1, c.h, c.b2)?,
            wc: Matrix::from_vec(c.h, c.k, c.wc)?,
            bc: Matrix::from_vec(1, c.k, c.bc)?,
        };
        p.check_consistent()?;
        if !p.is_finite() {
            return Err(Error::InvalidNumeric("checkpoint parameters".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint())
            .map_err(|e| Error::json(path, e))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: ModelCheckpoint = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_checkpoint(c)
    }
}

/// On-disk model layout: dimensions plus row-major parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub d: usize,
    pub h: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    #[serde(rename = "Wc")]
    pub wc: Vec<f64>,
    pub bc: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub inputs: Matrix,
    /// `tanh(X W1 + b1)`.
    pub hidden: Matrix,
    /// `G(X)`, `n x h`.
    pub features: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

fn check_inputs(params: &ModelParams, x: &Matrix) -> Result<()> {
    if x.cols() != params.input_dim() {
        return Err(Error::InvalidShape(format!(
            "input has {} columns, model expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidNumeric("model input".into()));
    }
    Ok(())
}

fn dense_tanh(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut z = x.matmul(w)?;
    z.add_row_broadcast(b)?;
    Ok(z.map(f64::tanh))
}

/// `G(X)` only.
pub fn forward_features(params: &ModelParams, x: &Matrix) -> Result<Matrix> {
    check_inputs(params, x)?;
    let a1 = dense_tanh(x, &params.w1, &params.b1)?;
    dense_tanh(&a1, &params.w2, &params.b2)
}

pub fn forward(params: &ModelParams, x: &Matrix) -> Result<ForwardTrace> {
    check_inputs(params, x)?;
    let hidden = dense_tanh(x, &params.w1, &params.b1)?;
    let features = dense_tanh(&hidden, &params.w2, &params.b2)?;
    let mut logits = features.matmul(&params.wc)?;
    logits.add_row_broadcast(&params.bc)?;
    if !logits.is_finite() {
        return Err(Error::InvalidNumeric("logits".into()));
    }
    let mut probs = logits.clone();
    for r in 0..probs.rows() {
        softmax_in_place(probs.row_mut(r));
    }
    Ok(ForwardTrace {
        inputs: x.clone(),
        hidden,
        features,
        logits,
        probs,
    })
}

/// Argmax class per row; ties resolve to the smaller index.
pub fn predict(params: &ModelParams, x: &Matrix) -> Result<Vec<usize>> {
    let t = forward(params, x)?;
    Ok(t.logits.iter_rows().map(argmax).collect())
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Gradients of `sum(d_logits * logits) + sum(d_features * features)` with
/// respect to every parameter block, summed over the batch.
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    d_logits: &Matrix,
    d_features: &Matrix,
) -> Result<ModelParams> {
    trace.logits.check_same_shape(d_logits)?;
    trace.features.check_same_shape(d_features)?;

    let d_wc = trace.features.t_matmul(d_logits)?;
    let d_bc = d_logits.col_sums();

    let mut d_z2 = d_logits.matmul_t(&params.wc)?;
    d_z2.add_scaled(d_features, 1.0)?;
    for (g, &q) in d_z2.as_mut_slice().iter_mut().zip(trace.features.as_slice()) {
        *g *= 1.0 - q * q;
    }
    let d_w2 = trace.hidden.t_matmul(&d_z2)?;
    let d_b2 = d_z2.col_sums();

    let mut d_z1 = d_z2.matmul_t(&params.w2)?;
    for (g, &a) in d_z1.as_mut_slice().iter_mut().zip(trace.hidden.as_slice()) {
        *g *= 1.0 - a * a;
    }
    let d_w1 = trace.inputs.t_matmul(&d_z1)?;
    let d_b1 = d_z1.col_sums();

    Ok(ModelParams {
        w1: d_w1,
        b1: d_b1,
        w2: d_w2,
        b2: d_b2,
        wc: d_wc,
        bc: d_bc,
    })
}
