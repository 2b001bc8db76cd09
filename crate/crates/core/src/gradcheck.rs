//! Finite-difference checks of every analytic gradient in the crate.
//!
//! Each instance draws a tiny network, batch, prototype bank and source
//! centers, then compares the backward pass against central differences on
//! every parameter coordinate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::losses::{ce_loss, con_loss, dis_loss, ConOptions, SourceCenters};
use crate::model::{backward, forward, ModelParams};
use crate::numkernel::{softmax_rows, Matrix, RngStream};
use crate::trainer::{objective_gradients, HyperParams};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor per unit of loss magnitude. Central-difference round-off
/// grows with `|L|`, so coordinates whose true gradient is below
/// `REL_FLOOR * max(1, |L|)` are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceBounds {
    pub max_d: usize,
    pub max_h: usize,
    pub max_k: usize,
    pub max_bank: usize,
    pub max_batch: usize,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        Self {
            max_d: 5,
            max_h: 4,
            max_k: 6,
            max_bank: 8,
            max_batch: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub instances: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Worst error per checked quantity (`ce`, `con`, `con_centers`, `dis`, `composite`).
    pub per_loss: BTreeMap<String, f64>,
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR * max(1, |loss|))`.
pub fn rel_error(analytic: f64, numeric: f64, loss: f64) -> f64 {
    let floor = REL_FLOOR * loss.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

struct Instance {
    params: ModelParams,
    x: Matrix,
    y: Vec<usize>,
    protos: Matrix,
    soft: Matrix,
    proto_labels: Vec<usize>,
    centers: SourceCenters,
    hp: HyperParams,
}

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut RngStream) -> Result<Matrix> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| scale * rng.normal()).collect())
}

fn draw(bounds: InstanceBounds, rng: &mut RngStream) -> Result<Instance> {
    let d = 1 + rng.below(bounds.max_d);
    let h = 1 + rng.below(bounds.max_h);
    let k = 2 + rng.below(bounds.max_k - 1);
    let n = 1 + rng.below(bounds.max_batch);
    let nb = 1 + rng.below(bounds.max_bank);

    let mut params = ModelParams::init(d, h, k, rng)?;
    for b in [&mut params.b1, &mut params.b2, &mut params.bc] {
        for v in b.as_mut_slice() {
            *v = 0.3 * rng.normal();
        }
    }
    let x = gaussian(n, d, 1.0, rng)?;
    let y = (0..n).map(|_| rng.below(k)).collect();
    let protos = gaussian(nb, d, 1.0, rng)?;
    let soft = softmax_rows(&gaussian(nb, k, 1.5, rng)?)?;
    let proto_labels = (0..nb).map(|_| rng.below(k)).collect();
    let mut centers = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for c in 0..k {
        centers.insert(c, (0..h).map(|_| 0.5 * rng.normal()).collect());
        counts.insert(c, 1);
    }
    let hp = HyperParams {
        lambda: rng.uniform(0.05, 1.0),
        eta: rng.uniform(0.1, 2.0),
        normalize_features: rng.below(2) == 1,
        ..HyperParams::default()
    };
    Ok(Instance {
        params,
        x,
        y,
        protos,
        soft,
        proto_labels,
        centers: SourceCenters { centers, counts },
        hp,
    })
}

/// Worst relative error between `analytic` and central differences of `f`
/// over every coordinate of `params`.
fn compare_params(
    params: &ModelParams,
    analytic: &ModelParams,
    f: &dyn Fn(&ModelParams) -> Result<f64>,
    coords: &mut usize,
) -> Result<f64> {
    let loss = f(params)?;
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for b in 0..analytic.blocks().len() {
        for i in 0..analytic.blocks()[b].as_slice().len() {
            let orig = params.blocks()[b].as_slice()[i];
            probe.blocks_mut()[b].as_mut_slice()[i] = orig + FD_STEP;
            let up = f(&probe)?;
            probe.blocks_mut()[b].as_mut_slice()[i] = orig - FD_STEP;
            let down = f(&probe)?;
            probe.blocks_mut()[b].as_mut_slice()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(analytic.blocks()[b].as_slice()[i], numeric, loss));
            *coords += 1;
        }
    }
    Ok(worst)
}

fn check_instance(inst: &Instance, worst: &mut BTreeMap<String, f64>, coords: &mut usize) -> Result<()> {
    let p = &inst.params;
    let h = p.hidden_dim();
    let k = p.num_classes();
    let opts = ConOptions {
        tau: inst.hp.tau,
        normalize: inst.hp.normalize_features,
    };
    let mut record = |name: &str, e: f64| {
        let w = worst.entry(name.to_string()).or_insert(0.0);
        *w = w.max(e);
    };

    // cross-entropy on the labeled batch
    let trace = forward(p, &inst.x)?;
    let (_, dl) = ce_loss(&trace.logits, &inst.y)?;
    let g = backward(p, &trace, &dl, &Matrix::zeros(inst.x.rows(), h))?;
    let f = |q: &ModelParams| Ok(ce_loss(&forward(q, &inst.x)?.logits, &inst.y)?.0);
    record("ce", compare_params(p, &g, &f, coords)?);

    // alignment loss through the features of the bank prototypes
    let bt = forward(p, &inst.protos)?;
    let con = con_loss(&bt.features, &inst.proto_labels, &inst.centers, opts)?;
    let g = backward(p, &bt, &Matrix::zeros(inst.protos.rows(), k), &con.d_features)?;
    let f = |q: &ModelParams| {
        Ok(con_loss(&forward(q, &inst.protos)?.features, &inst.proto_labels, &inst.centers, opts)?.value)
    };
    record("con", compare_params(p, &g, &f, coords)?);

    // alignment loss with respect to the centers themselves
    let mut e = 0.0f64;
    for (&c, grad) in &con.d_centers {
        for j in 0..h {
            let mut probe = inst.centers.clone();
            let orig = probe.centers[&c][j];
            let mut eval = |v: f64| -> Result<f64> {
                probe.centers.get_mut(&c).expect("center exists")[j] = v;
                Ok(con_loss(&bt.features, &inst.proto_labels, &probe, opts)?.value)
            };
            let numeric = (eval(orig + FD_STEP)? - eval(orig - FD_STEP)?) / (2.0 * FD_STEP);
            e = e.max(rel_error(grad[j], numeric, con.value));
            *coords += 1;
        }
    }
    record("con_centers", e);

    // distillation against frozen soft labels
    let dis = dis_loss(&bt.probs, &inst.soft)?;
    let g = backward(p, &bt, &dis.d_logits, &Matrix::zeros(inst.protos.rows(), h))?;
    let f = |q: &ModelParams| Ok(dis_loss(&forward(q, &inst.protos)?.probs, &inst.soft)?.value);
    record("dis", compare_params(p, &g, &f, coords)?);

    // the full training objective, exactly as the trainer computes it
    let bank = Some((&inst.protos, &inst.soft, inst.proto_labels.as_slice()));
    let (_, g, _) = objective_gradients(p, &inst.x, &inst.y, bank, &inst.centers, &inst.hp)?;
    let f = |q: &ModelParams| Ok(objective_gradients(q, &inst.x, &inst.y, bank, &inst.centers, &inst.hp)?.0.total);
    record("composite", compare_params(p, &g, &f, coords)?);
    Ok(())
}

/// Runs `instances` random checks seeded from `seed`.
pub fn run_gradcheck(seed: u64, instances: usize, bounds: InstanceBounds) -> Result<GradcheckReport> {
    let root = RngStream::new(seed, "gradcheck");
    let mut per_loss = BTreeMap::new();
    let mut coordinates = 0;
    for i in 0..instances {
        let inst = draw(bounds, &mut root.derive(&format!("instance{i}")))?;
        check_instance(&inst, &mut per_loss, &mut coordinates)?;
    }
    let max_rel_error = per_loss.values().copied().fold(0.0, f64::max);
    Ok(GradcheckReport {
        instances,
        coordinates,
        max_rel_error,
        per_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_error_floor() {
        assert_eq!(rel_error(1.0, 1.0, 0.0), 0.0);
        assert!((rel_error(2.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((rel_error(1e-9, 0.0, 0.5) - 1e-3).abs() < 1e-12);
        assert!((rel_error(1e-9, 0.0, 10.0) - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn small_suite_passes() {
        let r = run_gradcheck(3, 10, InstanceBounds::default()).unwrap();
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
        assert_eq!(r.per_loss.len(), 5);
    }
}
