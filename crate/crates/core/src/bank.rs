//! Prototype memory bank.
//!
//! Each detected target class keeps up to `M` raw inputs chosen by greedy
//! herding toward the class feature mean, together with the soft label the
//! model assigned them when they were stored. Stored soft labels are frozen
//! until the class is replaced.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::model::{forward, forward_features, ModelParams};
use crate::numkernel::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeEntry {
    /// Raw input-space sample.
    pub prototype: Vec<f64>,
    pub soft_label: Vec<f64>,
    pub pseudo_label: usize,
    /// 1-based herding order.
    pub selection_order: usize,
}

/// Output of [`herd_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct HerdSelection {
    /// Row indices into the candidate matrix, in selection order.
    pub indices: Vec<usize>,
    /// The selected rows, in the same order.
    pub prototypes: Matrix,
    pub shortfall: Option<Warning>,
}

/// Relative tolerance under which two candidate distances count as tied.
pub const HERD_TIE_TOL: f64 = 1e-12;

/// Greedy herding over precomputed features.
///
/// At step `m` picks the unchosen row `x` minimizing
/// `|| mean - (feature(x) + sum of chosen features) / m ||`. Ties (relative
/// difference below [`HERD_TIE_TOL`]) go to the smaller row index.
pub fn herd_select_features(features: &Matrix, m: usize) -> Vec<usize> {
    let n = features.rows();
    let h = features.cols();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; h];
    for row in features.iter_rows() {
        for (a, &v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);

    let mut chosen = Vec::with_capacity(m.min(n));
    let mut taken = vec![false; n];
    let mut running = vec![0.0; h];
    for step in 1..=m.min(n) {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in features.iter_rows().enumerate() {
            if taken[i] {
                continue;
            }
            let dist2: f64 = mean
                .iter()
                .zip(row)
                .zip(&running)
                .map(|((&mu, &g), &s)| {
                    let d = mu - (g + s) / step as f64;
                    d * d
                })
                .sum();
            // within HERD_TIE_TOL of the incumbent counts as a tie, kept by the smaller index
            if best.map_or(true, |(_, b)| dist2 < b - HERD_TIE_TOL * b) {
                best = Some((i, dist2));
            }
        }
        let (i, _) = best.expect("an unchosen row remains");
        taken[i] = true;
        chosen.push(i);
        for (s, &g) in running.iter_mut().zip(features.row(i)) {
            *s += g;
        }
    }
    chosen
}

/// Herding selection of up to `m` prototypes from one class's samples.
pub fn herd_select(x_k: &Matrix, params: &ModelParams, m: usize, class: usize) -> Result<HerdSelection> {
    if x_k.rows() == 0 {
        return Err(Error::EmptyClass(class));
    }
    if m == 0 {
        return Err(Error::InvalidParam("prototype capacity M must be >= 1".into()));
    }
    let features = forward_features(params, x_k)?;
    let indices = herd_select_features(&features, m);
    let shortfall = (x_k.rows() < m).then_some(Warning::PrototypeShortfall {
        class,
        wanted: m,
        got: x_k.rows(),
    });
    if let Some(w) = &shortfall {
        log::debug!("{w}");
    }
    Ok(HerdSelection {
        prototypes: x_k.select_rows(&indices),
        indices,
        shortfall,
    })
}

/// Flattened view of a bank for batched loss computation.
#[derive(Debug, Clone, PartialEq)]
pub struct BankTensors {
    pub prototypes: Matrix,
    pub soft_labels: Matrix,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    per_class: BTreeMap<usize, Vec<PrototypeEntry>>,
    best_cp: BTreeMap<usize, f64>,
    capacity: usize,
    seen: BTreeSet<usize>,
}

impl PrototypeBank {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParam("prototype capacity M must be >= 1".into()));
        }
        Ok(Self {
            per_class: BTreeMap::new(),
            best_cp: BTreeMap::new(),
            capacity,
            seen: BTreeSet::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `N`, the total number of stored prototypes.
    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seen_classes(&self) -> &BTreeSet<usize> {
        &self.seen
    }

    pub fn contains(&self, k: usize) -> bool {
        self.per_class.contains_key(&k)
    }

    pub fn entries(&self, k: usize) -> Option<&[PrototypeEntry]> {
        self.per_class.get(&k).map(Vec::as_slice)
    }

    pub fn best_cp(&self, k: usize) -> Option<f64> {
        self.best_cp.get(&k).copied()
    }

    fn snapshot(
        &self,
        k: usize,
        prototypes: &Matrix,
        params: &ModelParams,
    ) -> Result<Vec<PrototypeEntry>> {
        if prototypes.rows() == 0 {
            return Err(Error::EmptyClass(k));
        }
        if prototypes.rows() > self.capacity {
            return Err(Error::InvalidInput(format!(
                "{} prototypes exceed capacity {}",
                prototypes.rows(),
                self.capacity
            )));
        }
        if k >= params.num_classes() {
            return Err(Error::InvalidLabel {
                label: k,
                classes: params.num_classes(),
            });
        }
        let trace = forward(params, prototypes)?;
        Ok(prototypes
            .iter_rows()
            .zip(trace.probs.iter_rows())
            .enumerate()
            .map(|(i, (p, h))| PrototypeEntry {
                prototype: p.to_vec(),
                soft_label: h.to_vec(),
                pseudo_label: k,
                selection_order: i + 1,
            })
            .collect())
    }

    fn check_cp(cp: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&cp) {
            return Err(Error::InvalidParam(format!("cumulative probability {cp} outside [0, 1]")));
        }
        Ok(())
    }

    /// Stores a new class with soft labels snapshotted under `params`.
    pub fn insert_class(
        &self,
        k: usize,
        prototypes: &Matrix,
        params: &ModelParams,
        cp_k: f64,
    ) -> Result<PrototypeBank> {
        if self.contains(k) {
            return Err(Error::ClassAlreadyStored(k));
        }
        Self::check_cp(cp_k)?;
        let entries = self.snapshot(k, prototypes, params)?;
        let mut next = self.clone();
        next.per_class.insert(k, entries);
        next.best_cp.insert(k, cp_k);
        next.seen.insert(k);
        Ok(next)
    }

    /// Re-herds class `k` only when `cp_new` strictly exceeds its stored score.
    pub fn maybe_update_class(
        &self,
        k: usize,
        cp_new: f64,
        x_k: &Matrix,
        params: &ModelParams,
    ) -> Result<(PrototypeBank, bool)> {
        let best = self.best_cp(k).ok_or(Error::UnknownClass(k))?;
        Self::check_cp(cp_new)?;
        if cp_new <= best {
            return Ok((self.clone(), false));
        }
        let mut next = self.replace_class(k, x_k, params)?;
        next.best_cp.insert(k, cp_new);
        Ok((next, true))
    }

    /// Re-herds class `k` from `x_k` under `params` without touching its score.
    pub fn replace_class(&self, k: usize, x_k: &Matrix, params: &ModelParams) -> Result<PrototypeBank> {
        if !self.contains(k) {
            return Err(Error::UnknownClass(k));
        }
        let sel = herd_select(x_k, params, self.capacity, k)?;
        let entries = self.snapshot(k, &sel.prototypes, params)?;
        let mut next = self.clone();
        next.per_class.insert(k, entries);
        Ok(next)
    }

    /// Class-ascending, then selection-order-ascending.
    pub fn tensors(&self) -> Result<BankTensors> {
        if self.is_empty() {
            return Err(Error::EmptyBank);
        }
        let entries: Vec<&PrototypeEntry> = self.per_class.values().flatten().collect();
        let protos: Vec<&[f64]> = entries.iter().map(|e| e.prototype.as_slice()).collect();
        let soft: Vec<&[f64]> = entries.iter().map(|e| e.soft_label.as_slice()).collect();
        Ok(BankTensors {
            prototypes: Matrix::from_rows(&protos)?,
            soft_labels: Matrix::from_rows(&soft)?,
            labels: entries.iter().map(|e| e.pseudo_label).collect(),
        })
    }

    /// Inverse of [`PrototypeBank::tensors`], given the per-class scores.
    pub fn from_tensors(
        tensors: &BankTensors,
        best_cp: &BTreeMap<usize, f64>,
        capacity: usize,
    ) -> Result<PrototypeBank> {
        let mut bank = PrototypeBank::new(capacity)?;
        for (i, &k) in tensors.labels.iter().enumerate() {
            let list = bank.per_class.entry(k).or_default();
            if list.len() == capacity {
                return Err(Error::InvalidInput(format!("class {k} exceeds capacity {capacity}")));
            }
            list.push(PrototypeEntry {
                prototype: tensors.prototypes.row(i).to_vec(),
                soft_label: tensors.soft_labels.row(i).to_vec(),
                pseudo_label: k,
                selection_order: list.len() + 1,
            });
            bank.seen.insert(k);
        }
        for &k in &bank.seen {
            let cp = *best_cp.get(&k).ok_or(Error::UnknownClass(k))?;
            Self::check_cp(cp)?;
            bank.best_cp.insert(k, cp);
        }
        Ok(bank)
    }

    pub fn to_checkpoint(&self) -> BankCheckpoint {
        BankCheckpoint {
            m: self.capacity,
            classes: self
                .per_class
                .iter()
                .map(|(&k, entries)| ClassCheckpoint {
                    k,
                    best_cp: self.best_cp[&k],
                    prototypes: entries.iter().map(|e| e.prototype.clone()).collect(),
                    soft_labels: entries.iter().map(|e| e.soft_label.clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(c: BankCheckpoint) -> Result<Self> {
        let mut bank = PrototypeBank::new(c.m)?;
        for class in c.classes {
            if class.prototypes.len() != class.soft_labels.len() {
                return Err(Error::InvalidInput(format!(
                    "class {}: {} prototypes but {} soft labels",
                    class.k,
                    class.prototypes.len(),
                    class.soft_labels.len()
                )));
            }
            if class.prototypes.is_empty() || class.prototypes.len() > c.m {
                return Err(Error::InvalidInput(format!(
                    "class {} stores {} prototypes, capacity {}",
                    class.k,
                    class.prototypes.len(),
                    c.m
                )));
            }
            Self::check_cp(class.best_cp)?;
            if bank.contains(class.k) {
                return Err(Error::ClassAlreadyStored(class.k));
            }
            let entries = class
                .prototypes
                .into_iter()
                .zip(class.soft_labels)
                .enumerate()
                .map(|(i, (prototype, soft_label))| PrototypeEntry {
                    prototype,
                    soft_label,
                    pseudo_label: class.k,
                    selection_order: i + 1,
                })
                .collect();
            bank.per_class.insert(class.k, entries);
            bank.best_cp.insert(class.k, class.best_cp);
            bank.seen.insert(class.k);
        }
        Ok(bank)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint())
            .map_err(|e| Error::json(path, e))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: BankCheckpoint = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_checkpoint(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankCheckpoint {
    #[serde(rename = "M")]
    pub m: usize,
    pub classes: Vec<ClassCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCheckpoint {
    pub k: usize,
    pub best_cp: f64,
    pub prototypes: Vec<Vec<f64>>,
    pub soft_labels: Vec<Vec<f64>>,
}
