//! Source pretraining and the per-step continual adaptation loop.
//!
//! One time step runs:
//!
//! 1. shared-class detection on the incoming batch,
//! 2. pseudo labels restricted to the detected classes,
//! 3. prototype bank insertion / gated update,
//! 4. `epochs_per_step` epochs of SGD on `ce + lambda * con + eta * dis`,
//!    refreshing pseudo labels, prototypes and source centers on their periods.
//!
//! Only the current batch is handed to [`adapt_step`]; earlier target data
//! is reachable solely through the prototype bank.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bank::{herd_select, PrototypeBank};
use crate::data::{IncrementalStream, LabeledDataset};
use crate::detector::{cumulative_probabilities, detect_shared, hbw_threshold, CumulativeProbs, SharedClassSet};
use crate::error::{Error, Result, Warning};
use crate::eval::{accuracy, s1_accuracy, scd_tcd, step_level_accuracy, LossSummary, RunReport, StepReport};
use crate::losses::{ce_loss, con_loss, dis_loss, source_centers, total_loss, ConOptions, LossBreakdown, SourceCenters};
use crate::model::{backward, forward, predict, ModelParams};
use crate::numkernel::{Matrix, RngStream, SgdState};
use crate::pseudo::{pseudo_label_pipeline, PseudoLabeling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Full method: threshold detection, pseudo labels, prototype alignment and replay.
    Proca,
    /// Pretrained source model, no adaptation.
    SourceOnly,
    /// Pseudo labels over all source classes (detection disabled).
    NoScd,
    /// Variance-maximizing threshold instead of the fixed `alpha`.
    Hbw,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proca" => Ok(Method::Proca),
            "source_only" => Ok(Method::SourceOnly),
            "no_scd" => Ok(Method::NoScd),
            "hbw" => Ok(Method::Hbw),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}` (expected proca, source_only, no_scd, hbw)"
            ))),
        }
    }
}

/// When label prototypes are (re)selected within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeSchedule {
    /// Built at step start, refreshed every `refresh_prototypes` epochs.
    Periodic,
    /// Refreshed at the start of every epoch.
    EveryEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub lambda: f64,
    pub eta: f64,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub prototypes_per_class: usize,
    pub tau: f64,
    pub normalize_features: bool,
    pub epochs_per_step: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub refresh_pseudo: usize,
    pub refresh_prototypes: usize,
    pub refresh_centers: usize,
    pub prototype_schedule: PrototypeSchedule,
    pub seed: u64,
    pub method: Method,
    pub use_con: bool,
    pub use_dis: bool,
    pub hidden_dim: usize,
    pub pretrain_epochs: usize,
    pub pretrain_learning_rate: f64,
    pub pretrain_batch_size: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            eta: 1.0,
            alpha: 0.15,
            prototypes_per_class: 10,
            tau: 0.1,
            normalize_features: false,
            epochs_per_step: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            weight_decay: 1e-6,
            refresh_pseudo: 4,
            refresh_prototypes: 7,
            refresh_centers: 5,
            prototype_schedule: PrototypeSchedule::Periodic,
            seed: 0,
            method: Method::Proca,
            use_con: true,
            use_dis: true,
            hidden_dim: 64,
            pretrain_epochs: 30,
            pretrain_learning_rate: 0.01,
            pretrain_batch_size: 32,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::InvalidConfig(format!("hyperparams.{field}: {why}")));
        let positive = [
            ("lambda", self.lambda, true),
            ("eta", self.eta, true),
            ("tau", self.tau, false),
            ("learning_rate", self.learning_rate, false),
            ("pretrain_learning_rate", self.pretrain_learning_rate, false),
            ("weight_decay", self.weight_decay, true),
        ];
        for (name, v, zero_ok) in positive {
            if !v.is_finite() || v < 0.0 || (!zero_ok && v == 0.0) {
                return bad(name, "must be a finite positive number");
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", "must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", "must lie in [0, 1)");
        }
        let counts = [
            ("M", self.prototypes_per_class),
            ("batch_size", self.batch_size),
            ("refresh_pseudo", self.refresh_pseudo),
            ("refresh_prototypes", self.refresh_prototypes),
            ("refresh_centers", self.refresh_centers),
            ("hidden_dim", self.hidden_dim),
            ("pretrain_batch_size", self.pretrain_batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return bad(name, "must be >= 1");
            }
        }
        if self.batch_size < 2 {
            return bad("batch_size", "must be >= 2 to hold source and target samples");
        }
        Ok(())
    }

    fn con_options(&self) -> ConOptions {
        ConOptions {
            tau: self.tau,
            normalize: self.normalize_features,
        }
    }

    fn effective_lambda(&self) -> f64 {
        if self.use_con {
            self.lambda
        } else {
            0.0
        }
    }

    fn effective_eta(&self) -> f64 {
        if self.use_dis {
            self.eta
        } else {
            0.0
        }
    }
}

fn new_sgd(params: &ModelParams, lr: f64, hp: &HyperParams) -> Result<SgdState> {
    SgdState::new(&params.shapes(), lr, hp.momentum, hp.weight_decay)
}

fn sgd_apply(state: &mut SgdState, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
    let mut p = params.blocks_mut();
    let mut refs: Vec<&mut Matrix> = p.iter_mut().map(|m| &mut **m).collect();
    state.apply(&mut refs, &grads.blocks())
}

/// Trains `{G, C}` on the labeled source with mini-batch cross-entropy.
///
/// Epoch `e` shuffles with `rng.derive("epoch<e>")`.
pub fn pretrain_source(source: &LabeledDataset, hp: &HyperParams, rng: &mut RngStream) -> Result<ModelParams> {
    hp.validate()?;
    let present = source.classes_present();
    if let Some(k) = (0..source.num_classes).find(|k| !present.contains(k)) {
        return Err(Error::IncompleteSource(k));
    }
    let mut params = ModelParams::init(source.dim(), hp.hidden_dim, source.num_classes, &mut rng.derive("init"))?;
    let mut sgd = new_sgd(&params, hp.pretrain_learning_rate, hp)?;
    for epoch in 1..=hp.pretrain_epochs {
        let order = rng.derive(&format!("epoch{epoch}")).permutation(source.len());
        for chunk in order.chunks(hp.pretrain_batch_size) {
            let x = source.features.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| source.labels[i]).collect();
            let trace = forward(&params, &x)?;
            let (_, d_logits) = ce_loss(&trace.logits, &y)?;
            let grads = backward(&params, &trace, &d_logits, &Matrix::zeros(x.rows(), hp.hidden_dim))?;
            sgd_apply(&mut sgd, &mut params, &grads)?;
        }
    }
    Ok(params)
}

/// Row indices of one mini-batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// Splits one epoch into mini-batches of `batch_size`.
///
/// Each batch holds up to `batch_size / 2` target samples (every target sample
/// exactly once per epoch) and fills the rest from a cycling shuffled source
/// order, never repeating a source row inside one batch. Target order is drawn
/// first, then source order, both from `rng`.
pub fn plan_batches(n_source: usize, n_target: usize, batch_size: usize, rng: &mut RngStream) -> Vec<Batch> {
    let per_target = (batch_size / 2).max(1);
    let target_order = rng.permutation(n_target);
    let mut source_order = rng.permutation(n_source);
    let mut cursor = 0;
    let mut batches = Vec::new();
    for chunk in target_order.chunks(per_target) {
        let want = batch_size.saturating_sub(chunk.len()).min(n_source);
        let mut src = Vec::with_capacity(want);
        while src.len() < want {
            if cursor == source_order.len() {
                source_order = rng.permutation(n_source);
                cursor = 0;
            }
            let i = source_order[cursor];
            cursor += 1;
            if !src.contains(&i) {
                src.push(i);
            }
        }
        batches.push(Batch {
            source: src,
            target: chunk.to_vec(),
        });
    }
    batches
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub cumulative: CumulativeProbs,
    pub detected_shared: SharedClassSet,
    /// Final pseudo label of every target sample (empty for `source_only`).
    pub pseudo_labels: Vec<usize>,
    /// One entry per epoch (empty for `source_only`).
    pub loss_curves: Vec<LossBreakdown>,
    pub bank_size_after: usize,
    pub classes_inserted: Vec<usize>,
    pub classes_updated: Vec<usize>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub params: ModelParams,
    pub bank: PrototypeBank,
    pub diagnostics: StepDiagnostics,
}

fn detect(params: &ModelParams, x: &Matrix, hp: &HyperParams) -> Result<(CumulativeProbs, SharedClassSet)> {
    let cp = cumulative_probabilities(params, x)?;
    let shared = match hp.method {
        Method::NoScd => SharedClassSet::all(cp.num_classes()),
        Method::Hbw => match hbw_threshold(&cp) {
            Err(Error::DegenerateDetection) => {
                let mut s = SharedClassSet::all(cp.num_classes());
                s.warning = Some(Warning::DegenerateDetection);
                s
            }
            other => other?,
        },
        Method::Proca | Method::SourceOnly => detect_shared(&cp, hp.alpha)?,
    };
    if shared.is_empty() {
        return Err(Error::NoSharedClasses);
    }
    Ok((cp, shared))
}

/// Gradient and loss terms of one optimization step.
pub fn objective_gradients(
    params: &ModelParams,
    batch_x: &Matrix,
    batch_y: &[usize],
    bank: Option<(&Matrix, &Matrix, &[usize])>,
    centers: &SourceCenters,
    hp: &HyperParams,
) -> Result<(LossBreakdown, ModelParams, Vec<Warning>)> {
    let lambda = hp.effective_lambda();
    let eta = hp.effective_eta();
    let mut warnings = Vec::new();

    let trace = forward(params, batch_x)?;
    let (ce, d_logits) = ce_loss(&trace.logits, batch_y)?;
    let mut grads = backward(params, &trace, &d_logits, &Matrix::zeros(batch_x.rows(), params.hidden_dim()))?;

    let (mut con, mut dis) = (0.0, 0.0);
    if let Some((protos, soft, labels)) = bank.filter(|_| lambda > 0.0 || eta > 0.0) {
        let bt = forward(params, protos)?;
        let mut d_feat = Matrix::zeros(protos.rows(), params.hidden_dim());
        let mut d_log = Matrix::zeros(protos.rows(), params.num_classes());
        if lambda > 0.0 {
            let c = con_loss(&bt.features, labels, centers, hp.con_options())?;
            con = c.value;
            d_feat.add_scaled(&c.d_features, lambda)?;
        }
        if eta > 0.0 {
            let d = dis_loss(&bt.probs, soft)?;
            dis = d.value;
            d_log.add_scaled(&d.d_logits, eta)?;
            warnings.extend(d.warning);
        }
        let g = backward(params, &bt, &d_log, &d_feat)?;
        grads.add_scaled(&g, 1.0)?;
    }
    let losses = total_loss(ce, con, dis, lambda, eta)?;
    Ok((losses, grads, warnings))
}

fn class_rows(x: &Matrix, labels: &PseudoLabeling, k: usize) -> Matrix {
    x.select_rows(&labels.members(k))
}

/// Runs one time step of continual adaptation on `target`.
///
/// Randomness: epoch `e` batches with `rng.derive("epoch<e>")`.
pub fn adapt_step(
    params: &ModelParams,
    bank: &PrototypeBank,
    source: &LabeledDataset,
    target: &Matrix,
    hp: &HyperParams,
    rng: &mut RngStream,
) -> Result<StepOutcome> {
    hp.validate()?;
    if target.rows() == 0 {
        return Err(Error::EmptyInput("target batch".into()));
    }
    if bank.capacity() != hp.prototypes_per_class {
        return Err(Error::InvalidConfig(format!(
            "bank capacity {} differs from M = {}",
            bank.capacity(),
            hp.prototypes_per_class
        )));
    }
    let (cp, shared) = detect(params, target, hp)?;
    let mut warnings: Vec<Warning> = shared.warning.iter().cloned().collect();

    if hp.method == Method::SourceOnly {
        return Ok(StepOutcome {
            params: params.clone(),
            bank: bank.clone(),
            diagnostics: StepDiagnostics {
                cumulative: cp,
                detected_shared: shared,
                pseudo_labels: Vec::new(),
                loss_curves: Vec::new(),
                bank_size_after: bank.len(),
                classes_inserted: Vec::new(),
                classes_updated: Vec::new(),
                warnings,
            },
        });
    }

    let mut pseudo = pseudo_label_pipeline(params, target, &shared)?;

    // bank construction and gated updates, under the pre-adaptation model
    let mut bank = bank.clone();
    let mut inserted = Vec::new();
    let mut updated = Vec::new();
    for &k in &shared.classes {
        let x_k = class_rows(target, &pseudo, k);
        if x_k.rows() == 0 {
            warnings.push(Warning::EmptyPseudoClass { class: k });
            continue;
        }
        let cp_k = cp.normalized[k];
        if bank.contains(k) {
            let (next, fired) = bank.maybe_update_class(k, cp_k, &x_k, params)?;
            bank = next;
            if fired {
                updated.push(k);
                if x_k.rows() < hp.prototypes_per_class {
                    warnings.push(Warning::PrototypeShortfall {
                        class: k,
                        wanted: hp.prototypes_per_class,
                        got: x_k.rows(),
                    });
                }
            }
        } else {
            let sel = herd_select(&x_k, params, hp.prototypes_per_class, k)?;
            warnings.extend(sel.shortfall.clone());
            bank = bank.insert_class(k, &sel.prototypes, params, cp_k)?;
            inserted.push(k);
        }
    }
    let owned: BTreeSet<usize> = inserted.iter().chain(&updated).copied().collect();

    let mut params = params.clone();
    let mut centers = source_centers(&params, source)?;
    let mut sgd = new_sgd(&params, hp.learning_rate, hp)?;
    let mut loss_curves = Vec::with_capacity(hp.epochs_per_step);

    for epoch in 1..=hp.epochs_per_step {
        if epoch % hp.refresh_pseudo == 0 {
            pseudo = pseudo_label_pipeline(&params, target, &shared)?;
        }
        let refresh_protos = match hp.prototype_schedule {
            PrototypeSchedule::Periodic => epoch % hp.refresh_prototypes == 0,
            PrototypeSchedule::EveryEpoch => true,
        };
        if refresh_protos {
            for &k in &owned {
                let x_k = class_rows(target, &pseudo, k);
                if x_k.rows() > 0 {
                    bank = bank.replace_class(k, &x_k, &params)?;
                }
            }
        }
        if epoch % hp.refresh_centers == 0 {
            centers = source_centers(&params, source)?;
        }

        let tensors = if bank.is_empty() { None } else { Some(bank.tensors()?) };
        let bank_view = tensors
            .as_ref()
            .map(|t| (&t.prototypes, &t.soft_labels, t.labels.as_slice()));

        let batches = plan_batches(source.len(), target.rows(), hp.batch_size, &mut rng.derive(&format!("epoch{epoch}")));
        let mut sums = [0.0f64; 4];
        for b in &batches {
            let xs = source.features.select_rows(&b.source);
            let xt = target.select_rows(&b.target);
            let x = xs.vstack(&xt)?;
            let y: Vec<usize> = b
                .source
                .iter()
                .map(|&i| source.labels[i])
                .chain(b.target.iter().map(|&i| pseudo.assignments[i]))
                .collect();
            let (losses, grads, w) = objective_gradients(&params, &x, &y, bank_view, &centers, hp)?;
            for wn in w {
                if !warnings.contains(&wn) {
                    warnings.push(wn);
                }
            }
            sgd_apply(&mut sgd, &mut params, &grads)?;
            for (s, v) in sums.iter_mut().zip([losses.ce, losses.con, losses.dis, losses.total]) {
                *s += v;
            }
        }
        let n = batches.len().max(1) as f64;
        loss_curves.push(total_loss(
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            hp.effective_lambda(),
            hp.effective_eta(),
        )?);
    }

    Ok(StepOutcome {
        params,
        diagnostics: StepDiagnostics {
            cumulative: cp,
            detected_shared: shared,
            pseudo_labels: pseudo.assignments,
            loss_curves,
            bank_size_after: bank.len(),
            classes_inserted: inserted,
            classes_updated: updated,
            warnings,
        },
        bank,
    })
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub pretrained: ModelParams,
    pub params: ModelParams,
    pub bank: PrototypeBank,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Options for [`run_stream_with`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions<'a> {
    /// Skip pretraining and start from these parameters.
    pub pretrained: Option<ModelParams>,
    /// Write `model_step<t>.json` / `bank_step<t>.json` here after every step.
    pub checkpoint_dir: Option<&'a Path>,
    /// Embedded verbatim in the report; defaults to the hyperparameters.
    pub config_echo: Option<serde_json::Value>,
}

/// Pretrains exactly as [`run_stream`] does for `hp.seed`, so the result can
/// be saved and passed back through [`RunOptions::pretrained`].
pub fn pretrain_for_run(source: &LabeledDataset, hp: &HyperParams) -> Result<ModelParams> {
    pretrain_source(source, hp, &mut RngStream::new(hp.seed, "run").derive("pretrain"))
}

pub fn run_stream(source: &LabeledDataset, stream: &IncrementalStream, hp: &HyperParams) -> Result<RunOutput> {
    run_stream_with(source, stream, hp, RunOptions::default())
}

/// Pretrains (unless given a model), folds [`adapt_step`] over the stream,
/// and evaluates after every step on all target data seen so far.
///
/// Randomness: `RngStream::new(hp.seed, "run")`, with children `"pretrain"`
/// and `"step<t>"`.
pub fn run_stream_with(
    source: &LabeledDataset,
    stream: &IncrementalStream,
    hp: &HyperParams,
    opts: RunOptions<'_>,
) -> Result<RunOutput> {
    hp.validate()?;
    stream.validate()?;
    if stream.num_classes != source.num_classes {
        return Err(Error::InvalidInput(format!(
            "stream has {} classes, source has {}",
            stream.num_classes, source.num_classes
        )));
    }
    let root = RngStream::new(hp.seed, "run");
    let pretrained = match opts.pretrained {
        Some(p) => p,
        None => pretrain_for_run(source, hp)?,
    };
    if let Some(dir) = opts.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        pretrained.save(&dir.join("model_pretrained.json"))?;
    }

    let mut params = pretrained.clone();
    let mut bank = PrototypeBank::new(hp.prototypes_per_class)?;
    let mut per_step = Vec::with_capacity(stream.num_steps());
    let mut diagnostics = Vec::with_capacity(stream.num_steps());
    let mut s1_base = None;
    for (t0, step) in stream.steps.iter().enumerate() {
        let t = t0 + 1;
        let out = adapt_step(&params, &bank, source, &step.features, hp, &mut root.derive(&format!("step{t}")))?;
        params = out.params;
        bank = out.bank;
        let diag = out.diagnostics;

        if let Some(dir) = opts.checkpoint_dir {
            params.save(&dir.join(format!("model_step{t}.json")))?;
            bank.save(&dir.join(format!("bank_step{t}.json")))?;
        }

        let detected: BTreeSet<usize> = diag.detected_shared.classes.iter().copied().collect();
        let (scd, tcd) = scd_tcd(&detected, &step.true_classes)?;
        let acc = step_level_accuracy(&params, stream, t)?;
        let s1 = s1_accuracy(&params, stream, t)?;
        if t == 1 {
            s1_base = s1;
        }
        let pseudo_accuracy = pseudo_label_accuracy(&diag.pseudo_labels, &step.hidden_labels)?;
        if let (Some(first), Some(last)) = (diag.loss_curves.first(), diag.loss_curves.last()) {
            if last.total > first.total {
                log::info!("step {t}: total loss rose from {} to {}", first.total, last.total);
            }
        }
        log::info!(
            "step {t}: detected {:?}, accuracy {:?}, s1 {:?}, bank {}",
            diag.detected_shared.classes,
            acc,
            s1,
            diag.bank_size_after
        );
        per_step.push(StepReport {
            step_index: t,
            detected_classes: diag.detected_shared.classes.clone(),
            true_classes: step.true_classes.iter().copied().collect(),
            step_level_accuracy: acc,
            s1_accuracy: s1,
            scd_accuracy: scd,
            tcd_accuracy: tcd,
            accuracy_drop_from_step1: s1_base.zip(s1).map(|(a, b)| a - b),
            pseudo_accuracy,
            bank_size_after: diag.bank_size_after,
            loss_summary: summarize(&diag.loss_curves),
            warnings: diag.warnings.iter().map(ToString::to_string).collect(),
        });
        diagnostics.push(diag);
    }

    let last = per_step.last().expect("stream has at least one step");
    let report = RunReport {
        final_accuracy: last.step_level_accuracy,
        final_s1_accuracy: last.s1_accuracy,
        config_echo: match opts.config_echo {
            Some(v) => v,
            None => serde_json::to_value(hp).map_err(|e| Error::json("config_echo", e))?,
        },
        seed: hp.seed,
        per_step,
    };
    report.check_invariants()?;
    Ok(RunOutput {
        report,
        pretrained,
        params,
        bank,
        diagnostics,
    })
}

fn pseudo_label_accuracy(pseudo: &[usize], truth: &[Option<usize>]) -> Result<Option<f64>> {
    if pseudo.is_empty() {
        return Ok(None);
    }
    let (p, y): (Vec<usize>, Vec<usize>) = pseudo
        .iter()
        .zip(truth)
        .filter_map(|(&p, y)| y.map(|y| (p, y)))
        .unzip();
    if y.is_empty() {
        return Ok(None);
    }
    accuracy(&p, &y).map(Some)
}

fn summarize(curves: &[LossBreakdown]) -> Option<LossSummary> {
    let (first, last) = (curves.first()?, curves.last()?);
    Some(LossSummary {
        first_epoch_total: first.total,
        last_epoch_total: last.total,
        last_epoch_ce: last.ce,
        last_epoch_con: last.con,
        last_epoch_dis: last.dis,
    })
}

/// Accuracy of `params` on a labeled dataset.
pub fn dataset_accuracy(params: &ModelParams, ds: &LabeledDataset) -> Result<f64> {
    accuracy(&predict(params, &ds.features)?, &ds.labels)
}

/// Per-class counts, handy for diagnostics.
pub fn label_histogram(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &y in labels {
        *h.entry(y).or_default() += 1;
    }
    h
}
