use std::collections::BTreeSet;

use proca_core::bank::PrototypeBank;
use proca_core::detector::cumulative_probabilities;
use proca_core::eval::report_json;
use proca_core::losses::ce_loss;
use proca_core::model::{backward, forward, ModelParams};
use proca_core::numkernel::{Matrix, RngStream, SgdState};
use proca_core::pseudo::pseudo_label_pipeline;
use proca_core::trainer::{
    adapt_step, dataset_accuracy, plan_batches, pretrain_source, run_stream, run_stream_with, HyperParams, Method,
    PrototypeSchedule, RunOptions,
};
use proca_core::{detect_shared, gen_synthetic, Error, LabeledDataset, SynthConfig};

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        num_classes: 6,
        d: 4,
        shared_per_step: 2,
        num_steps: 2,
        private_source_classes: 2,
        samples_per_class_source: 20,
        samples_per_class_target: 12,
        seed,
        ..SynthConfig::default()
    }
}

fn small_hp(seed: u64) -> HyperParams {
    HyperParams {
        epochs_per_step: 5,
        hidden_dim: 8,
        pretrain_epochs: 15,
        prototypes_per_class: 3,
        batch_size: 16,
        learning_rate: 5e-3,
        seed,
        ..HyperParams::default()
    }
}

#[test]
fn pretraining_fits_separable_source() {
    let mut rng = RngStream::new(1, "separable");
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..100 {
        let y = i % 2;
        let c = if y == 0 { -2.0 } else { 2.0 };
        rows.push(vec![c + 0.5 * rng.normal(), 0.5 * rng.normal()]);
        labels.push(y);
    }
    let ds = LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap();
    let hp = HyperParams {
        pretrain_epochs: 50,
        hidden_dim: 8,
        ..HyperParams::default()
    };
    let params = pretrain_source(&ds, &hp, &mut RngStream::new(0, "pretrain")).unwrap();
    assert!(dataset_accuracy(&params, &ds).unwrap() >= 0.99);
}

#[test]
fn pretraining_needs_every_class() {
    let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
    let ds = LabeledDataset::new(x, vec![0, 0], 3).unwrap();
    let r = pretrain_source(&ds, &small_hp(0), &mut RngStream::new(0, "p"));
    assert!(matches!(r, Err(Error::IncompleteSource(1))));
}

#[test]
fn adapt_step_contract() {
    let (source, stream) = gen_synthetic(&small_synth(3)).unwrap();
    let hp = small_hp(3);
    let params = pretrain_source(&source, &hp, &mut RngStream::new(3, "pre")).unwrap();
    let bank = PrototypeBank::new(hp.prototypes_per_class).unwrap();
    let (p0, b0) = (params.clone(), bank.clone());
    let step = &stream.steps[0];
    let out = adapt_step(&params, &bank, &source, &step.features, &hp, &mut RngStream::new(3, "s")).unwrap();

    // inputs untouched, parameters moved
    assert_eq!(params, p0);
    assert_eq!(bank, b0);
    assert_ne!(out.params, params);
    assert!(out.params.is_finite());

    let d = &out.diagnostics;
    assert_eq!(d.loss_curves.len(), hp.epochs_per_step);
    assert_eq!(d.pseudo_labels.len(), step.features.rows());
    assert!(d.pseudo_labels.iter().all(|y| d.detected_shared.contains(*y)));
    assert_eq!(d.bank_size_after, out.bank.len());
    assert!(out.bank.len() <= hp.prototypes_per_class * d.detected_shared.len());
    let stored: BTreeSet<usize> = out.bank.seen_classes().clone();
    assert!(stored.iter().all(|k| d.detected_shared.contains(*k)));
    for l in &d.loss_curves {
        assert!(l.total.is_finite());
        assert!((l.total - (l.ce + l.lambda * l.con + l.eta * l.dis)).abs() < 1e-12);
    }
}

#[test]
fn ce_only_matches_a_plain_training_loop() {
    let (source, stream) = gen_synthetic(&small_synth(5)).unwrap();
    let hp = HyperParams {
        use_con: false,
        use_dis: false,
        ..small_hp(5)
    };
    let params = pretrain_source(&source, &hp, &mut RngStream::new(5, "pre")).unwrap();
    let target = &stream.steps[0].features;
    let rng = RngStream::new(5, "step");
    let bank = PrototypeBank::new(hp.prototypes_per_class).unwrap();
    let out = adapt_step(&params, &bank, &source, target, &hp, &mut rng.clone()).unwrap();

    // the same schedule, written out by hand with cross-entropy only
    let shared = detect_shared(&cumulative_probabilities(&params, target).unwrap(), hp.alpha).unwrap();
    let mut p: ModelParams = params.clone();
    let mut pseudo = pseudo_label_pipeline(&p, target, &shared).unwrap();
    let mut sgd = SgdState::new(&p.shapes(), hp.learning_rate, hp.momentum, hp.weight_decay).unwrap();
    for epoch in 1..=hp.epochs_per_step {
        if epoch % hp.refresh_pseudo == 0 {
            pseudo = pseudo_label_pipeline(&p, target, &shared).unwrap();
        }
        let batches = plan_batches(source.len(), target.rows(), hp.batch_size, &mut rng.derive(&format!("epoch{epoch}")));
        for b in batches {
            let x = source.features.select_rows(&b.source).vstack(&target.select_rows(&b.target)).unwrap();
            let y: Vec<usize> = b
                .source
                .iter()
                .map(|&i| source.labels[i])
                .chain(b.target.iter().map(|&i| pseudo.assignments[i]))
                .collect();
            let trace = forward(&p, &x).unwrap();
            let (_, dl) = ce_loss(&trace.logits, &y).unwrap();
            let g = backward(&p, &trace, &dl, &Matrix::zeros(x.rows(), hp.hidden_dim)).unwrap();
            let mut blocks = p.blocks_mut();
            let mut refs: Vec<&mut Matrix> = blocks.iter_mut().map(|m| &mut **m).collect();
            sgd.apply(&mut refs, &g.blocks()).unwrap();
        }
    }
    assert_eq!(out.params, p);
    assert_eq!(out.diagnostics.pseudo_labels, pseudo.assignments);
}

#[test]
fn batches_cover_target_once_and_never_repeat_source() {
    let mut rng = RngStream::new(0, "plan");
    for (ns, nt, bs) in [(30, 17, 8), (5, 40, 16), (100, 3, 64), (7, 7, 2)] {
        let batches = plan_batches(ns, nt, bs, &mut rng);
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.target.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..nt).collect::<Vec<_>>());
        for b in &batches {
            assert!(b.source.len() + b.target.len() <= bs);
            assert!(!b.target.is_empty() && b.target.len() <= bs / 2);
            let uniq: BTreeSet<usize> = b.source.iter().copied().collect();
            assert_eq!(uniq.len(), b.source.len());
            assert!(b.source.iter().all(|&i| i < ns));
        }
    }
}

#[test]
fn full_batch_ignores_target_row_order() {
    let (source, stream) = gen_synthetic(&small_synth(8)).unwrap();
    let hp = HyperParams {
        batch_size: 1000,
        ..small_hp(8)
    };
    let params = pretrain_source(&source, &hp, &mut RngStream::new(8, "pre")).unwrap();
    let bank = PrototypeBank::new(hp.prototypes_per_class).unwrap();
    let target = &stream.steps[0].features;
    let rev: Vec<usize> = (0..target.rows()).rev().collect();
    let run = |t: &Matrix| adapt_step(&params, &bank, &source, t, &hp, &mut RngStream::new(8, "s")).unwrap();
    let a = run(target);
    let b = run(&target.select_rows(&rev));
    assert_eq!(a.diagnostics.detected_shared.classes, b.diagnostics.detected_shared.classes);
    let rev_labels: Vec<usize> = rev.iter().map(|&i| a.diagnostics.pseudo_labels[i]).collect();
    assert_eq!(b.diagnostics.pseudo_labels, rev_labels);
    for (x, y) in a.params.blocks().iter().zip(b.params.blocks()) {
        for (u, v) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }
}

#[test]
fn source_only_leaves_the_model_alone() {
    let (source, stream) = gen_synthetic(&small_synth(2)).unwrap();
    let hp = HyperParams {
        method: Method::SourceOnly,
        ..small_hp(2)
    };
    let out = run_stream(&source, &stream, &hp).unwrap();
    assert_eq!(out.params, out.pretrained);
    assert!(out.bank.is_empty());
    assert!(out.report.per_step.iter().all(|s| s.loss_summary.is_none() && s.pseudo_accuracy.is_none()));
}

#[test]
fn no_scd_uses_every_class_and_hbw_runs() {
    let (source, stream) = gen_synthetic(&small_synth(4)).unwrap();
    let out = run_stream(
        &source,
        &stream,
        &HyperParams {
            method: Method::NoScd,
            ..small_hp(4)
        },
    )
    .unwrap();
    for s in &out.report.per_step {
        assert_eq!(s.detected_classes, (0..6).collect::<Vec<_>>());
        assert_eq!(s.scd_accuracy, 1.0);
    }
    let out = run_stream(
        &source,
        &stream,
        &HyperParams {
            method: Method::Hbw,
            ..small_hp(4)
        },
    )
    .unwrap();
    assert!(out.report.per_step.iter().all(|s| !s.detected_classes.is_empty()));
}

#[test]
fn bank_only_grows_across_steps() {
    let (source, stream) = gen_synthetic(&small_synth(6)).unwrap();
    let hp = small_hp(6);
    let out = run_stream(&source, &stream, &hp).unwrap();
    let sizes: Vec<usize> = out.report.per_step.iter().map(|s| s.bank_size_after).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{sizes:?}");
    let mut seen = BTreeSet::new();
    for d in &out.diagnostics {
        seen.extend(d.classes_inserted.iter().copied());
    }
    assert_eq!(&seen, out.bank.seen_classes());
}

#[test]
fn every_epoch_prototype_schedule_runs() {
    let (source, stream) = gen_synthetic(&small_synth(7)).unwrap();
    let hp = HyperParams {
        prototype_schedule: PrototypeSchedule::EveryEpoch,
        ..small_hp(7)
    };
    let out = run_stream(&source, &stream, &hp).unwrap();
    out.report.check_invariants().unwrap();
}

#[test]
fn runs_are_reproducible_and_seed_sensitive() {
    let (source, stream) = gen_synthetic(&small_synth(1)).unwrap();
    let a = run_stream(&source, &stream, &small_hp(1)).unwrap();
    let b = run_stream(&source, &stream, &small_hp(1)).unwrap();
    assert_eq!(report_json(&a.report).unwrap(), report_json(&b.report).unwrap());
    let c = run_stream(&source, &stream, &small_hp(2)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn checkpoints_round_trip() {
    let (source, stream) = gen_synthetic(&small_synth(9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_stream_with(
        &source,
        &stream,
        &small_hp(9),
        RunOptions {
            checkpoint_dir: Some(dir.path()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(ModelParams::load(&dir.path().join("model_pretrained.json")).unwrap(), out.pretrained);
    assert_eq!(ModelParams::load(&dir.path().join("model_step2.json")).unwrap(), out.params);
    assert_eq!(PrototypeBank::load(&dir.path().join("bank_step2.json")).unwrap(), out.bank);
    assert!(dir.path().join("model_step1.json").exists());

    // resuming from the saved pretrained model reproduces the run
    let again = run_stream_with(
        &source,
        &stream,
        &small_hp(9),
        RunOptions {
            pretrained: Some(ModelParams::load(&dir.path().join("model_pretrained.json")).unwrap()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(again.report, out.report);
}

#[test]
fn mismatched_class_counts_are_rejected() {
    let (source, _) = gen_synthetic(&small_synth(0)).unwrap();
    let (_, other) = gen_synthetic(&SynthConfig {
        num_classes: 8,
        private_source_classes: 4,
        ..small_synth(0)
    })
    .unwrap();
    assert!(matches!(run_stream(&source, &other, &small_hp(0)), Err(Error::InvalidInput(_))));
}

#[test]
fn bad_hyperparameters_are_rejected() {
    let (source, stream) = gen_synthetic(&small_synth(0)).unwrap();
    for hp in [
        HyperParams { alpha: 0.0, ..small_hp(0) },
        HyperParams { batch_size: 1, ..small_hp(0) },
        HyperParams { tau: 0.0, ..small_hp(0) },
        HyperParams { refresh_pseudo: 0, ..small_hp(0) },
    ] {
        assert!(matches!(run_stream(&source, &stream, &hp), Err(Error::InvalidConfig(_))));
    }
}
