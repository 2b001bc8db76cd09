//! Prototype-guided continual adaptation for class-incremental unsupervised
//! domain adaptation.
//!
//! A source-pretrained classifier meets a stream of unlabeled target batches,
//! each covering a new subset of the source classes. Every step detects which
//! classes are present, pseudo-labels the batch, keeps a few herded
//! prototypes per class, and trains on cross-entropy plus a prototype/source
//! alignment term and a replay term against stored soft labels.
//!
//! Start from [`trainer::run_stream`], or [`trainer::adapt_step`] for a single
//! step.

pub mod bank;
pub mod config;
pub mod data;
pub mod detector;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod losses;
pub mod model;
pub mod numkernel;
pub mod pseudo;
pub mod trainer;

pub use config::{DatasetSpec, ExperimentConfig};
pub use bank::{herd_select, PrototypeBank, PrototypeEntry};
pub use data::{gen_synthetic, IncrementalStream, LabeledDataset, StreamStep, SynthConfig};
pub use detector::{detect_shared, hbw_threshold, CumulativeProbs, DetectionMethod, SharedClassSet};
pub use error::{Error, Result, Warning};
pub use eval::{RunReport, StepReport};
pub use losses::LossBreakdown;
pub use model::{forward, ModelParams};
pub use numkernel::{Matrix, RngStream};
pub use trainer::{adapt_step, run_stream, HyperParams, Method};
