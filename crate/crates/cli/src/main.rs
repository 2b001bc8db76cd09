//! `proca`: generate data, train and evaluate from a JSON experiment config.
//!
//! Exit status is 0 on success, 1 for a bad config or command line, 2 for a
//! failure while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proca_core::data::write_dataset;
use proca_core::eval::{emit_report, s1_accuracy, step_level_accuracy};
use proca_core::gradcheck::{run_gradcheck, InstanceBounds};
use proca_core::trainer::{dataset_accuracy, pretrain_for_run, run_stream_with, RunOptions};
use proca_core::{Error, ExperimentConfig, Method, ModelParams, RunReport};
use serde::Serialize;

const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "proca", version, about = "Prototype-guided continual adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as CSV files plus a manifest.
    Synth(CommonArgs),
    /// Train the source model only and save it.
    Pretrain(CommonArgs),
    /// Pretrain, adapt over every step, and write report.json / metrics.csv.
    Run(RunArgs),
    /// Score a saved model on every step of the configured stream.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// proca, source_only, no_scd or hbw.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    no_con: bool,
    #[arg(long)]
    no_dis: bool,
    /// Treat every class as shared (same as `--method no_scd`).
    #[arg(long, conflicts_with_all = ["method", "hbw"])]
    no_scd: bool,
    /// Detect shared classes with the variance threshold (same as `--method hbw`).
    #[arg(long, conflicts_with = "method")]
    hbw: bool,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Start from a model written by `proca pretrain` instead of pretraining.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Seeds to run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Model checkpoint (`model_step<t>.json` or `model_pretrained.json`).
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    instances: usize,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    Ok(cfg)
}

fn out_dir(args: &CommonArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// One subdirectory per seed when there is more than one.
fn seed_dir(base: &Path, seed: u64, many: bool) -> PathBuf {
    if many {
        base.join(format!("seed{seed}"))
    } else {
        base.to_path_buf()
    }
}

fn synth(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let base = out_dir(args, &cfg);
    let seeds = cfg.seed_list();
    for &seed in &seeds {
        let (source, stream) = cfg.with_seed(seed).materialize()?;
        let manifest = write_dataset(&seed_dir(&base, seed, seeds.len() > 1), &source, &stream)?;
        println!("{}", manifest.display());
    }
    Ok(())
}

fn pretrain(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let base = out_dir(args, &cfg);
    let seeds = cfg.seed_list();
    for &seed in &seeds {
        let c = cfg.with_seed(seed);
        let (source, _) = c.materialize()?;
        let params = pretrain_for_run(&source, &c.hyperparams)?;
        let dir = seed_dir(&base, seed, seeds.len() > 1);
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        let path = dir.join("model_pretrained.json");
        params.save(&path)?;
        println!("seed {seed}: source accuracy {:.4} -> {}", dataset_accuracy(&params, &source)?, path.display());
    }
    Ok(())
}

fn run_one(cfg: &ExperimentConfig, dir: &Path, ckpt: Option<&Path>, pretrained: Option<&Path>) -> Result<RunReport, Error> {
    let (source, stream) = cfg.materialize()?;
    let opts = RunOptions {
        pretrained: pretrained.map(ModelParams::load).transpose()?,
        checkpoint_dir: ckpt,
        config_echo: Some(cfg.to_json_value()?),
    };
    let out = run_stream_with(&source, &stream, &cfg.hyperparams, opts)?;
    emit_report(&out.report, dir)?;
    Ok(out.report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    let hp = &mut cfg.hyperparams;
    if let Some(m) = args.method {
        hp.method = m;
    }
    if args.no_scd {
        hp.method = Method::NoScd;
    }
    if args.hbw {
        hp.method = Method::Hbw;
    }
    hp.use_con &= !args.no_con;
    hp.use_dis &= !args.no_dis;
    if let Some(d) = &args.checkpoint_dir {
        cfg.checkpoint_dir = Some(d.clone());
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    if args.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }

    let base = out_dir(&args.common, &cfg);
    let seeds = cfg.seed_list();
    let many = seeds.len() > 1;
    let jobs: Vec<(u64, ExperimentConfig, PathBuf, Option<PathBuf>)> = seeds
        .iter()
        .map(|&s| {
            let ckpt = cfg.checkpoint_dir.as_ref().map(|d| seed_dir(d, s, many));
            (s, cfg.with_seed(s), seed_dir(&base, s, many), ckpt)
        })
        .collect();

    if many && args.pretrained.is_some() {
        return Err(Failure::Config("--pretrained needs a single seed (use --seed)".into()));
    }

    let mut results = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(args.jobs) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(seed, c, dir, ckpt)| {
                    let pre = args.pretrained.as_deref();
                    (*seed, dir, scope.spawn(move || run_one(c, dir, ckpt.as_deref(), pre)))
                })
                .collect();
            for (seed, dir, h) in handles {
                let r = h.join().unwrap_or_else(|_| Err(Error::InvalidInput("worker thread panicked".into())));
                results.push((seed, dir.clone(), r));
            }
        });
    }

    let mut failed = None;
    for (seed, dir, r) in results {
        match r {
            Ok(rep) => println!(
                "seed {seed}: final accuracy {}, final S-1 {} -> {}",
                fmt_opt(rep.final_accuracy),
                fmt_opt(rep.final_s1_accuracy),
                dir.join("report.json").display()
            ),
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                failed.get_or_insert(e.to_string());
            }
        }
    }
    match failed {
        Some(e) => Err(Failure::Runtime(e)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct EvalStep {
    step_index: usize,
    step_level_accuracy: Option<f64>,
    s1_accuracy: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    checkpoint: PathBuf,
    source_accuracy: f64,
    per_step: Vec<EvalStep>,
}

fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let seed = cfg.seed_list()[0];
    let (source, stream) = cfg.with_seed(seed).materialize()?;
    let params = ModelParams::load(&args.checkpoint)?;
    let per_step = (1..=stream.num_steps())
        .map(|t| {
            Ok(EvalStep {
                step_index: t,
                step_level_accuracy: step_level_accuracy(&params, &stream, t)?,
                s1_accuracy: s1_accuracy(&params, &stream, t)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let report = EvalReport {
        checkpoint: args.checkpoint.clone(),
        source_accuracy: dataset_accuracy(&params, &source)?,
        per_step,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
    print!("{text}");
    if let Some(dir) = &args.common.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        let path = dir.join("eval.json");
        std::fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn gradcheck(args: &GradcheckArgs) -> Result<(), Failure> {
    if args.instances == 0 {
        return Err(Failure::Config("--instances must be at least 1".into()));
    }
    let r = run_gradcheck(args.seed, args.instances, InstanceBounds::default())?;
    for (name, e) in &r.per_loss {
        println!("{name:<12} {e:.3e}");
    }
    println!(
        "max relative error {:.3e} over {} coordinates in {} instances",
        r.max_rel_error, r.coordinates, r.instances
    );
    if r.max_rel_error <= GRADCHECK_TOL {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("max relative error above {GRADCHECK_TOL:e}")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROCA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
