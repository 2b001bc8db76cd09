//! Labeled source data, class-incremental target streams, the synthetic
//! two-domain generator, and CSV / manifest I/O.
//!
//! CSV layout: header `label,f0,f1,...,f{d-1}`, one sample per row, `-1` as
//! the label of a target sample whose truth is withheld.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{dot, norm, Matrix, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::InvalidShape(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidLabel {
                label: bad,
                classes: num_classes,
            });
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Classes that have at least one sample.
    pub fn classes_present(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }
}

/// One time step of unlabeled target data. `hidden_labels` is for evaluation only.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamStep {
    pub features: Matrix,
    pub hidden_labels: Vec<Option<usize>>,
    pub true_classes: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalStream {
    pub num_classes: usize,
    pub steps: Vec<StreamStep>,
}

impl IncrementalStream {
    pub fn new(num_classes: usize, steps: Vec<StreamStep>) -> Result<Self> {
        let s = Self { num_classes, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Each step's classes form a proper subset of the source label set and
    /// steps are pairwise disjoint.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidInput("stream has no steps".into()));
        }
        let mut union = BTreeSet::new();
        for (t, step) in self.steps.iter().enumerate() {
            if step.features.rows() == 0 {
                return Err(Error::InvalidInput(format!("step {} is empty", t + 1)));
            }
            if step.hidden_labels.len() != step.features.rows() {
                return Err(Error::InvalidShape(format!(
                    "step {}: {} labels for {} rows",
                    t + 1,
                    step.hidden_labels.len(),
                    step.features.rows()
                )));
            }
            if step.true_classes.is_empty() || step.true_classes.len() >= self.num_classes {
                return Err(Error::InvalidInput(format!(
                    "step {}: true classes must be a non-empty proper subset of {} classes",
                    t + 1,
                    self.num_classes
                )));
            }
            for &k in &step.true_classes {
                if k >= self.num_classes {
                    return Err(Error::InvalidLabel {
                        label: k,
                        classes: self.num_classes,
                    });
                }
                if !union.insert(k) {
                    return Err(Error::InvalidInput(format!(
                        "class {k} appears in more than one step"
                    )));
                }
            }
            if let Some(bad) = step
                .hidden_labels
                .iter()
                .flatten()
                .find(|y| !step.true_classes.contains(y))
            {
                return Err(Error::InvalidInput(format!(
                    "step {}: sample labeled {bad} outside the step's true classes",
                    t + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainShift {
    /// Rotation angle in radians, applied in a random 2-plane.
    pub rotation: f64,
    /// Length of the random translation vector.
    pub translation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(rename = "K")]
    pub num_classes: usize,
    pub d: usize,
    pub shared_per_step: usize,
    pub num_steps: usize,
    pub private_source_classes: usize,
    pub samples_per_class_source: usize,
    pub samples_per_class_target: usize,
    pub class_sep: f64,
    pub noise_sigma: f64,
    pub shift: DomainShift,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// The benchmark configuration: 12 classes, 2 source-private, two steps of 5.
    fn default() -> Self {
        Self {
            num_classes: 12,
            d: 8,
            shared_per_step: 5,
            num_steps: 2,
            private_source_classes: 2,
            samples_per_class_source: 60,
            samples_per_class_target: 40,
            class_sep: 5.0,
            noise_sigma: 1.0,
            shift: DomainShift {
                rotation: 1.0,
                translation: 1.5,
            },
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_steps * self.shared_per_step + self.private_source_classes != self.num_classes {
            return bad("num_steps * shared_per_step + private_source_classes must equal K");
        }
        if self.num_steps == 0 || self.shared_per_step == 0 {
            return bad("num_steps and shared_per_step must be >= 1");
        }
        if self.private_source_classes == 0 && self.num_steps == 1 {
            return bad("a single step must leave at least one source-private class");
        }
        if self.d < 2 {
            return bad("d must be >= 2");
        }
        if !(self.class_sep > 0.0 && self.class_sep.is_finite()) {
            return bad("class_sep must be > 0");
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be > 0");
        }
        if self.samples_per_class_source == 0 || self.samples_per_class_target == 0 {
            return bad("samples per class must be >= 1");
        }
        if !self.shift.rotation.is_finite() || self.shift.translation.is_nan() || self.shift.translation < 0.0 {
            return bad("shift must be finite with non-negative translation");
        }
        Ok(())
    }

    /// Classes shown at step `t` (0-based): a contiguous block of `shared_per_step`.
    pub fn step_classes(&self, t: usize) -> BTreeSet<usize> {
        (t * self.shared_per_step..(t + 1) * self.shared_per_step).collect()
    }

    /// Classes that never appear in the stream: the last `private_source_classes`.
    pub fn private_classes(&self) -> BTreeSet<usize> {
        (self.num_steps * self.shared_per_step..self.num_classes).collect()
    }
}

const MEAN_PLACEMENT_ATTEMPTS: usize = 10_000;

fn random_unit(rng: &mut RngStream, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let n = norm(&v);
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Class means on the sphere of radius `class_sep`, pairwise at least `class_sep` apart.
fn class_means(cfg: &SynthConfig, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_classes);
    let mut attempts = 0;
    while means.len() < cfg.num_classes {
        attempts += 1;
        if attempts > MEAN_PLACEMENT_ATTEMPTS {
            return Err(Error::InvalidConfig(format!(
                "cannot place {} means {} apart in {} dimensions",
                cfg.num_classes, cfg.class_sep, cfg.d
            )));
        }
        let m: Vec<f64> = random_unit(rng, cfg.d).into_iter().map(|x| x * cfg.class_sep).collect();
        let far = means.iter().all(|o| {
            let diff: Vec<f64> = o.iter().zip(&m).map(|(a, b)| a - b).collect();
            norm(&diff) >= cfg.class_sep
        });
        if far {
            means.push(m);
        }
    }
    Ok(means)
}

/// Rotation by `angle` in the plane spanned by two random orthonormal vectors.
struct PlaneRotation {
    u: Vec<f64>,
    w: Vec<f64>,
    cos: f64,
    sin: f64,
}

impl PlaneRotation {
    fn random(rng: &mut RngStream, d: usize, angle: f64) -> Self {
        let u = random_unit(rng, d);
        let w = loop {
            let r = random_unit(rng, d);
            let proj = dot(&r, &u);
            let w: Vec<f64> = r.iter().zip(&u).map(|(a, b)| a - proj * b).collect();
            let n = norm(&w);
            if n > 1e-6 {
                break w.into_iter().map(|x| x / n).collect();
            }
        };
        Self {
            u,
            w,
            cos: angle.cos(),
            sin: angle.sin(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let a = dot(x, &self.u);
        let b = dot(x, &self.w);
        let na = self.cos * a - self.sin * b;
        let nb = self.sin * a + self.cos * b;
        x.iter()
            .zip(&self.u)
            .zip(&self.w)
            .map(|((&xi, &ui), &wi)| xi + (na - a) * ui + (nb - b) * wi)
            .collect()
    }
}

/// Source domain plus a shifted, class-incremental target stream.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<(LabeledDataset, IncrementalStream)> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed, "synthetic");
    let means = class_means(cfg, &mut root.derive("means"))?;
    let mut shift_rng = root.derive("shift");
    let rotation = PlaneRotation::random(&mut shift_rng, cfg.d, cfg.shift.rotation);
    let translation: Vec<f64> = random_unit(&mut shift_rng, cfg.d)
        .into_iter()
        .map(|x| x * cfg.shift.translation)
        .collect();

    let mut src_rng = root.derive("source");
    let mut rows = Vec::with_capacity(cfg.num_classes * cfg.samples_per_class_source);
    let mut labels = Vec::with_capacity(rows.capacity());
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..cfg.samples_per_class_source {
            rows.push(mean.iter().map(|m| m + cfg.noise_sigma * src_rng.normal()).collect::<Vec<_>>());
            labels.push(k);
        }
    }
    let source = LabeledDataset::new(Matrix::from_rows(&rows)?, labels, cfg.num_classes)?;

    let target_means: Vec<Vec<f64>> = means
        .iter()
        .map(|m| {
            rotation
                .apply(m)
                .into_iter()
                .zip(&translation)
                .map(|(a, b)| a + b)
                .collect()
        })
        .collect();
    let mut tgt_rng = root.derive("target");
    let mut steps = Vec::with_capacity(cfg.num_steps);
    for t in 0..cfg.num_steps {
        let classes = cfg.step_classes(t);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for &k in &classes {
            for _ in 0..cfg.samples_per_class_target {
                rows.push(
                    target_means[k]
                        .iter()
                        .map(|m| m + cfg.noise_sigma * tgt_rng.normal())
                        .collect::<Vec<_>>(),
                );
                labels.push(Some(k));
            }
        }
        // interleave classes so that no consumer can rely on sorted order
        let perm = tgt_rng.permutation(rows.len());
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let labels: Vec<Option<usize>> = perm.iter().map(|&i| labels[i]).collect();
        steps.push(StreamStep {
            features: Matrix::from_rows(&rows)?,
            hidden_labels: labels,
            true_classes: classes,
        });
    }
    Ok((source, IncrementalStream::new(cfg.num_classes, steps)?))
}

// ---- CSV ----

fn csv_header(d: usize) -> Vec<String> {
    std::iter::once("label".to_string())
        .chain((0..d).map(|j| format!("f{j}")))
        .collect()
}

fn write_rows(path: &Path, features: &Matrix, labels: impl Iterator<Item = i64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(csv_header(features.cols())).map_err(io)?;
    for (row, y) in features.iter_rows().zip(labels) {
        // `{}` on f64 prints the shortest representation that round-trips exactly
        let rec = std::iter::once(y.to_string()).chain(row.iter().map(|v| format!("{v}")));
        w.write_record(rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses a feature CSV into rows and raw labels (`-1` kept as `None`).
fn read_rows(path: &Path) -> Result<(Matrix, Vec<Option<usize>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    let mut records = r.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| format_err(1, e.to_string()))?,
        None => return Err(format_err(1, "empty file")),
    };
    if header.is_empty() {
        return Err(format_err(1, "missing header"));
    }
    let d = header.len() - 1;
    let want = csv_header(d);
    if header.iter().ne(want.iter().map(String::as_str)) {
        return Err(format_err(
            1,
            format!("header must be `{}`", want.join(",")),
        ));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != d + 1 {
            return Err(format_err(
                line,
                format!("expected {} fields, found {}", d + 1, rec.len()),
            ));
        }
        let raw: i64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| format_err(line, format!("unparseable label `{}`", &rec[0])))?;
        labels.push(match raw {
            -1 => None,
            y if y >= 0 => Some(y as usize),
            y => return Err(format_err(line, format!("negative label {y}"))),
        });
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_err(line, format!("unparseable number `{field}`")))?;
            if !v.is_finite() {
                return Err(format_err(line, format!("non-finite value `{field}`")));
            }
            data.push(v);
        }
    }
    Ok((Matrix::from_vec(labels.len(), d, data)?, labels))
}

fn format_err(line: u64, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

pub fn save_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    write_rows(path, &ds.features, ds.labels.iter().map(|&y| y as i64))
}

/// Loads a fully labeled dataset. `num_classes` defaults to `max label + 1`.
pub fn load_csv(path: &Path, num_classes: Option<usize>) -> Result<LabeledDataset> {
    let (features, raw) = read_rows(path)?;
    let labels: Vec<usize> = raw
        .iter()
        .enumerate()
        .map(|(i, y)| {
            y.ok_or_else(|| format_err(i as u64 + 2, "label -1 not allowed in a labeled dataset"))
        })
        .collect::<Result<_>>()?;
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    LabeledDataset::new(features, labels, k)
}

pub fn save_target_csv(step: &StreamStep, path: &Path) -> Result<()> {
    write_rows(
        path,
        &step.features,
        step.hidden_labels.iter().map(|y| y.map_or(-1, |v| v as i64)),
    )
}

pub fn load_target_csv(path: &Path) -> Result<(Matrix, Vec<Option<usize>>)> {
    read_rows(path)
}

// ---- manifest ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepManifest {
    pub file: PathBuf,
    pub true_classes: Vec<usize>,
}

/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    #[serde(rename = "K")]
    pub num_classes: usize,
    pub d: usize,
    pub steps: Vec<StepManifest>,
    pub source_file: PathBuf,
}

/// Writes `source.csv`, `step_<t>.csv` and `manifest.json` into `dir`.
pub fn write_dataset(dir: &Path, source: &LabeledDataset, stream: &IncrementalStream) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_csv(source, &dir.join("source.csv"))?;
    let mut steps = Vec::with_capacity(stream.num_steps());
    for (t, step) in stream.steps.iter().enumerate() {
        let name = format!("step_{}.csv", t + 1);
        save_target_csv(step, &dir.join(&name))?;
        steps.push(StepManifest {
            file: PathBuf::from(name),
            true_classes: step.true_classes.iter().copied().collect(),
        });
    }
    let manifest = StreamManifest {
        num_classes: stream.num_classes,
        d: source.dim(),
        steps,
        source_file: PathBuf::from("source.csv"),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_manifest(path: &Path) -> Result<(LabeledDataset, IncrementalStream)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: StreamManifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let source = load_csv(&base.join(&m.source_file), Some(m.num_classes))?;
    if source.dim() != m.d {
        return Err(Error::InvalidInput(format!(
            "source has {} features, manifest says {}",
            source.dim(),
            m.d
        )));
    }
    let mut steps = Vec::with_capacity(m.steps.len());
    for s in &m.steps {
        let file = base.join(&s.file);
        let (features, hidden_labels) = load_target_csv(&file)?;
        if features.cols() != m.d {
            return Err(Error::InvalidInput(format!(
                "{}: {} features, manifest says {}",
                file.display(),
                features.cols(),
                m.d
            )));
        }
        steps.push(StreamStep {
            features,
            hidden_labels,
            true_classes: s.true_classes.iter().copied().collect(),
        });
    }
    Ok((source, IncrementalStream::new(m.num_classes, steps)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            num_classes: 5,
            d: 4,
            shared_per_step: 2,
            num_steps: 2,
            private_source_classes: 1,
            samples_per_class_source: 10,
            samples_per_class_target: 6,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        SynthConfig::default().validate().unwrap();
    }

    #[test]
    fn infeasible_config_is_rejected() {
        let cfg = SynthConfig {
            private_source_classes: 3,
            ..small()
        };
        assert!(matches!(gen_synthetic(&cfg), Err(Error::InvalidConfig(_))));
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            ..small()
        };
        assert!(matches!(gen_synthetic(&cfg), Err(Error::InvalidConfig(_))));
        // 20 means pairwise >= radius apart cannot fit on a circle
        let cfg = SynthConfig {
            num_classes: 20,
            d: 2,
            shared_per_step: 9,
            num_steps: 2,
            private_source_classes: 2,
            ..SynthConfig::default()
        };
        assert!(matches!(gen_synthetic(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic(&small()).unwrap();
        let b = gen_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn steps_partition_the_shared_classes() {
        let cfg = SynthConfig::default();
        let (source, stream) = gen_synthetic(&cfg).unwrap();
        assert_eq!(source.classes_present().len(), cfg.num_classes);
        let mut union = cfg.private_classes();
        for step in &stream.steps {
            for &k in &step.true_classes {
                assert!(union.insert(k), "class {k} repeated");
            }
            let seen: BTreeSet<usize> = step.hidden_labels.iter().flatten().copied().collect();
            assert_eq!(seen, step.true_classes);
        }
        assert_eq!(union, (0..cfg.num_classes).collect());
    }

    fn class_mean(x: &Matrix, labels: impl Iterator<Item = Option<usize>>, k: usize) -> Vec<f64> {
        let idx: Vec<usize> = labels.enumerate().filter(|(_, y)| *y == Some(k)).map(|(i, _)| i).collect();
        (0..x.cols())
            .map(|j| idx.iter().map(|&i| x.get(i, j)).sum::<f64>() / idx.len() as f64)
            .collect()
    }

    #[test]
    fn zero_shift_keeps_class_means() {
        let cfg = SynthConfig {
            shift: DomainShift {
                rotation: 0.0,
                translation: 0.0,
            },
            samples_per_class_source: 4000,
            samples_per_class_target: 4000,
            ..small()
        };
        let (source, stream) = gen_synthetic(&cfg).unwrap();
        let step = &stream.steps[0];
        for &k in &step.true_classes {
            let s = class_mean(&source.features, source.labels.iter().map(|&y| Some(y)), k);
            let t = class_mean(&step.features, step.hidden_labels.iter().copied(), k);
            let diff: Vec<f64> = s.iter().zip(&t).map(|(a, b)| a - b).collect();
            // both are sample means of the same Gaussian: standard error ~ sqrt(2/4000)
            assert!(norm(&diff) < 0.15, "{diff:?}");
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let mut r = RngStream::new(1, "rot");
        let rot = PlaneRotation::random(&mut r, 5, 0.7);
        let x = [1.0, -2.0, 0.5, 3.0, 0.0];
        let y = [0.3, 0.1, -1.0, 2.0, 4.0];
        let (rx, ry) = (rot.apply(&x), rot.apply(&y));
        assert!((dot(&rx, &ry) - dot(&x, &y)).abs() < 1e-12);
        assert!((norm(&rx) - norm(&x)).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let (source, stream) = gen_synthetic(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        save_csv(&source, &path).unwrap();
        assert_eq!(load_csv(&path, Some(5)).unwrap(), source);

        let manifest = write_dataset(dir.path(), &source, &stream).unwrap();
        let (s2, st2) = load_manifest(&manifest).unwrap();
        assert_eq!(s2, source);
        assert_eq!(st2, stream);
    }

    #[test]
    fn csv_validation_reports_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "labl,f0,f1\n0,1,2\n").unwrap();
        assert!(matches!(load_csv(&path, None), Err(Error::Format { line: 1, .. })));

        std::fs::write(&path, "label,f0,f1\n0,1,2\n1,3\n").unwrap();
        assert!(matches!(load_csv(&path, None), Err(Error::Format { line: 3, .. })));

        std::fs::write(&path, "label,f0,f1\n0,1,2\n1,3,x\n").unwrap();
        assert!(matches!(load_csv(&path, None), Err(Error::Format { line: 3, .. })));

        std::fs::write(&path, "label,f0,f1\n-1,1,2\n").unwrap();
        assert!(matches!(load_csv(&path, None), Err(Error::Format { line: 2, .. })));
        let (_, labels) = load_target_csv(&path).unwrap();
        assert_eq!(labels, vec![None]);
    }
}
