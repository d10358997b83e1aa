//! Activation-placement experiments: build a preset, apply surgery, train
//! with momentum SGD for each seed, evaluate, and aggregate.
//!
//! Training is single-threaded and fully seeded, so per-seed accuracies are
//! bit-reproducible on a given platform. Wall time covers the training loop
//! only.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{gen_synthetic_images, load_cifar10_dir, subset, ImageDataset};
use crate::error::{Error, Result};
use crate::kernels::ActivationKind;
use crate::modelspec::{
    preset_with_blocks, GroupSelector, KindFilter, Model, ModelSpec, Surgery, NUM_STAGES,
};
use crate::smoother::argmax_decode;
use crate::tensor::{softmax_cross_entropy, Rng, Sgd};

const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Cifar10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// Directory holding the extracted CIFAR-10 binary batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub train_size: usize,
    pub test_size: usize,
    /// Seed for subsetting (CIFAR-10) or generation (synthetic); independent
    /// of the training seeds.
    #[serde(default)]
    pub seed: u64,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub label: String,
    pub preset: String,
    /// Blocks per stage; one each when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<[usize; NUM_STAGES]>,
    #[serde(default)]
    pub surgery: Vec<Surgery>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let hp = &self.hyperparams;
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        if hp.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if hp.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(hp.lr.is_finite() && hp.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lr must be positive, got {}",
                hp.lr
            )));
        }
        if !(0.0..1.0).contains(&hp.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                hp.momentum
            )));
        }
        if self.dataset.train_size == 0 || self.dataset.test_size == 0 {
            return Err(Error::InvalidConfig(
                "train_size and test_size must be positive".into(),
            ));
        }
        if self.dataset.source == DataSource::Cifar10 && self.dataset.dir.is_none() {
            return Err(Error::InvalidConfig("cifar10 dataset needs `dir`".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The preset with every surgery applied in order, plus the total
    /// number of sites rewritten.
    pub fn build_spec(&self) -> Result<(ModelSpec, usize)> {
        let mut spec = preset_with_blocks(&self.preset, self.blocks.unwrap_or([1; NUM_STAGES]))?;
        let mut changed = 0;
        for s in &self.surgery {
            let (next, n) = spec.apply(s)?;
            spec = next;
            changed += n;
        }
        Ok((spec, changed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub test_accuracy: f64,
    pub train_seconds: f64,
    pub final_train_loss: f64,
    /// Hash of the parameters before the first update.
    pub init_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub preset: String,
    pub surgery: Vec<Surgery>,
    pub changed_sites: usize,
    pub dataset: DatasetConfig,
    pub hyperparams: Hyperparams,
    pub runs: Vec<SeedRun>,
    pub mean_accuracy: f64,
    pub mean_train_seconds: f64,
    pub spec_fingerprint: String,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

pub fn load_datasets(cfg: &DatasetConfig) -> Result<(ImageDataset, ImageDataset)> {
    match cfg.source {
        DataSource::Synthetic => Ok((
            gen_synthetic_images(cfg.train_size, cfg.seed)?,
            gen_synthetic_images(cfg.test_size, cfg.seed.wrapping_add(1))?,
        )),
        DataSource::Cifar10 => {
            let dir = cfg
                .dir
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("cifar10 dataset needs `dir`".into()))?;
            let (train, test) = load_cifar10_dir(dir)?;
            Ok((
                subset(&train, cfg.train_size, cfg.seed)?,
                subset(&test, cfg.test_size, cfg.seed)?,
            ))
        }
    }
}

/// Fraction of `ds` classified correctly. The parallel mode only reorders
/// an integer count, so both modes give identical results.
pub fn evaluate(model: &Model, ds: &ImageDataset, parallel: bool) -> Result<f64> {
    let n = ds.len();
    let starts: Vec<usize> = (0..n).step_by(EVAL_BATCH).collect();
    let count_batch = |&start: &usize| -> Result<usize> {
        let end = (start + EVAL_BATCH).min(n);
        let logits = model.forward(&ds.images().slice_outer(start, end)?)?;
        let pred = argmax_decode(&logits)?;
        Ok(pred
            .iter()
            .zip(&ds.labels()[start..end])
            .filter(|(p, t)| p == t)
            .count())
    };
    let correct: usize = if parallel {
        starts
            .par_iter()
            .map(count_batch)
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum()
    } else {
        starts
            .iter()
            .map(count_batch)
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum()
    };
    Ok(correct as f64 / n as f64)
}

/// Trains one seed. The seed's stream is split into an initialization
/// generator and a shuffling generator.
pub fn train_seed(
    spec: &ModelSpec,
    train: &ImageDataset,
    test: &ImageDataset,
    hp: &Hyperparams,
    seed: u64,
) -> Result<(Model, SeedRun)> {
    let mut root = Rng::new(seed);
    let mut init_rng = root.fork();
    let mut shuffle_rng = root.fork();
    let mut model = Model::build(spec, &mut init_rng)?;
    let init_hash = model.param_hash();
    let mut opt = Sgd::new(hp.lr as f32, hp.momentum as f32, model.params());

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut last_epoch_loss = 0.0;
    let start = Instant::now();
    for _ in 0..hp.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(hp.batch_size) {
            let x = train.images().gather_outer(batch)?;
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels()[i]).collect();
            let (logits, trace) = model.forward_train(&x)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            let grads = model.backward(&trace, &grad)?;
            opt.step(model.params_mut(), &grads)?;
            loss_sum += loss as f64 * batch.len() as f64;
        }
        last_epoch_loss = loss_sum / train.len() as f64;
    }
    let train_seconds = start.elapsed().as_secs_f64();

    let test_accuracy = evaluate(&model, test, false)?;
    let run = SeedRun {
        seed,
        test_accuracy,
        train_seconds,
        final_train_loss: last_epoch_loss,
        init_hash,
    };
    Ok((model, run))
}

/// Runs every seed of `cfg` on already-loaded data.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    train: &ImageDataset,
    test: &ImageDataset,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (spec, changed_sites) = cfg.build_spec()?;
    let runs = cfg
        .seeds
        .iter()
        .map(|&seed| train_seed(&spec, train, test, &cfg.hyperparams, seed).map(|(_, run)| run))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        label: cfg.label.clone(),
        preset: cfg.preset.clone(),
        surgery: cfg.surgery.clone(),
        changed_sites,
        dataset: cfg.dataset.clone(),
        hyperparams: cfg.hyperparams.clone(),
        mean_accuracy: mean(runs.iter().map(|r| r.test_accuracy)),
        mean_train_seconds: mean(runs.iter().map(|r| r.train_seconds)),
        runs,
        spec_fingerprint: spec.fingerprint(),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    // Surface surgery errors before paying for data loading.
    cfg.build_spec()?;
    let (train, test) = load_datasets(&cfg.dataset)?;
    run_experiment_on(cfg, &train, &test)
}

/// The cells of a placement grid: the unmodified base config first, then one
/// config per placement with `(placement, from, to)` appended to the base
/// surgery.
pub fn grid_configs(
    base: &ExperimentConfig,
    placements: &[GroupSelector],
    from: KindFilter,
    to: ActivationKind,
) -> Vec<ExperimentConfig> {
    let mut cells = vec![ExperimentConfig {
        label: "baseline".into(),
        ..base.clone()
    }];
    for p in placements {
        let mut cfg = base.clone();
        cfg.label = p.to_string();
        cfg.surgery.push(Surgery {
            selector: p.clone(),
            from,
            to,
        });
        cells.push(cfg);
    }
    cells
}

/// Runs the baseline and one cell per placement with identical data, seeds
/// and hyperparameters. With `parallel`, cells run as independent jobs;
/// each cell is still single-threaded and deterministic.
pub fn run_grid(
    base: &ExperimentConfig,
    placements: &[GroupSelector],
    from: KindFilter,
    to: ActivationKind,
    parallel: bool,
) -> Result<Vec<ExperimentReport>> {
    base.validate()?;
    let cells = grid_configs(base, placements, from, to);
    for c in &cells {
        c.build_spec()?;
    }
    let (train, test) = load_datasets(&base.dataset)?;
    if parallel {
        cells
            .par_iter()
            .map(|c| run_experiment_on(c, &train, &test))
            .collect()
    } else {
        cells
            .iter()
            .map(|c| run_experiment_on(c, &train, &test))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` files get JSON; everything else CSV.
    pub fn from_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// One CSV row: a single seed of a single report, with the report-level
/// fields repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub preset: String,
    pub seed: u64,
    pub test_accuracy: f64,
    pub train_seconds: f64,
    pub final_train_loss: f64,
    pub init_hash: String,
    pub mean_accuracy: f64,
    pub mean_train_seconds: f64,
    pub changed_sites: usize,
    pub spec_fingerprint: String,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

pub fn report_rows(reports: &[ExperimentReport]) -> Vec<ReportRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.runs.iter().map(move |run| ReportRow {
                label: r.label.clone(),
                preset: r.preset.clone(),
                seed: run.seed,
                test_accuracy: run.test_accuracy,
                train_seconds: run.train_seconds,
                final_train_loss: run.final_train_loss,
                init_hash: run.init_hash.clone(),
                mean_accuracy: r.mean_accuracy,
                mean_train_seconds: r.mean_train_seconds,
                changed_sites: r.changed_sites,
                spec_fingerprint: r.spec_fingerprint.clone(),
                lr: r.hyperparams.lr,
                momentum: r.hyperparams.momentum,
                batch_size: r.hyperparams.batch_size,
                epochs: r.hyperparams.epochs,
            })
        })
        .collect()
}

pub fn emit_report(
    reports: &[ExperimentReport],
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    if reports.is_empty() {
        return Err(Error::Domain("no reports to write".into()));
    }
    match format {
        ReportFormat::Json => {
            let text = serde_json::to_string_pretty(reports)?;
            std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
        }
        ReportFormat::Csv => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(file);
            for row in report_rows(reports) {
                w.serialize(row)?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
    }
}

pub fn read_reports_json(path: impl AsRef<Path>) -> Result<Vec<ExperimentReport>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            label: "tiny".into(),
            preset: "mini-resnet".into(),
            blocks: None,
            surgery: vec![],
            dataset: DatasetConfig {
                source: DataSource::Synthetic,
                dir: None,
                train_size: 40,
                test_size: 20,
                seed: 0,
            },
            hyperparams: Hyperparams {
                epochs: 1,
                batch_size: 16,
                ..Default::default()
            },
            seeds: vec![1, 2],
        }
    }

    #[test]
    fn config_validation() {
        assert!(tiny_config().validate().is_ok());
        let mut c = tiny_config();
        c.seeds.clear();
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = tiny_config();
        c.hyperparams.epochs = 0;
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.dataset.source = DataSource::Cifar10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"label":"x","preset":"mini-x3d",
                "dataset":{"source":"synthetic","train_size":10,"test_size":10},
                "surgery":[{"selector":"middle&band-a","from":"relu","to":"hardswish"}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.hyperparams, Hyperparams::default());
        assert_eq!(cfg.seeds, vec![1, 2]);
        let (spec, changed) = cfg.build_spec().unwrap();
        assert_eq!(changed, 2);
        assert_eq!(spec.stages[1].blocks[0].act_a, ActivationKind::HardSwish);
    }

    #[test]
    fn unknown_site_surfaces_before_training() {
        let mut cfg = tiny_config();
        cfg.surgery.push(Surgery {
            selector: GroupSelector::Site("stage7.block1.act_a".into()),
            from: KindFilter::Any,
            to: ActivationKind::Swish,
        });
        assert!(matches!(run_experiment(&cfg), Err(Error::UnknownSite(_))));
    }

    #[test]
    fn missing_cifar_dir_is_reported() {
        let mut cfg = tiny_config();
        cfg.dataset.source = DataSource::Cifar10;
        cfg.dataset.dir = Some("/nonexistent/cifar".into());
        assert!(matches!(
            run_experiment(&cfg),
            Err(Error::DatasetMissing(_))
        ));
    }

    #[test]
    fn report_means_match_runs() {
        let report = run_experiment(&tiny_config()).unwrap();
        assert_eq!(report.runs.len(), 2);
        let acc = (report.runs[0].test_accuracy + report.runs[1].test_accuracy) / 2.0;
        assert_eq!(report.mean_accuracy, acc);
        let secs = (report.runs[0].train_seconds + report.runs[1].train_seconds) / 2.0;
        assert_eq!(report.mean_train_seconds, secs);
    }

    #[test]
    fn grid_cells() {
        let placements = [
            GroupSelector::Initial,
            GroupSelector::Middle,
            GroupSelector::Last,
            GroupSelector::All,
        ];
        let cells = grid_configs(
            &tiny_config(),
            &placements,
            KindFilter::Any,
            ActivationKind::HardSwish,
        );
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[0].label, "baseline");
        assert!(cells[0].surgery.is_empty());
        assert_eq!(cells[4].label, "all");
        assert!(cells
            .iter()
            .all(|c| c.hyperparams == cells[0].hyperparams && c.seeds == cells[0].seeds));
    }

    #[test]
    fn empty_report_list_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], dir.path().join("r.csv"), ReportFormat::Csv).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            ReportFormat::from_path(Path::new("a/b.JSON")),
            ReportFormat::Json
        );
        assert_eq!(
            ReportFormat::from_path(Path::new("grid.csv")),
            ReportFormat::Csv
        );
    }
}
