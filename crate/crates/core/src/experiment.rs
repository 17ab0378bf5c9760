//! JSON experiment configs and the on-disk artifacts of train, sweep and
//! noise-study runs.
//!
//! Output layout under `<output_dir>/<name>/`:
//!
//! * train: `report.json`, `metrics.csv`, `checkpoint.bin`
//! * sweep: `lambda_<λ>/{report.json, metrics.csv, checkpoint.bin}`, `summary.csv`
//! * noise study: `sigma_<σ>/{report.json, metrics.csv, checkpoint.bin}`, `noise_study.csv`
//!
//! Every file is a deterministic function of the config; wall-clock timing is
//! left out of `report.json` unless explicitly requested.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::Metrics;
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::models::{write_checkpoint, ModelKind, ModelSpec};
use crate::optim::AdamConfig;
use crate::par::{self, Exec};
use crate::series::{self, Column, NormKind, Normalizer, Split, SplitFractions, TimeSeries, WindowedDataset};
use crate::synth::{self, SynthSpec};
use crate::trainer::{self, Objective, Selection, TrainConfig, TrainOutcome, TrainReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synth(SynthSpec),
    Csv(CsvSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default = "first_column")]
    pub column: Column,
}

fn first_column() -> Column {
    Column::Index(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub input_len: usize,
    #[serde(default = "one")]
    pub horizon: usize,
    #[serde(default)]
    pub splits: SplitFractions,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            input_len: 16,
            horizon: 1,
            splits: SplitFractions::default(),
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "one")]
    pub window: usize,
    #[serde(default)]
    pub init_seed: u64,
}

fn default_hidden() -> usize {
    32
}

/// Training keys as they appear in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    #[serde(alias = "K")]
    pub k: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub objective: Objective,
    pub selection: Selection,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            lr0: d.lr0,
            decay_factor: d.decay_factor,
            decay_every: d.decay_every,
            epochs: d.epochs,
            batch_size: d.batch_size,
            lambda: 0.0,
            k: 1,
            seed: d.seed,
            adam: d.adam,
            objective: d.objective,
            selection: d.selection,
        }
    }
}

/// One experiment. Exactly one data source; everything else has defaults
/// except the model kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub normalization: NormKind,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative CSV path is resolved against the
    /// directory holding the config.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let DataSource::Csv(csv) = &mut cfg.data {
            if csv.path.is_relative() {
                if let Some(dir) = path.parent() {
                    csv.path = dir.join(&csv.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(Error::Config(format!(
                "name {:?} is not a valid directory name",
                self.name
            )));
        }
        if let DataSource::Synth(s) = &self.data {
            s.validate().map_err(|e| Error::Config(format!("data.synth: {e}")))?;
        }
        self.window
            .splits
            .validate()
            .map_err(|e| Error::Config(format!("window.splits: {e}")))?;
        self.model_spec()
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        self.train_config().validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("train: {m}")),
            other => Error::Config(format!("train: {other}")),
        })
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.model.kind,
            input_len: self.window.input_len,
            horizon: self.window.horizon,
            hidden_dim: self.model.hidden_dim,
            window: self.model.window,
            init_seed: self.model.init_seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lr0: t.lr0,
            decay_factor: t.decay_factor,
            decay_every: t.decay_every,
            epochs: t.epochs,
            batch_size: t.batch_size,
            loss: LossSpec {
                lambda: t.lambda,
                k: t.k,
                horizon: self.window.horizon,
            },
            seed: t.seed,
            adam: t.adam,
            objective: t.objective,
            selection: t.selection,
            exec: Exec::Auto,
        }
    }

    /// Overrides every seed in the config: synthetic noise, initialization and
    /// batch order.
    pub fn reseed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.model.init_seed = seed;
        if let DataSource::Synth(s) = &mut self.data {
            s.seed = seed;
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.name)
    }
}

/// Raw series, the fitted normalizer and the windowed (normalized) dataset.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub raw: TimeSeries,
    pub normalizer: Normalizer,
    pub dataset: WindowedDataset,
}

pub fn load_series(source: &DataSource) -> Result<TimeSeries> {
    match source {
        DataSource::Synth(spec) => synth::generate(spec),
        DataSource::Csv(csv) => series::load_csv(&csv.path, &csv.column),
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let raw = load_series(&cfg.data)?;
    let normalizer = series::fit_normalizer(&raw, cfg.window.splits.train, cfg.normalization)?;
    let normalized = normalizer.apply(&raw)?;
    let dataset = series::make_windows(&normalized, cfg.window.input_len, cfg.window.horizon, cfg.window.splits)?;
    Ok(Prepared {
        raw,
        normalizer,
        dataset,
    })
}

pub fn run_train(cfg: &ExperimentConfig, exec: Exec) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let mut train_cfg = cfg.train_config();
    train_cfg.exec = exec;
    trainer::train(&prepared.dataset, &cfg.model_spec(), &train_cfg)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Csv {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Csv {
        row: 0,
        message: e.to_string(),
    })
}

pub const METRICS_HEADER: [&str; 12] = [
    "name",
    "model",
    "lambda",
    "k",
    "horizon",
    "mse",
    "s_mse",
    "mim",
    "acc",
    "s_acc",
    "f1",
    "best_epoch",
];

fn metrics_row(name: &str, report: &TrainReport) -> Vec<String> {
    let m = report.test;
    vec![
        name.to_string(),
        report.model.kind.to_string(),
        fmt_f64(report.config.loss.lambda),
        report.config.loss.k.to_string(),
        report.model.horizon.to_string(),
        fmt_opt(m.map(|m| m.mse)),
        fmt_opt(m.map(|m| m.s_mse)),
        fmt_opt(m.map(|m| m.mim)),
        fmt_opt(m.map(|m| m.acc)),
        fmt_opt(m.and_then(|m| m.s_acc)),
        fmt_opt(m.map(|m| m.f1)),
        report.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
    ]
}

/// Writes `report.json`, `metrics.csv` and `checkpoint.bin` into `dir`.
pub fn write_run(dir: &Path, name: &str, outcome: &TrainOutcome, keep_timing: bool) -> Result<()> {
    let mut report = outcome.report.clone();
    if !keep_timing {
        report.wall_time_secs = None;
    }
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    write_file(&dir.join("report.json"), &json)?;
    write_file(
        &dir.join("metrics.csv"),
        &csv_bytes(&METRICS_HEADER, &[metrics_row(name, &report)])?,
    )?;
    write_file(
        &dir.join("checkpoint.bin"),
        &write_checkpoint(&report.model, &outcome.params)?,
    )
}

/// One row of a sweep summary. `lambda` is `None` for the baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub lambda: Option<f64>,
    pub mse: f64,
    pub s_mse: f64,
    pub mim: f64,
    pub acc: f64,
    pub s_acc: Option<f64>,
}

pub const BASELINE_LABEL: &str = "Avg. Window (n=1)";
pub const SUMMARY_HEADER: [&str; 7] = ["model", "lambda", "mse", "s_mse", "mim", "acc", "s_acc"];

impl SummaryRow {
    fn new(model: String, lambda: Option<f64>, m: &Metrics) -> Self {
        Self {
            model,
            lambda,
            mse: m.mse,
            s_mse: m.s_mse,
            mim: m.mim,
            acc: m.acc,
            s_acc: m.s_acc,
        }
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            fmt_opt(self.lambda),
            fmt_f64(self.mse),
            fmt_f64(self.s_mse),
            fmt_f64(self.mim),
            fmt_f64(self.acc),
            fmt_opt(self.s_acc),
        ]
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    csv_bytes(&SUMMARY_HEADER, &rows.iter().map(SummaryRow::cells).collect::<Vec<_>>())
}

/// Parses a summary written by [`summary_csv`].
pub fn read_summary_csv(bytes: &[u8]) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Csv {
            row: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        let num = |j: usize| -> Result<Option<f64>> {
            let cell = &rec[j];
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse().map(Some).map_err(|_| Error::NonNumeric {
                row,
                cell: cell.to_string(),
            })
        };
        let req = |j: usize| -> Result<f64> {
            num(j)?.ok_or_else(|| Error::NonNumeric {
                row,
                cell: String::new(),
            })
        };
        rows.push(SummaryRow {
            model: rec[0].to_string(),
            lambda: num(1)?,
            mse: req(2)?,
            s_mse: req(3)?,
            mim: req(4)?,
            acc: req(5)?,
            s_acc: num(6)?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub runs: Vec<TrainOutcome>,
    pub baseline: Option<Metrics>,
    /// One row per λ in input order, then the baseline row.
    pub summary: Vec<SummaryRow>,
}

pub fn run_sweep(cfg: &ExperimentConfig, lambdas: &[f64], exec: Exec) -> Result<SweepResult> {
    cfg.validate()?;
    if lambdas.is_empty() {
        return Err(Error::Config("at least one lambda is required".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::Config(format!("lambda must be finite and >= 0, got {bad}")));
    }
    let prepared = prepare(cfg)?;
    let spec = cfg.model_spec();
    let mut train_cfg = cfg.train_config();
    train_cfg.exec = exec;
    let runs = trainer::lambda_sweep(&prepared.dataset, &spec, &train_cfg, lambdas)?;
    let baseline = trainer::baseline_metrics(&prepared.dataset, 1, Split::Test, exec)?;

    let mut summary = Vec::with_capacity(runs.len() + 1);
    for run in &runs {
        let m = run.report.test.ok_or(Error::EmptySplit(Split::Test))?;
        summary.push(SummaryRow::new(
            spec.kind.to_string(),
            Some(run.report.config.loss.lambda),
            &m,
        ));
    }
    let b = baseline.ok_or(Error::EmptySplit(Split::Test))?;
    summary.push(SummaryRow::new(BASELINE_LABEL.to_string(), None, &b));
    Ok(SweepResult {
        runs,
        baseline,
        summary,
    })
}

/// Directory name for a swept value; `{}` formatting keeps it unique and exact.
pub fn point_dir(prefix: &str, value: f64) -> String {
    format!("{prefix}_{value}")
}

pub fn write_sweep(cfg: &ExperimentConfig, result: &SweepResult, keep_timing: bool) -> Result<PathBuf> {
    let root = cfg.run_dir();
    for run in &result.runs {
        let dir = root.join(point_dir("lambda", run.report.config.loss.lambda));
        write_run(&dir, &cfg.name, run, keep_timing)?;
    }
    write_file(&root.join("summary.csv"), &summary_csv(&result.summary)?)?;
    Ok(root)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub mse: f64,
    pub mim: f64,
}

#[derive(Clone, Debug)]
pub struct NoiseStudy {
    pub runs: Vec<TrainOutcome>,
    pub rows: Vec<NoiseRow>,
}

/// Trains one model per noise level on freshly generated synthetic data.
pub fn run_noise_study(cfg: &ExperimentConfig, sigmas: &[f64], exec: Exec) -> Result<NoiseStudy> {
    cfg.validate()?;
    let DataSource::Synth(base) = &cfg.data else {
        return Err(Error::Config("noise-study needs a synth data source".into()));
    };
    if sigmas.is_empty() {
        return Err(Error::Config("at least one sigma is required".into()));
    }
    if let Some(bad) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Config(format!("sigma must be finite and >= 0, got {bad}")));
    }
    let runs = par::try_map_collect(exec, sigmas, |&sigma| {
        let mut point = cfg.clone();
        point.data = DataSource::Synth(SynthSpec { sigma, ..base.clone() });
        run_train(&point, exec)
    })?;
    let rows = sigmas
        .iter()
        .zip(&runs)
        .map(|(&sigma, run)| {
            let m = run.report.test.ok_or(Error::EmptySplit(Split::Test))?;
            Ok(NoiseRow {
                sigma,
                mse: m.mse,
                mim: m.mim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseStudy { runs, rows })
}

pub const NOISE_HEADER: [&str; 3] = ["sigma", "mse", "mim"];

pub fn noise_csv(rows: &[NoiseRow]) -> Result<Vec<u8>> {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt_f64(r.sigma), fmt_f64(r.mse), fmt_f64(r.mim)])
        .collect();
    csv_bytes(&NOISE_HEADER, &cells)
}

pub fn write_noise_study(cfg: &ExperimentConfig, study: &NoiseStudy, keep_timing: bool) -> Result<PathBuf> {
    let root = cfg.run_dir();
    for (row, run) in study.rows.iter().zip(&study.runs) {
        write_run(&root.join(point_dir("sigma", row.sigma)), &cfg.name, run, keep_timing)?;
    }
    write_file(&root.join("noise_study.csv"), &noise_csv(&study.rows)?)?;
    Ok(root)
}
