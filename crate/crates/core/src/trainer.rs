//! Mini-batch Adam training with step decay and best-validation checkpointing.
//!
//! The per-batch objective is the regularized loss summed over the batch and
//! divided by the batch size. Per-sample gradients may be computed in
//! parallel; they are always reduced in batch order, so a run is a pure
//! function of (dataset, model spec, config) regardless of thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, Forecast, Metrics};
use crate::error::{Error, Result};
use crate::loss::{loss_eval, LossSpec};
use crate::models::{self, ModelKind, ModelParams, ModelSpec};
use crate::optim::{adam_step, step_decay, AdamConfig, AdamState};
use crate::par::{self, Exec};
use crate::series::{Sample, Split, WindowedDataset};

/// Which code path computes the training loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// The regularized loss described by `TrainConfig::loss`.
    #[default]
    Regularized,
    /// Plain squared error, ignoring λ and K. Reference path for λ = 0.
    PlainMse,
}

/// Loss used to pick the best epoch on the validation split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Same objective as training.
    #[default]
    Objective,
    Mse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossSpec,
    pub seed: u64,
    pub adam: AdamConfig,
    pub objective: Objective,
    pub selection: Selection,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            decay_factor: 0.1,
            decay_every: 10,
            epochs: 100,
            batch_size: 32,
            loss: LossSpec::mse(),
            seed: 0,
            adam: AdamConfig::default(),
            objective: Objective::Regularized,
            selection: Selection::Objective,
            exec: Exec::Auto,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor.is_finite()) {
            return Err(Error::Config(format!(
                "decay_factor must be positive, got {}",
                self.decay_factor
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("decay_every must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.loss.validate()
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        step_decay(self.lr0, self.decay_factor, self.decay_every, epoch)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.loss.lambda = lambda;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample objective over the epoch, before each batch update.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: ModelSpec,
    pub config: TrainConfig,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub epochs: Vec<EpochLog>,
    /// `None` for parameter-free models.
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    /// Metrics of the best-epoch parameters on the test split, if present.
    pub test: Option<Metrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    /// Best-validation parameters.
    pub params: ModelParams,
}

/// One optimizer step, as seen by an observer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchLog {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

fn plain_mse(target: &[f64], pred: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let grad = target
        .iter()
        .zip(pred)
        .map(|(z, zh)| {
            let err = z - zh;
            value += err * err;
            -2.0 * err
        })
        .collect();
    (value, grad)
}

fn sample_objective(cfg: &TrainConfig, sample: &Sample, pred: &[f64]) -> Result<(f64, Vec<f64>)> {
    match cfg.objective {
        Objective::PlainMse => Ok(plain_mse(&sample.target, pred)),
        Objective::Regularized => {
            let e = loss_eval(&sample.target, pred, &sample.input, &cfg.loss)?;
            Ok((e.value, e.grad))
        }
    }
}

fn selection_loss(cfg: &TrainConfig, sample: &Sample, pred: &[f64]) -> Result<f64> {
    match cfg.selection {
        Selection::Objective => sample_objective(cfg, sample, pred).map(|(v, _)| v),
        Selection::Mse => Ok(plain_mse(&sample.target, pred).0),
    }
}

/// Mean validation loss of `params` over `samples`.
fn validation_loss(spec: &ModelSpec, params: &ModelParams, samples: &[&Sample], cfg: &TrainConfig) -> Result<f64> {
    let losses = par::try_map_collect(cfg.exec, samples, |s| {
        let pred = models::forward(spec, params, &s.input)?;
        selection_loss(cfg, s, &pred)
    })?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

/// Predictions of `params` on `samples`, bundled with targets and anchors.
pub fn forecasts(spec: &ModelSpec, params: &ModelParams, samples: &[&Sample], exec: Exec) -> Result<Vec<Forecast>> {
    par::try_map_collect(exec, samples, |s| {
        let pred = models::forward(spec, params, &s.input)?;
        Forecast::new(s.target.clone(), pred, s.anchor)
    })
}

/// Test-split metrics of a model, `None` when the split is empty.
pub fn evaluate(
    spec: &ModelSpec,
    params: &ModelParams,
    dataset: &WindowedDataset,
    split: Split,
    exec: Exec,
) -> Result<Option<Metrics>> {
    let samples = dataset.split(split);
    if samples.is_empty() {
        return Ok(None);
    }
    diagnostics::summarize(&forecasts(spec, params, &samples, exec)?).map(Some)
}

/// Metrics of the Avg. Window baseline with window `n` on `split`.
pub fn baseline_metrics(dataset: &WindowedDataset, n: usize, split: Split, exec: Exec) -> Result<Option<Metrics>> {
    let spec = ModelSpec::new(ModelKind::AvgWindow, dataset.input_len(), dataset.horizon()).with_window(n);
    let params = spec.init()?;
    evaluate(&spec, &params, dataset, split, exec)
}

fn check_compat(dataset: &WindowedDataset, spec: &ModelSpec, cfg: &TrainConfig) -> Result<()> {
    spec.validate()?;
    cfg.validate()?;
    if spec.input_len != dataset.input_len() || spec.horizon != dataset.horizon() {
        return Err(Error::Config(format!(
            "model expects T={} h={}, dataset has T={} h={}",
            spec.input_len,
            spec.horizon,
            dataset.input_len(),
            dataset.horizon()
        )));
    }
    if cfg.objective == Objective::Regularized && cfg.loss.horizon != spec.horizon {
        return Err(Error::Config(format!(
            "loss horizon {} differs from model horizon {}",
            cfg.loss.horizon, spec.horizon
        )));
    }
    if cfg.objective == Objective::Regularized && cfg.loss.k > spec.input_len {
        return Err(Error::Config(format!(
            "lag depth K={} exceeds input window T={}",
            cfg.loss.k, spec.input_len
        )));
    }
    Ok(())
}

pub fn train(dataset: &WindowedDataset, spec: &ModelSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(dataset, spec, cfg, |_| {})
}

/// [`train`] with a callback invoked after every optimizer step.
pub fn train_observed(
    dataset: &WindowedDataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    mut observe: impl FnMut(&BatchLog),
) -> Result<TrainOutcome> {
    let started = Instant::now();
    check_compat(dataset, spec, cfg)?;
    let train_set = dataset.split(Split::Train);
    let val_set = dataset.split(Split::Val);
    if train_set.is_empty() {
        return Err(Error::EmptySplit(Split::Train));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit(Split::Val));
    }

    let mut params = spec.init()?;
    let mut best = params.clone();
    let mut best_epoch = None;
    let mut best_val: Option<f64> = None;
    let mut logs = Vec::new();

    if !params.is_empty() {
        let mut state = AdamState::new(params.len());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..train_set.len()).collect();

        for epoch in 0..cfg.epochs {
            let lr = cfg.lr_at(epoch);
            order.shuffle(&mut rng);
            let mut epoch_sum = 0.0;
            for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
                let per_sample = par::try_map_collect(cfg.exec, idx, |&i| {
                    let s = train_set[i];
                    models::forward_backward(spec, &params, &s.input, |pred| sample_objective(cfg, s, pred))
                        .map(|(_, value, grad)| (value, grad))
                })?;
                let scale = idx.len() as f64;
                let mut grad = vec![0.0; params.len()];
                let mut loss = 0.0;
                for (value, g) in &per_sample {
                    loss += value;
                    grad.iter_mut().zip(g).for_each(|(acc, v)| *acc += v);
                }
                epoch_sum += loss;
                let loss = loss / scale;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, batch, loss });
                }
                grad.iter_mut().for_each(|g| *g /= scale);
                adam_step(&mut params.values, &grad, &mut state, lr, &cfg.adam)?;
                observe(&BatchLog { epoch, batch, loss });
            }
            let val_loss = validation_loss(spec, &params, &val_set, cfg)?;
            if !val_loss.is_finite() || params.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    batch: order.len().div_ceil(cfg.batch_size),
                    loss: val_loss,
                });
            }
            if best_val.is_none_or(|b| val_loss < b) {
                best_val = Some(val_loss);
                best_epoch = Some(epoch);
                best.values.copy_from_slice(&params.values);
            }
            logs.push(EpochLog {
                epoch,
                lr,
                train_loss: epoch_sum / train_set.len() as f64,
                val_loss,
            });
        }
    }

    let test = evaluate(spec, &best, dataset, Split::Test, cfg.exec)?;
    let report = TrainReport {
        model: spec.clone(),
        config: cfg.clone(),
        n_train: train_set.len(),
        n_val: val_set.len(),
        n_test: dataset.count(Split::Test),
        epochs: logs,
        best_epoch,
        best_val_loss: best_val,
        test,
        wall_time_secs: Some(started.elapsed().as_secs_f64()),
    };
    Ok(TrainOutcome { report, params: best })
}

/// Trains one model per λ with otherwise identical settings and seeds.
pub fn lambda_sweep(
    dataset: &WindowedDataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    lambdas: &[f64],
) -> Result<Vec<TrainOutcome>> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda list is empty".into()));
    }
    par::try_map_collect(cfg.exec, lambdas, |&lambda| {
        train(dataset, spec, &cfg.clone().with_lambda(lambda))
    })
}
