//! Detection and mitigation of "mimicking" in time-series forecasting.
//!
//! A forecaster mimics when its predictions sit closer to the previous
//! observation than to the value it is supposed to predict. This crate
//! provides:
//!
//! * [`diagnostics`]: MSE, shifted MSE, the signed mimicking score (MIM),
//!   direction-of-change accuracy (Acc / s-Acc) and binary F1.
//! * [`loss`]: the anti-mimicking regularized loss (single-lag, K-lag and
//!   multi-horizon) with its analytic gradient and a finite-difference checker.
//! * [`models`]: small differentiable forecasters (linear AR, MLP, Elman RNN)
//!   plus the Avg. Window baseline.
//! * [`trainer`]: Adam with step decay, best-validation checkpointing,
//!   λ sweeps.
//! * [`series`] and [`synth`]: CSV ingestion, normalization, windowing and the
//!   seeded sinusoid-plus-noise benchmark.
//! * [`experiment`]: JSON experiment configs and on-disk artifacts used by the
//!   `mimic` CLI.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod models;
pub mod optim;
pub mod par;
pub mod series;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use par::Exec;
