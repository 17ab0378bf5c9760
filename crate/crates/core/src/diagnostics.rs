//! Forecast evaluation: MSE, shifted MSE, the mimicking score MIM,
//! direction-of-change accuracy and binary F1.
//!
//! Every metric works on a [`Forecast`]: targets `z₁..zₙ`, predictions
//! `ẑ₁..ẑₙ` and the anchor `z₀`, the observation just before `z₁`. The
//! anchor supplies the lag-one reference at `i = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    targets: Vec<f64>,
    predictions: Vec<f64>,
    anchor: f64,
}

impl Forecast {
    pub fn new(targets: Vec<f64>, predictions: Vec<f64>, anchor: f64) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidSpec("forecast needs at least one target".into()));
        }
        if targets.len() != predictions.len() {
            return Err(Error::ShapeMismatch {
                context: "forecast predictions",
                expected: targets.len(),
                got: predictions.len(),
            });
        }
        if !anchor.is_finite() || targets.iter().chain(&predictions).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forecast"));
        }
        Ok(Self {
            targets,
            predictions,
            anchor,
        })
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `(z_{i-1}, z_i, ẑ_i)` triples with `z_0` = anchor.
    fn lagged(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        std::iter::once(self.anchor)
            .chain(self.targets.iter().copied())
            .zip(&self.targets)
            .zip(&self.predictions)
            .map(|((prev, &z), &zhat)| (prev, z, zhat))
    }
}

/// Mean squared error `(1/n) Σ (ẑ_i − z_i)²`.
pub fn mse(f: &Forecast) -> f64 {
    f.lagged().map(|(_, z, zhat)| (zhat - z).powi(2)).sum::<f64>() / f.len() as f64
}

/// MSE against the previous ground truth: `(1/n) Σ (ẑ_i − z_{i−1})²`.
pub fn shifted_mse(f: &Forecast) -> f64 {
    f.lagged().map(|(prev, _, zhat)| (zhat - prev).powi(2)).sum::<f64>() / f.len() as f64
}

/// Signed mimicking score `Σ [(z_i − ẑ_i)² − (z_{i−1} − ẑ_i)²]`.
///
/// Positive means the predictions are, in aggregate, closer to the previous
/// observation than to the target. Equals `n·(mse − shifted_mse)`.
pub fn mim(f: &Forecast) -> f64 {
    f.lagged()
        .map(|(prev, z, zhat)| (z - zhat).powi(2) - (prev - zhat).powi(2))
        .sum()
}

/// Direction of a single step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Down,
    Flat,
    Up,
}

impl Sign {
    pub fn of(delta: f64) -> Sign {
        if delta > 0.0 {
            Sign::Up
        } else if delta < 0.0 {
            Sign::Down
        } else {
            Sign::Flat
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Down => -1,
            Sign::Flat => 0,
            Sign::Up => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChangeVector(pub Vec<Sign>);

impl ChangeVector {
    pub fn as_i8(&self) -> Vec<i8> {
        self.0.iter().map(|s| s.as_i8()).collect()
    }
}

/// `signs[i] = sign(values[i] − values[i−1])` with `values[−1] := v0`.
pub fn change_vector(values: &[f64], v0: f64) -> ChangeVector {
    let mut prev = v0;
    ChangeVector(
        values
            .iter()
            .map(|&v| {
                let s = Sign::of(v - prev);
                prev = v;
                s
            })
            .collect(),
    )
}

/// Acc (`lag = 0`) or s-Acc (`lag = 1`).
///
/// `v` is built from the targets and `v̂` from the predictions, both starting
/// from the anchor. Acc is the fraction of steps with `v̂_i = v_i`; s-Acc the
/// fraction of steps `i ≥ 2` with `v̂_i = v_{i−1}`. A flat step only matches a
/// flat step.
pub fn directional_accuracy(f: &Forecast, lag: usize) -> Result<f64> {
    if lag > 1 {
        return Err(Error::InvalidSpec(format!("lag must be 0 or 1, got {lag}")));
    }
    if f.len() < 1 + lag {
        return Err(Error::SeriesTooShort {
            len: f.len(),
            needed: 1 + lag,
        });
    }
    let v = change_vector(f.targets(), f.anchor());
    let vhat = change_vector(f.predictions(), f.anchor());
    let pairs = vhat.0[lag..].iter().zip(&v.0);
    let total = f.len() - lag;
    let hits = pairs.filter(|(a, b)| a == b).count();
    Ok(hits as f64 / total as f64)
}

/// Binary F1 of `predicted` against `actual`, treating `positive` as the
/// positive class. Zero when precision + recall is zero.
pub fn f1_from_signs(actual: &[Sign], predicted: &[Sign], positive: Sign) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (a, p) in actual.iter().zip(predicted) {
        match (*p == positive, *a == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// F1 of predicted versus actual direction of change.
pub fn f1_binary(f: &Forecast, positive: Sign) -> f64 {
    let v = change_vector(f.targets(), f.anchor());
    let vhat = change_vector(f.predictions(), f.anchor());
    f1_from_signs(&v.0, &vhat.0, positive)
}

/// Test-set summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub s_mse: f64,
    /// MIM per forecast window.
    pub mim: f64,
    pub acc: f64,
    /// `None` when every window has a single step and they cannot be stitched.
    pub s_acc: Option<f64>,
    /// Positive class: upward move.
    pub f1: f64,
}

impl Metrics {
    /// All metrics of a single forecast.
    pub fn of(f: &Forecast) -> Metrics {
        Metrics {
            mse: mse(f),
            s_mse: shifted_mse(f),
            mim: mim(f),
            acc: directional_accuracy(f, 0).expect("n >= 1"),
            s_acc: directional_accuracy(f, 1).ok(),
            f1: f1_binary(f, Sign::Up),
        }
    }
}

/// Aggregates metrics over forecast windows.
///
/// Consecutive one-step windows (each anchor equal to the previous window's
/// target, as produced by stride-1 windowing) are stitched into one forecast
/// so that `v̂` tracks the previous *prediction*. MSE, s-MSE and the summed
/// MIM are unchanged by stitching; MIM is reported per window. Anything else is
/// evaluated window by window and averaged with equal weights.
pub fn summarize(windows: &[Forecast]) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(Error::InvalidSpec("no forecasts to summarize".into()));
    }
    let one_step = windows.iter().all(|f| f.len() == 1);
    let consecutive = windows
        .windows(2)
        .all(|w| w[1].anchor().to_bits() == w[0].targets()[0].to_bits());
    if one_step && consecutive && windows.len() > 1 {
        let stitched = Forecast::new(
            windows.iter().map(|f| f.targets()[0]).collect(),
            windows.iter().map(|f| f.predictions()[0]).collect(),
            windows[0].anchor(),
        )?;
        let mut m = Metrics::of(&stitched);
        m.mim /= windows.len() as f64;
        return Ok(m);
    }
    let n = windows.len() as f64;
    let per: Vec<Metrics> = windows.iter().map(Metrics::of).collect();
    let avg = |g: fn(&Metrics) -> f64| per.iter().map(g).sum::<f64>() / n;
    let s_acc = per
        .iter()
        .map(|m| m.s_acc)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / n);
    Ok(Metrics {
        mse: avg(|m| m.mse),
        s_mse: avg(|m| m.s_mse),
        mim: avg(|m| m.mim),
        acc: avg(|m| m.acc),
        s_acc,
        f1: avg(|m| m.f1),
    })
}
