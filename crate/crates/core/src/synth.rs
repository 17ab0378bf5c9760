//! Seeded sinusoid-plus-noise benchmark series.
//!
//! `y(t) = sin(t) + sin(π/2·t) + sin(−3π/2·t) + slope·t + ε`, `t = k·dt`.
//!
//! Noise is reproducible across builds: a ChaCha8 stream seeded with
//! `seed` yields 64-bit words, each turned into a uniform in the open interval
//! (0, 1) as `((w >> 11) + 0.5) · 2⁻⁵³`, and consecutive uniform pairs
//! `(u₁, u₂)` become two standard normals through the Box–Muller transform
//! `√(−2 ln u₁)·cos(2πu₂)`, `√(−2 ln u₁)·sin(2πu₂)`. Each normal `g` is
//! mapped to `μ + σ·g`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_points: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub trend_slope: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    0.1
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_points: 1000,
            dt: default_dt(),
            sigma: 0.5,
            mu: 0.0,
            trend_slope: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::InvalidSpec(format!(
                "n_points must be >= 2, got {}",
                self.n_points
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !self.mu.is_finite() || !self.trend_slope.is_finite() {
            return Err(Error::InvalidSpec("mu and trend_slope must be finite".into()));
        }
        Ok(())
    }
}

/// Noise-free part of the signal at time `t`.
pub fn clean_signal(t: f64, trend_slope: f64) -> f64 {
    t.sin() + (FRAC_PI_2 * t).sin() + (-3.0 * FRAC_PI_2 * t).sin() + trend_slope * t
}

/// Box–Muller normal stream over a seeded ChaCha8 generator.
struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn open_unit(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.open_unit();
        let u2 = self.open_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

pub fn generate(spec: &SynthSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut noise = GaussianStream::new(spec.seed);
    let values = (0..spec.n_points)
        .map(|k| {
            let t = k as f64 * spec.dt;
            let clean = clean_signal(t, spec.trend_slope);
            if spec.sigma == 0.0 {
                clean
            } else {
                clean + spec.mu + spec.sigma * noise.next()
            }
        })
        .collect();
    TimeSeries::with_name(values, "value")
}
