//! Anti-mimicking regularized loss.
//!
//! For targets `z`, predictions `ẑ` and lag depth `K`:
//!
//! ```text
//! L = Σ_i (z_i − ẑ_i)²  +  λ · Σ_i Σ_{k=1..K} [(z_i − z_{i−k}) · (z_i − ẑ_i)]²
//! ```
//!
//! Lagged targets that fall before the first target are read from the trailing
//! end of `history` (the input window), always ground truth. The penalty is
//! largest when `ẑ_i` sits on `z_{i−1}` while `z_i` moved away from it, and is
//! zero at `ẑ_i = z_i`. Each term is a square, so `L ≥ 0`, and `L` is convex
//! in `ẑ` with diagonal Hessian `2 + 2λ Σ_k (z_i − z_{i−k})²`.
//!
//! Values use the sum convention; the trainer divides by batch size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    /// Weight of the anti-mimicking penalty.
    pub lambda: f64,
    /// Lag depth.
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "one")]
    pub horizon: usize,
}

fn one() -> usize {
    1
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::mse()
    }
}

impl LossSpec {
    pub fn new(lambda: f64, k: usize, horizon: usize) -> Result<Self> {
        let s = Self { lambda, k, horizon };
        s.validate()?;
        Ok(s)
    }

    /// λ = 0, K = 1, h = 1.
    pub fn mse() -> Self {
        Self {
            lambda: 0.0,
            k: 1,
            horizon: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidSpec("lag depth K must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    /// `mse_part + λ·reg_part`.
    pub value: f64,
    /// ∂L/∂ẑ, one entry per prediction.
    pub grad: Vec<f64>,
    pub mse_part: f64,
    /// Penalty sum, not scaled by λ.
    pub reg_part: f64,
}

/// Value and gradient of the loss for one prediction vector.
///
/// `history` holds the observations preceding `z[0]`, most recent last, and
/// must contain at least `K` values.
pub fn loss_eval(z: &[f64], zhat: &[f64], history: &[f64], spec: &LossSpec) -> Result<LossEval> {
    spec.validate()?;
    if z.len() != zhat.len() {
        return Err(Error::ShapeMismatch {
            context: "loss predictions",
            expected: z.len(),
            got: zhat.len(),
        });
    }
    if history.len() < spec.k {
        return Err(Error::InsufficientHistory {
            needed: spec.k,
            got: history.len(),
        });
    }
    if z.iter().chain(zhat).chain(history).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss inputs"));
    }

    // z_{i-k} lives at lagged[base + i - k]
    let base = history.len();
    let lagged = |j: usize| if j < base { history[j] } else { z[j - base] };

    let mut mse_part = 0.0;
    let mut reg_part = 0.0;
    let mut grad = Vec::with_capacity(z.len());
    for (i, (&zi, &zh)) in z.iter().zip(zhat).enumerate() {
        let err = zi - zh;
        let mut weight = 0.0;
        for k in 1..=spec.k {
            let d = zi - lagged(base + i - k);
            weight += d * d;
            reg_part += (d * err) * (d * err);
        }
        mse_part += err * err;
        grad.push(-2.0 * err - 2.0 * spec.lambda * weight * err);
    }
    Ok(LossEval {
        value: mse_part + spec.lambda * reg_part,
        grad,
        mse_part,
        reg_part,
    })
}

/// One direct multi-horizon window: `h` targets, `h` predictions and the
/// observations before the first target (the anchor is `history.last()`).
#[derive(Clone, Copy, Debug)]
pub struct HorizonWindow<'a> {
    pub targets: &'a [f64],
    pub predictions: &'a [f64],
    pub history: &'a [f64],
}

/// Loss summed over a batch of horizon windows; the gradient is the
/// concatenation of the per-window gradients in batch order.
///
/// Within a window lagged terms use ground-truth targets, never the model's
/// own earlier predictions.
pub fn loss_eval_multihorizon(windows: &[HorizonWindow<'_>], spec: &LossSpec, exec: Exec) -> Result<LossEval> {
    spec.validate()?;
    for w in windows {
        if w.targets.len() != spec.horizon {
            return Err(Error::ShapeMismatch {
                context: "horizon window",
                expected: spec.horizon,
                got: w.targets.len(),
            });
        }
    }
    let evals = par::try_map_collect(exec, windows, |w| loss_eval(w.targets, w.predictions, w.history, spec))?;
    let mut out = LossEval {
        value: 0.0,
        grad: Vec::with_capacity(windows.len() * spec.horizon),
        mse_part: 0.0,
        reg_part: 0.0,
    };
    for e in evals {
        out.value += e.value;
        out.mse_part += e.mse_part;
        out.reg_part += e.reg_part;
        out.grad.extend_from_slice(&e.grad);
    }
    Ok(out)
}

/// Largest relative discrepancy between the analytic gradient and central
/// finite differences of the loss value, per prediction coordinate.
/// The denominator is `max(|analytic|, |numeric|, 1e-12)`.
pub fn grad_check(z: &[f64], zhat: &[f64], history: &[f64], spec: &LossSpec, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::InvalidSpec(format!(
            "epsilon must lie in (0, 1e-3], got {epsilon}"
        )));
    }
    let analytic = loss_eval(z, zhat, history, spec)?.grad;
    let mut probe = zhat.to_vec();
    let mut worst = 0.0f64;
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let up = loss_eval(z, &probe, history, spec)?.value;
        probe[i] = orig - epsilon;
        let down = loss_eval(z, &probe, history, spec)?.value;
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-12);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(lambda: f64, k: usize) -> LossSpec {
        LossSpec::new(lambda, k, 1).unwrap()
    }

    /// Direct transcription of the double sum, used as a reference.
    fn reference_value(z: &[f64], zhat: &[f64], history: &[f64], lambda: f64, k_max: usize) -> f64 {
        let full: Vec<f64> = history.iter().chain(z).copied().collect();
        let h = history.len();
        let mut total = 0.0;
        for i in 0..z.len() {
            total += (z[i] - zhat[i]).powi(2);
            for k in 1..=k_max {
                total += lambda * ((z[i] - full[h + i - k]) * (z[i] - zhat[i])).powi(2);
            }
        }
        total
    }

    #[test]
    fn lambda_zero_is_plain_squared_error() {
        let z = [1.0, -0.5, 2.0];
        let zh = [0.5, 0.5, 1.0];
        let e = loss_eval(&z, &zh, &[0.3], &spec(0.0, 1)).unwrap();
        assert_eq!(e.value, 0.25 + 1.0 + 1.0);
        assert_eq!(e.grad, vec![-1.0, 2.0, -2.0]);
    }

    #[test]
    fn single_point_hand_example() {
        let e = loss_eval(&[0.5], &[0.25], &[0.0], &spec(1.0, 1)).unwrap();
        assert_eq!(e.value, 0.078125);
        assert_eq!(e.mse_part, 0.0625);
        assert_eq!(e.reg_part, 0.015625);
        assert_eq!(e.grad, vec![-0.625]);
    }

    #[test]
    fn perfect_prediction_is_the_minimum() {
        let z = [1.0, 4.0, -2.0];
        let e = loss_eval(&z, &z, &[0.0, 7.0, 3.0], &spec(50.0, 3)).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn two_step_horizon_example() {
        let s = LossSpec::new(1.0, 1, 2).unwrap();
        let w = HorizonWindow {
            targets: &[1.0, 2.0],
            predictions: &[1.0, 1.0],
            history: &[0.0],
        };
        let e = loss_eval_multihorizon(&[w], &s, Exec::Sequential).unwrap();
        assert_eq!(e.mse_part, 1.0);
        assert_eq!(e.reg_part, 1.0);
        assert_eq!(e.value, 2.0);
    }

    #[test]
    fn unit_horizon_matches_single_window_bitwise() {
        let s = spec(3.5, 1);
        let w = HorizonWindow {
            targets: &[0.7],
            predictions: &[0.1],
            history: &[0.2, -0.4],
        };
        let single = loss_eval(w.targets, w.predictions, w.history, &s).unwrap();
        let multi = loss_eval_multihorizon(&[w], &s, Exec::Auto).unwrap();
        assert_eq!(single.value.to_bits(), multi.value.to_bits());
        assert_eq!(single.grad, multi.grad);
    }

    #[test]
    fn identical_windows_add_up() {
        let s = LossSpec::new(2.0, 2, 3).unwrap();
        let w = HorizonWindow {
            targets: &[0.3, -0.2, 0.9],
            predictions: &[0.0, 0.1, 0.5],
            history: &[1.0, 0.4],
        };
        let one = loss_eval_multihorizon(&[w], &s, Exec::Auto).unwrap();
        let two = loss_eval_multihorizon(&[w, w], &s, Exec::Auto).unwrap();
        assert_eq!(two.value, 2.0 * one.value);
        assert_eq!(two.grad.len(), 6);
    }

    #[test]
    fn horizon_length_is_checked() {
        let s = LossSpec::new(1.0, 1, 2).unwrap();
        let w = HorizonWindow {
            targets: &[1.0],
            predictions: &[1.0],
            history: &[0.0],
        };
        assert!(loss_eval_multihorizon(&[w], &s, Exec::Auto).is_err());
    }

    #[test]
    fn history_and_finiteness_errors() {
        assert!(matches!(
            loss_eval(&[1.0], &[1.0], &[0.0], &spec(1.0, 2)),
            Err(Error::InsufficientHistory { needed: 2, got: 1 })
        ));
        assert!(matches!(
            loss_eval(&[1.0], &[f64::NAN], &[0.0], &spec(1.0, 1)),
            Err(Error::NonFinite(_))
        ));
        assert!(LossSpec::new(-1.0, 1, 1).is_err());
        assert!(LossSpec::new(1.0, 0, 1).is_err());
    }

    #[test]
    fn grad_check_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (z, zh, hist) = (draw(6), draw(6), draw(4));
        assert!(grad_check(&z, &zh, &hist, &spec(0.0, 1), 1e-6).unwrap() <= 1e-9);
        assert!(grad_check(&z, &zh, &hist, &spec(10.0, 3), 1e-6).unwrap() <= 1e-6);
        assert_eq!(grad_check(&z, &z, &hist, &spec(10.0, 3), 1e-6).unwrap(), 0.0);
        assert!(grad_check(&z, &zh, &hist, &spec(1.0, 1), 1e-2).is_err());
    }

    #[test]
    fn penalty_is_larger_when_copying() {
        let z = [1.0, 3.0];
        let copy = loss_eval(&z, &[0.0, 1.0], &[0.0], &spec(1.0, 1)).unwrap();
        let exact = loss_eval(&z, &z, &[0.0], &spec(1.0, 1)).unwrap();
        assert!(copy.reg_part > exact.reg_part);
        assert_eq!(exact.reg_part, 0.0);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64, usize)> {
        (1usize..8, 1usize..4).prop_flat_map(|(n, k)| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, k..k + 3),
                prop_oneof![Just(0.0), Just(1.0), Just(100.0), 0.0f64..20.0],
                Just(k),
            )
        })
    }

    proptest! {
        #[test]
        fn value_matches_reference((z, zh, hist, lambda, k) in instance()) {
            let e = loss_eval(&z, &zh, &hist, &spec(lambda, k)).unwrap();
            let r = reference_value(&z, &zh, &hist, lambda, k);
            prop_assert!((e.value - r).abs() <= 1e-12 * r.max(1.0));
            prop_assert!((e.value - (e.mse_part + lambda * e.reg_part)).abs() <= 1e-12 * e.value.max(1e-300));
            prop_assert!(e.value >= 0.0);
            prop_assert_eq!(e.grad.len(), z.len());
        }

        #[test]
        fn k1_is_the_single_lag_form((z, zh, hist, lambda, _k) in instance()) {
            let e = loss_eval(&z, &zh, &hist, &spec(lambda, 1)).unwrap();
            let prev: Vec<f64> = std::iter::once(*hist.last().unwrap()).chain(z.iter().copied()).collect();
            let direct: f64 = (0..z.len())
                .map(|i| (z[i] - zh[i]).powi(2) + lambda * ((z[i] - prev[i]) * (z[i] - zh[i])).powi(2))
                .sum();
            prop_assert!((e.value - direct).abs() <= 1e-12 * direct.max(1.0));
        }

        #[test]
        fn midpoint_convex((z, a, hist, lambda, k) in instance(), shift in prop::collection::vec(-3.0f64..3.0, 8)) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let s = spec(lambda, k);
            let la = loss_eval(&z, &a, &hist, &s).unwrap().value;
            let lb = loss_eval(&z, &b, &hist, &s).unwrap().value;
            let lm = loss_eval(&z, &mid, &hist, &s).unwrap().value;
            prop_assert!(lm <= 0.5 * (la + lb) + 1e-12 * (la + lb).max(1.0));
        }

        #[test]
        fn scaling_behaviour((z, zh, hist, lambda, k) in instance(), c in 0.1f64..10.0) {
            let sc = |v: &[f64]| v.iter().map(|x| c * x).collect::<Vec<f64>>();
            let s = spec(lambda, k);
            let e = loss_eval(&z, &zh, &hist, &s).unwrap();
            let es = loss_eval(&sc(&z), &sc(&zh), &sc(&hist), &s).unwrap();
            prop_assert!((es.mse_part - c * c * e.mse_part).abs() <= 1e-10 * es.mse_part.max(1e-12));
            prop_assert!((es.reg_part - c.powi(4) * e.reg_part).abs() <= 1e-10 * es.reg_part.max(1e-12));
        }

        #[test]
        fn asymmetric_penalty(zp in -3.0f64..3.0, dz in 0.01f64..3.0) {
            let zi = zp + dz;
            let at_prev = loss_eval(&[zi], &[zp], &[zp], &spec(1.0, 1)).unwrap();
            let at_target = loss_eval(&[zi], &[zi], &[zp], &spec(1.0, 1)).unwrap();
            prop_assert!(at_prev.reg_part > at_target.reg_part);
            prop_assert_eq!(at_target.reg_part, 0.0);
        }
    }
}
