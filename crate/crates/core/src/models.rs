//! Forecasting models with hand-written reverse-mode gradients.
//!
//! | kind         | forward                                                        |
//! |--------------|----------------------------------------------------------------|
//! | `avg_window` | mean of the last `n` inputs, rolled forward for `h > 1`        |
//! | `linear_ar`  | `ẑ = W·x + b`                                                  |
//! | `mlp`        | `ẑ = W₂·relu(W₁·x + b₁) + b₂`                                  |
//! | `rnn`        | `s_t = tanh(W_h s_{t−1} + W_x x_t + b)`, `ẑ = W_o s_T + b_o`   |
//!
//! Parameters live in one flat vector, block by block in the order listed by
//! [`ModelSpec::shape`], each block row-major. Initial values are uniform in
//! `[−1/√fan_in, 1/√fan_in)` drawn from a ChaCha8 stream seeded with
//! `init_seed`; `fan_in` is `T` for the first dense layer and the hidden width
//! for everything downstream of a hidden state (all recurrent blocks included).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    AvgWindow,
    LinearAr,
    Mlp,
    Rnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::AvgWindow,
        ModelKind::LinearAr,
        ModelKind::Mlp,
        ModelKind::Rnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::AvgWindow => "avg_window",
            ModelKind::LinearAr => "linear_ar",
            ModelKind::Mlp => "mlp",
            ModelKind::Rnn => "rnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_len: usize,
    pub horizon: usize,
    /// Hidden width for `mlp` and `rnn`.
    pub hidden_dim: usize,
    /// Averaging window for `avg_window`.
    pub window: usize,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_len: usize, horizon: usize) -> Self {
        Self {
            kind,
            input_len,
            horizon,
            hidden_dim: 32,
            window: 1,
            init_seed: 0,
        }
    }

    pub fn with_hidden(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn with_seed(mut self, init_seed: u64) -> Self {
        self.init_seed = init_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len == 0 || self.horizon == 0 {
            return Err(Error::InvalidSpec("input_len and horizon must be >= 1".into()));
        }
        match self.kind {
            ModelKind::AvgWindow if self.window == 0 || self.window > self.input_len => {
                Err(Error::InvalidSpec(format!(
                    "avg_window needs 1 <= n <= T, got n={} T={}",
                    self.window, self.input_len
                )))
            }
            ModelKind::Mlp | ModelKind::Rnn if self.hidden_dim == 0 => {
                Err(Error::InvalidSpec("hidden_dim must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Parameter blocks as `(name, rows, cols, fan_in)`.
    fn blocks(&self) -> Vec<(&'static str, usize, usize, usize)> {
        let (t, h, hid) = (self.input_len, self.horizon, self.hidden_dim);
        match self.kind {
            ModelKind::AvgWindow => vec![],
            ModelKind::LinearAr => vec![("w", h, t, t), ("b", h, 1, t)],
            ModelKind::Mlp => vec![
                ("w1", hid, t, t),
                ("b1", hid, 1, t),
                ("w2", h, hid, hid),
                ("b2", h, 1, hid),
            ],
            ModelKind::Rnn => vec![
                ("w_x", hid, 1, hid),
                ("w_h", hid, hid, hid),
                ("b", hid, 1, hid),
                ("w_o", h, hid, hid),
                ("b_o", h, 1, hid),
            ],
        }
    }

    pub fn shape(&self) -> Vec<Block> {
        self.blocks()
            .into_iter()
            .map(|(name, rows, cols, _)| Block {
                name: name.to_string(),
                rows,
                cols,
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|(_, r, c, _)| r * c).sum()
    }

    pub fn init(&self) -> Result<ModelParams> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
        let mut values = Vec::with_capacity(self.param_count());
        for (_, rows, cols, fan_in) in self.blocks() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            values.extend((0..rows * cols).map(|_| rng.random_range(-bound..bound)));
        }
        Ok(ModelParams {
            kind: self.kind,
            shape: self.shape(),
            values,
        })
    }

    /// Wraps an explicit parameter vector after checking its length.
    pub fn params_from(&self, values: Vec<f64>) -> Result<ModelParams> {
        self.validate()?;
        let p = ModelParams {
            kind: self.kind,
            shape: self.shape(),
            values,
        };
        p.check(self)?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub shape: Vec<Block>,
    pub values: Vec<f64>,
}

impl ModelParams {
    fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.kind != spec.kind || self.shape != spec.shape() {
            return Err(Error::InvalidSpec(format!(
                "parameters for {} do not fit a {} spec",
                self.kind, spec.kind
            )));
        }
        let expected = spec.param_count();
        if self.values.len() != expected {
            return Err(Error::ShapeMismatch {
                context: "parameter vector",
                expected,
                got: self.values.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Splits a flat vector into consecutive blocks of the given sizes.
fn split_blocks<const N: usize>(mut v: &[f64], sizes: [usize; N]) -> [&[f64]; N] {
    sizes.map(|n| {
        let (head, tail) = v.split_at(n);
        v = tail;
        head
    })
}

fn split_blocks_mut<const N: usize>(mut v: &mut [f64], sizes: [usize; N]) -> [&mut [f64]; N] {
    sizes.map(|n| {
        let (head, tail) = std::mem::take(&mut v).split_at_mut(n);
        v = tail;
        head
    })
}

/// `out = w·x + b` for a row-major `rows × x.len()` matrix.
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        w.chunks_exact(x.len())
            .zip(b)
            .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()),
    );
}

/// Mean of the last `n` values.
pub fn avg_window_predict(input: &[f64], n: usize) -> Result<f64> {
    if n == 0 || n > input.len() {
        return Err(Error::InvalidSpec(format!(
            "averaging window {n} must lie in 1..={}",
            input.len()
        )));
    }
    Ok(input[input.len() - n..].iter().sum::<f64>() / n as f64)
}

fn avg_window_rollout(input: &[f64], n: usize, h: usize) -> Result<Vec<f64>> {
    let mut window = input.to_vec();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let p = avg_window_predict(&window, n)?;
        out.push(p);
        window.remove(0);
        window.push(p);
    }
    Ok(out)
}

/// Intermediate values kept for the backward pass.
enum Trace {
    None,
    Mlp { pre: Vec<f64>, act: Vec<f64> },
    Rnn { states: Vec<Vec<f64>> },
}

fn check_io(spec: &ModelSpec, params: &ModelParams, input: &[f64]) -> Result<()> {
    spec.validate()?;
    params.check(spec)?;
    if input.len() != spec.input_len {
        return Err(Error::ShapeMismatch {
            context: "model input",
            expected: spec.input_len,
            got: input.len(),
        });
    }
    Ok(())
}

fn run(spec: &ModelSpec, params: &ModelParams, input: &[f64]) -> Result<(Vec<f64>, Trace)> {
    check_io(spec, params, input)?;
    let (t, h, hid) = (spec.input_len, spec.horizon, spec.hidden_dim);
    let mut out = Vec::with_capacity(h);
    let trace = match spec.kind {
        ModelKind::AvgWindow => {
            out = avg_window_rollout(input, spec.window, h)?;
            Trace::None
        }
        ModelKind::LinearAr => {
            let [w, b] = split_blocks(&params.values, [h * t, h]);
            affine(w, b, input, &mut out);
            Trace::None
        }
        ModelKind::Mlp => {
            let [w1, b1, w2, b2] = split_blocks(&params.values, [hid * t, hid, h * hid, h]);
            let mut pre = Vec::with_capacity(hid);
            affine(w1, b1, input, &mut pre);
            let act: Vec<f64> = pre.iter().map(|a| a.max(0.0)).collect();
            affine(w2, b2, &act, &mut out);
            Trace::Mlp { pre, act }
        }
        ModelKind::Rnn => {
            let [w_x, w_h, b, w_o, b_o] = split_blocks(&params.values, [hid, hid * hid, hid, h * hid, h]);
            let mut states = Vec::with_capacity(t + 1);
            states.push(vec![0.0; hid]);
            let mut pre = Vec::with_capacity(hid);
            for &x in input {
                let prev = states.last().expect("initial state");
                affine(w_h, b, prev, &mut pre);
                let next = pre.iter().zip(w_x).map(|(a, wx)| (a + wx * x).tanh()).collect();
                states.push(next);
            }
            affine(w_o, b_o, states.last().expect("final state"), &mut out);
            Trace::Rnn { states }
        }
    };
    Ok((out, trace))
}

fn backprop(spec: &ModelSpec, params: &ModelParams, input: &[f64], trace: &Trace, upstream: &[f64]) -> Vec<f64> {
    let (t, h, hid) = (spec.input_len, spec.horizon, spec.hidden_dim);
    let mut grad = vec![0.0; params.values.len()];
    match (spec.kind, trace) {
        (ModelKind::AvgWindow, _) => {}
        (ModelKind::LinearAr, _) => {
            let [gw, gb] = split_blocks_mut(&mut grad, [h * t, h]);
            for (r, &u) in upstream.iter().enumerate() {
                for (g, &x) in gw[r * t..(r + 1) * t].iter_mut().zip(input) {
                    *g = u * x;
                }
                gb[r] = u;
            }
        }
        (ModelKind::Mlp, Trace::Mlp { pre, act }) => {
            let [_, _, w2, _] = split_blocks(&params.values, [hid * t, hid, h * hid, h]);
            let [gw1, gb1, gw2, gb2] = split_blocks_mut(&mut grad, [hid * t, hid, h * hid, h]);
            let mut d_act = vec![0.0; hid];
            for (o, &u) in upstream.iter().enumerate() {
                gb2[o] = u;
                let row = &w2[o * hid..(o + 1) * hid];
                for j in 0..hid {
                    gw2[o * hid + j] = u * act[j];
                    d_act[j] += row[j] * u;
                }
            }
            for j in 0..hid {
                let d_pre = if pre[j] > 0.0 { d_act[j] } else { 0.0 };
                gb1[j] = d_pre;
                for (g, &x) in gw1[j * t..(j + 1) * t].iter_mut().zip(input) {
                    *g = d_pre * x;
                }
            }
        }
        (ModelKind::Rnn, Trace::Rnn { states }) => {
            let [_, w_h, _, w_o, _] = split_blocks(&params.values, [hid, hid * hid, hid, h * hid, h]);
            let [gw_x, gw_h, gb, gw_o, gb_o] = split_blocks_mut(&mut grad, [hid, hid * hid, hid, h * hid, h]);
            let last = &states[t];
            let mut d_state = vec![0.0; hid];
            for (o, &u) in upstream.iter().enumerate() {
                gb_o[o] = u;
                let row = &w_o[o * hid..(o + 1) * hid];
                for j in 0..hid {
                    gw_o[o * hid + j] = u * last[j];
                    d_state[j] += row[j] * u;
                }
            }
            // back through time: states[step + 1] = tanh(...(states[step], input[step]))
            let mut d_pre = vec![0.0; hid];
            for step in (0..t).rev() {
                let cur = &states[step + 1];
                let prev = &states[step];
                for j in 0..hid {
                    d_pre[j] = d_state[j] * (1.0 - cur[j] * cur[j]);
                    gw_x[j] += d_pre[j] * input[step];
                    gb[j] += d_pre[j];
                    for (g, &p) in gw_h[j * hid..(j + 1) * hid].iter_mut().zip(prev) {
                        *g += d_pre[j] * p;
                    }
                }
                d_state.iter_mut().for_each(|d| *d = 0.0);
                for j in 0..hid {
                    for (d, &w) in d_state.iter_mut().zip(&w_h[j * hid..(j + 1) * hid]) {
                        *d += w * d_pre[j];
                    }
                }
            }
        }
        _ => unreachable!("trace does not match model kind"),
    }
    grad
}

/// Predicts `spec.horizon` values from one input window.
pub fn forward(spec: &ModelSpec, params: &ModelParams, input: &[f64]) -> Result<Vec<f64>> {
    run(spec, params, input).map(|(out, _)| out)
}

/// Gradient of a scalar loss with respect to the parameters, given
/// `upstream = ∂L/∂ẑ`.
pub fn backward(spec: &ModelSpec, params: &ModelParams, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
    let (_, trace) = run(spec, params, input)?;
    check_upstream(spec, upstream)?;
    Ok(backprop(spec, params, input, &trace, upstream))
}

fn check_upstream(spec: &ModelSpec, upstream: &[f64]) -> Result<()> {
    if upstream.len() != spec.horizon {
        return Err(Error::ShapeMismatch {
            context: "upstream gradient",
            expected: spec.horizon,
            got: upstream.len(),
        });
    }
    Ok(())
}

/// One forward pass, a loss evaluated on its output, and the matching
/// backward pass. `loss` returns an arbitrary payload and `∂L/∂ẑ`.
pub fn forward_backward<T>(
    spec: &ModelSpec,
    params: &ModelParams,
    input: &[f64],
    loss: impl FnOnce(&[f64]) -> Result<(T, Vec<f64>)>,
) -> Result<(Vec<f64>, T, Vec<f64>)> {
    let (out, trace) = run(spec, params, input)?;
    let (payload, upstream) = loss(&out)?;
    check_upstream(spec, &upstream)?;
    let grad = backprop(spec, params, input, &trace, &upstream);
    Ok((out, payload, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiStep {
    /// One forward pass of a model whose output dimension is `h`.
    Direct,
    /// `h` one-step passes, each sliding the model's own prediction into the window.
    Iterative,
}

pub fn predict_multistep(
    spec: &ModelSpec,
    params: &ModelParams,
    input: &[f64],
    h: usize,
    mode: MultiStep,
) -> Result<Vec<f64>> {
    match mode {
        MultiStep::Direct => {
            if spec.horizon != h {
                return Err(Error::ShapeMismatch {
                    context: "direct forecast horizon",
                    expected: spec.horizon,
                    got: h,
                });
            }
            forward(spec, params, input)
        }
        MultiStep::Iterative => {
            if spec.horizon != 1 {
                return Err(Error::ShapeMismatch {
                    context: "iterative forecasting needs a one-step model",
                    expected: 1,
                    got: spec.horizon,
                });
            }
            let mut window = input.to_vec();
            let mut out = Vec::with_capacity(h);
            for _ in 0..h {
                let next = forward(spec, params, &window)?[0];
                out.push(next);
                window.remove(0);
                window.push(next);
            }
            Ok(out)
        }
    }
}

const MAGIC: &str = "MIMIC-CHECKPOINT 1";

/// Serializes a model as a text header followed by raw parameters.
///
/// Layout (all header lines are ASCII and end in `\n`):
///
/// ```text
/// MIMIC-CHECKPOINT 1
/// kind <avg_window|linear_ar|mlp|rnn>
/// input_len <T>
/// horizon <h>
/// hidden_dim <H>
/// window <n>
/// init_seed <u64>
/// block <name> <rows> <cols>        (one line per block, in order)
/// values <count>
/// <count × 8 bytes: IEEE-754 binary64, little-endian>
/// ```
pub fn write_checkpoint(spec: &ModelSpec, params: &ModelParams) -> Result<Vec<u8>> {
    params.check(spec)?;
    let mut header = format!(
        "{MAGIC}\nkind {}\ninput_len {}\nhorizon {}\nhidden_dim {}\nwindow {}\ninit_seed {}\n",
        spec.kind, spec.input_len, spec.horizon, spec.hidden_dim, spec.window, spec.init_seed
    );
    for b in &params.shape {
        header.push_str(&format!("block {} {} {}\n", b.name, b.rows, b.cols));
    }
    header.push_str(&format!("values {}\n", params.values.len()));
    let mut bytes = header.into_bytes();
    bytes.reserve(params.values.len() * 8);
    for v in &params.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(ModelSpec, ModelParams)> {
    let bad = |msg: String| Error::Checkpoint(msg);
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated header".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8".into()))
    };
    if next_line()? != MAGIC {
        return Err(bad("missing magic line".into()));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = next_line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected {key:?}, found {line:?}")))
    };
    let num = |s: String, key: &str| {
        s.parse::<u64>()
            .map_err(|_| bad(format!("{key} is not an integer: {s:?}")))
    };
    let kind: ModelKind = field("kind")?.parse()?;
    let input_len = num(field("input_len")?, "input_len")? as usize;
    let horizon = num(field("horizon")?, "horizon")? as usize;
    let hidden_dim = num(field("hidden_dim")?, "hidden_dim")? as usize;
    let window = num(field("window")?, "window")? as usize;
    let init_seed = num(field("init_seed")?, "init_seed")?;
    let spec = ModelSpec {
        kind,
        input_len,
        horizon,
        hidden_dim,
        window,
        init_seed,
    };
    spec.validate()?;
    let mut shape = Vec::new();
    let count = loop {
        let line = next_line()?;
        let parts: Vec<&str> = line.split(' ').collect();
        match parts.as_slice() {
            ["block", name, rows, cols] => shape.push(Block {
                name: name.to_string(),
                rows: num(rows.to_string(), "rows")? as usize,
                cols: num(cols.to_string(), "cols")? as usize,
            }),
            ["values", n] => break num(n.to_string(), "values")? as usize,
            _ => return Err(bad(format!("unexpected header line {line:?}"))),
        }
    };
    if shape != spec.shape() {
        return Err(bad("block layout does not match the model kind".into()));
    }
    let body = &bytes[pos..];
    if body.len() != count * 8 {
        return Err(bad(format!("expected {} value bytes, found {}", count * 8, body.len())));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let params = spec.params_from(values)?;
    Ok((spec, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Relative error of `backward` against central differences of
    /// `Σ upstream·forward`.
    fn fd_error(spec: &ModelSpec, seed: u64) -> f64 {
        let params = spec.init().unwrap();
        let input = random_input(spec.input_len, seed);
        let upstream = random_input(spec.horizon, seed + 1);
        let analytic = backward(spec, &params, &input, &upstream).unwrap();
        let objective = |p: &ModelParams| -> f64 {
            forward(spec, p, &input)
                .unwrap()
                .iter()
                .zip(&upstream)
                .map(|(a, b)| a * b)
                .sum()
        };
        let eps = 1e-6;
        let mut probe = params.clone();
        let mut worst = 0.0f64;
        for (i, &a) in analytic.iter().enumerate() {
            let orig = probe.values[i];
            probe.values[i] = orig + eps;
            let up = objective(&probe);
            probe.values[i] = orig - eps;
            let down = objective(&probe);
            probe.values[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let denom = a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((a - numeric).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [ModelKind::LinearAr, ModelKind::Mlp, ModelKind::Rnn] {
            for (t, h) in [(4, 1), (6, 3)] {
                for seed in 0..3 {
                    let spec = ModelSpec::new(kind, t, h).with_hidden(5).with_seed(seed);
                    let err = fd_error(&spec, seed + 100);
                    assert!(err <= 1e-5, "{kind} T={t} h={h} seed={seed}: {err}");
                }
            }
        }
    }

    #[test]
    fn rnn_gradient_through_time() {
        for t in [2, 5, 16] {
            let spec = ModelSpec::new(ModelKind::Rnn, t, 1).with_hidden(6).with_seed(t as u64);
            let err = fd_error(&spec, 7);
            assert!(err <= 1e-5, "T={t}: {err}");
        }
    }

    #[test]
    fn linear_constant_prediction() {
        let spec = ModelSpec::new(ModelKind::LinearAr, 3, 1);
        let p = spec.params_from(vec![0.0, 0.0, 0.0, 2.5]).unwrap();
        assert_eq!(forward(&spec, &p, &[9.0, -4.0, 1.0]).unwrap(), vec![2.5]);
    }

    #[test]
    fn zero_mlp_outputs_bias() {
        let spec = ModelSpec::new(ModelKind::Mlp, 3, 2).with_hidden(4);
        let mut values = vec![0.0; spec.param_count()];
        let n = values.len();
        values[n - 2] = 0.75;
        values[n - 1] = -1.25;
        let p = spec.params_from(values).unwrap();
        assert_eq!(forward(&spec, &p, &[1.0, 2.0, 3.0]).unwrap(), vec![0.75, -1.25]);
    }

    #[test]
    fn zero_rnn_outputs_bias() {
        let spec = ModelSpec::new(ModelKind::Rnn, 5, 1).with_hidden(3);
        let mut p = spec.init().unwrap();
        // zero W_x, W_h and b; keep the random readout weights
        for v in &mut p.values[..3 + 9 + 3] {
            *v = 0.0;
        }
        let b_o = *p.values.last().unwrap();
        assert_eq!(forward(&spec, &p, &[1.0, -2.0, 3.0, 0.5, 4.0]).unwrap(), vec![b_o]);
    }

    #[test]
    fn zero_upstream_zero_grad() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind, 4, 2).with_hidden(3).with_window(2);
            let p = spec.init().unwrap();
            let g = backward(&spec, &p, &[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0]).unwrap();
            assert!(g.iter().all(|v| *v == 0.0), "{kind}");
            assert_eq!(g.len(), spec.param_count());
        }
    }

    #[test]
    fn linear_chain_rule() {
        let spec = ModelSpec::new(ModelKind::LinearAr, 3, 1).with_seed(4);
        let p = spec.init().unwrap();
        let x = [0.5, -1.0, 2.0];
        let g = backward(&spec, &p, &x, &[1.5]).unwrap();
        assert_eq!(g, vec![0.75, -1.5, 3.0, 1.5]);
    }

    #[test]
    fn avg_window_examples() {
        assert_eq!(avg_window_predict(&[1.0, 2.0, 3.0], 1).unwrap(), 3.0);
        assert_eq!(avg_window_predict(&[1.0, 2.0, 3.0], 2).unwrap(), 2.5);
        assert_eq!(avg_window_predict(&[4.0; 6], 5).unwrap(), 4.0);
        assert!(avg_window_predict(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn multistep_modes() {
        let one = ModelSpec::new(ModelKind::Mlp, 4, 1).with_hidden(3).with_seed(2);
        let p = one.init().unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        let f = forward(&one, &p, &x).unwrap();
        assert_eq!(predict_multistep(&one, &p, &x, 1, MultiStep::Direct).unwrap(), f);
        assert_eq!(predict_multistep(&one, &p, &x, 1, MultiStep::Iterative).unwrap(), f);
        assert!(predict_multistep(&one, &p, &x, 3, MultiStep::Direct).is_err());

        let three = ModelSpec::new(ModelKind::Mlp, 4, 3).with_hidden(3);
        let p3 = three.init().unwrap();
        assert!(predict_multistep(&three, &p3, &x, 3, MultiStep::Iterative).is_err());
        assert_eq!(
            predict_multistep(&three, &p3, &x, 3, MultiStep::Direct).unwrap().len(),
            3
        );
    }

    #[test]
    fn iterative_persistence() {
        let spec = ModelSpec::new(ModelKind::AvgWindow, 3, 1);
        let p = spec.init().unwrap();
        let out = predict_multistep(&spec, &p, &[1.0, 5.0, 2.0], 4, MultiStep::Iterative).unwrap();
        assert_eq!(out, vec![2.0; 4]);
    }

    #[test]
    fn iterative_linear_continues_a_line() {
        // x_{t+1} = 2x_t − x_{t−1} extrapolates any arithmetic progression
        let spec = ModelSpec::new(ModelKind::LinearAr, 3, 1);
        let p = spec.params_from(vec![0.0, -1.0, 2.0, 0.0]).unwrap();
        let out = predict_multistep(&spec, &p, &[1.0, 1.5, 2.0], 4, MultiStep::Iterative).unwrap();
        assert_eq!(out, vec![2.5, 3.0, 3.5, 4.0]);
    }

    #[test]
    fn same_seed_same_init() {
        let spec = ModelSpec::new(ModelKind::Rnn, 8, 1).with_hidden(4).with_seed(77);
        assert_eq!(spec.init().unwrap(), spec.init().unwrap());
        let other = spec.clone().with_seed(78);
        assert_ne!(spec.init().unwrap().values, other.init().unwrap().values);
        let bound = 1.0 / 2.0;
        assert!(spec.init().unwrap().values.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn shape_errors() {
        let spec = ModelSpec::new(ModelKind::LinearAr, 3, 1);
        let p = spec.init().unwrap();
        assert!(forward(&spec, &p, &[1.0, 2.0]).is_err());
        assert!(backward(&spec, &p, &[1.0, 2.0, 3.0], &[1.0, 1.0]).is_err());
        assert!(spec.params_from(vec![0.0; 3]).is_err());
        let other = ModelSpec::new(ModelKind::LinearAr, 4, 1);
        assert!(forward(&other, &p, &[0.0; 4]).is_err());
        assert!(ModelSpec::new(ModelKind::Mlp, 3, 1).with_hidden(0).validate().is_err());
        assert!(ModelSpec::new(ModelKind::AvgWindow, 3, 1)
            .with_window(4)
            .validate()
            .is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind, 6, 2).with_hidden(3).with_window(2).with_seed(5);
            let p = spec.init().unwrap();
            let bytes = write_checkpoint(&spec, &p).unwrap();
            let (spec2, p2) = read_checkpoint(&bytes).unwrap();
            assert_eq!(spec2, spec);
            assert_eq!(p2, p);
        }
    }

    #[test]
    fn checkpoint_layout() {
        let spec = ModelSpec::new(ModelKind::LinearAr, 2, 1);
        let p = spec.params_from(vec![1.0, -2.0, 0.5]).unwrap();
        let bytes = write_checkpoint(&spec, &p).unwrap();
        let header = "MIMIC-CHECKPOINT 1\nkind linear_ar\ninput_len 2\nhorizon 1\nhidden_dim 32\nwindow 1\n\
                      init_seed 0\nblock w 1 2\nblock b 1 1\nvalues 3\n";
        assert_eq!(&bytes[..header.len()], header.as_bytes());
        assert_eq!(&bytes[header.len()..header.len() + 8], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), header.len() + 24);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_checkpoint(b"garbage\n").is_err());
    }
}
