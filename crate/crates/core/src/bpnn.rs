//! Three-layer backpropagation network.
//!
//! For input `x` the hidden layer computes
//!
//! ```text
//! s_j = Σ_i W[j][i]·x_i − θ_j        h_j = tansig(s_j)
//! ```
//!
//! and the output layer
//!
//! ```text
//! r_k = Σ_j V[k][j]·h_j − φ_k        y_k = g(r_k)
//! ```
//!
//! where `tansig(s) = 2/(1 + e^(−2s)) − 1` and `g` is the configured output
//! activation (logistic by default). Thresholds enter with a minus sign, so
//! their gradients are the negated unit deltas.
//!
//! Training is per-example gradient descent on `½ Σ_k (y_k − t_k)²`.

#![allow(clippy::needless_range_loop)]

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn tansig(s: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * s).exp()) - 1.0
}

pub fn logistic(r: f64) -> f64 {
    1.0 / (1.0 + (-r).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tansig,
    Logistic,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tansig => tansig(x),
            Activation::Logistic => logistic(x),
        }
    }

    /// Derivative expressed through the activation's output value.
    fn slope(self, out: f64) -> f64 {
        match self {
            Activation::Tansig => 1.0 - out * out,
            Activation::Logistic => out * (1.0 - out),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tansig" => Ok(Activation::Tansig),
            "logistic" => Ok(Activation::Logistic),
            other => Err(Error::InvalidInput(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSizes {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl LayerSizes {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        LayerSizes {
            input,
            hidden,
            output,
        }
    }
}

impl Default for LayerSizes {
    /// Five features in, four hidden units, one priority out.
    fn default() -> Self {
        LayerSizes::new(5, 4, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpNetwork {
    sizes: LayerSizes,
    hidden_activation: Activation,
    output_activation: Activation,
    /// hidden × input, row-major.
    w: Vec<f64>,
    theta: Vec<f64>,
    /// output × hidden, row-major.
    v: Vec<f64>,
    phi: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub y: Vec<f64>,
}

/// Loss gradients, laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Something the network can be fitted to.
pub trait TrainingExample {
    fn input(&self) -> &[f64];
    fn target(&self) -> &[f64];
}

impl TrainingExample for (Vec<f64>, Vec<f64>) {
    fn input(&self) -> &[f64] {
        &self.0
    }

    fn target(&self) -> &[f64] {
        &self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 500,
            seed: 0,
            shuffle: true,
        }
    }
}

impl BpNetwork {
    /// Parameters drawn uniformly from [-0.5, 0.5]. Tansig hidden units,
    /// logistic output.
    pub fn init(seed: u64, sizes: LayerSizes) -> Result<Self> {
        check_sizes(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.5..=0.5)).collect() };
        let w = draw(sizes.hidden * sizes.input);
        let theta = draw(sizes.hidden);
        let v = draw(sizes.output * sizes.hidden);
        let phi = draw(sizes.output);
        Ok(BpNetwork {
            sizes,
            hidden_activation: Activation::Tansig,
            output_activation: Activation::Logistic,
            w,
            theta,
            v,
            phi,
        })
    }

    /// Builds a network from explicit parameters, checking shapes and
    /// finiteness. `w` and `v` are row-major.
    pub fn from_parts(
        sizes: LayerSizes,
        hidden_activation: Activation,
        output_activation: Activation,
        w: Vec<f64>,
        theta: Vec<f64>,
        v: Vec<f64>,
        phi: Vec<f64>,
    ) -> Result<Self> {
        check_sizes(sizes)?;
        let expect = [
            ("W", w.len(), sizes.hidden * sizes.input),
            ("theta", theta.len(), sizes.hidden),
            ("V", v.len(), sizes.output * sizes.hidden),
            ("phi", phi.len(), sizes.output),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::contract(format!(
                    "{name} has {got} entries, expected {want}"
                )));
            }
        }
        if !w
            .iter()
            .chain(&theta)
            .chain(&v)
            .chain(&phi)
            .all(|p| p.is_finite())
        {
            return Err(Error::contract("network parameters must be finite"));
        }
        Ok(BpNetwork {
            sizes,
            hidden_activation,
            output_activation,
            w,
            theta,
            v,
            phi,
        })
    }

    pub fn with_output_activation(mut self, act: Activation) -> Self {
        self.output_activation = act;
        self
    }

    pub fn with_hidden_activation(mut self, act: Activation) -> Self {
        self.hidden_activation = act;
        self
    }

    pub fn sizes(&self) -> LayerSizes {
        self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Mutable view of every parameter in the order W, θ, V, φ.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w
            .iter_mut()
            .chain(self.theta.iter_mut())
            .chain(self.v.iter_mut())
            .chain(self.phi.iter_mut())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Trace> {
        let LayerSizes {
            input,
            hidden,
            output,
        } = self.sizes;
        if x.len() != input {
            return Err(Error::contract(format!(
                "input has {} components, network expects {input}",
                x.len()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::contract("network input must be finite"));
        }
        let mut s = Vec::with_capacity(hidden);
        let mut h = Vec::with_capacity(hidden);
        for j in 0..hidden {
            let row = &self.w[j * input..(j + 1) * input];
            let sj = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() - self.theta[j];
            s.push(sj);
            h.push(self.hidden_activation.apply(sj));
        }
        let mut r = Vec::with_capacity(output);
        let mut y = Vec::with_capacity(output);
        for k in 0..output {
            let row = &self.v[k * hidden..(k + 1) * hidden];
            let rk = row.iter().zip(&h).map(|(v, h)| v * h).sum::<f64>() - self.phi[k];
            r.push(rk);
            y.push(self.output_activation.apply(rk));
        }
        Ok(Trace { s, h, r, y })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.y)
    }

    /// Index of the largest output.
    pub fn recognise(&self, x: &[f64]) -> Result<usize> {
        let y = self.predict(x)?;
        let mut best = 0;
        for (k, v) in y.iter().enumerate() {
            if *v > y[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn loss(&self, x: &[f64], target: &[f64]) -> Result<f64> {
        let y = self.predict(x)?;
        check_target(target, self.sizes.output)?;
        Ok(half_squared_error(&y, target))
    }

    /// Backpropagated gradients of the loss at one example, plus the loss.
    pub fn gradients(&self, x: &[f64], target: &[f64]) -> Result<(Gradients, f64)> {
        let mut scratch = Scratch::new(self.sizes);
        let loss = self.backprop(x, target, &mut scratch)?;
        Ok((scratch.grads, loss))
    }

    /// Fills `scratch.grads` with the gradient at one example and returns the
    /// loss. Allocation-free.
    fn backprop(&self, x: &[f64], target: &[f64], scratch: &mut Scratch) -> Result<f64> {
        check_target(target, self.sizes.output)?;
        let LayerSizes {
            input,
            hidden,
            output,
        } = self.sizes;
        if x.len() != input {
            return Err(Error::contract(format!(
                "input has {} components, network expects {input}",
                x.len()
            )));
        }
        let Scratch {
            h,
            y,
            delta_hidden,
            delta_out,
            grads,
        } = scratch;

        for j in 0..hidden {
            let row = &self.w[j * input..(j + 1) * input];
            let s = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() - self.theta[j];
            h[j] = self.hidden_activation.apply(s);
        }
        let mut loss = 0.0;
        for k in 0..output {
            let row = &self.v[k * hidden..(k + 1) * hidden];
            let r = row.iter().zip(h.iter()).map(|(v, h)| v * h).sum::<f64>() - self.phi[k];
            y[k] = self.output_activation.apply(r);
            let err = y[k] - target[k];
            loss += 0.5 * err * err;
            delta_out[k] = err * self.output_activation.slope(y[k]);
        }
        for j in 0..hidden {
            let back: f64 = (0..output)
                .map(|k| delta_out[k] * self.v[k * hidden + j])
                .sum();
            delta_hidden[j] = back * self.hidden_activation.slope(h[j]);
        }

        for k in 0..output {
            for j in 0..hidden {
                grads.v[k * hidden + j] = delta_out[k] * h[j];
            }
            grads.phi[k] = -delta_out[k];
        }
        for j in 0..hidden {
            for i in 0..input {
                grads.w[j * input + i] = delta_hidden[j] * x[i];
            }
            grads.theta[j] = -delta_hidden[j];
        }
        Ok(loss)
    }

    /// One descent step: every parameter moves by `-learning_rate · gradient`.
    pub fn apply_gradients(&mut self, g: &Gradients, learning_rate: f64) {
        let steps = g.w.iter().chain(&g.theta).chain(&g.v).chain(&g.phi);
        for (p, d) in self.params_mut().zip(steps) {
            *p -= learning_rate * d;
        }
    }

    /// Fits the network and returns the mean loss of every epoch.
    ///
    /// Each example's loss is measured just before its own update.
    pub fn train<E: TrainingExample>(
        &mut self,
        examples: &[E],
        cfg: &TrainConfig,
    ) -> Result<Vec<f64>> {
        if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
            return Err(Error::contract("learning rate must be positive"));
        }
        if cfg.epochs == 0 {
            return Ok(Vec::new());
        }
        if examples.is_empty() {
            return Err(Error::InvalidInput("no training examples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut scratch = Scratch::new(self.sizes);
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 1..=cfg.epochs {
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            let mut total = 0.0;
            for &i in &order {
                let ex = &examples[i];
                total += self.backprop(ex.input(), ex.target(), &mut scratch)?;
                self.apply_gradients(&scratch.grads, cfg.learning_rate);
            }
            let mean = total / examples.len() as f64;
            if !mean.is_finite() || !self.params_mut().all(|p| p.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            history.push(mean);
        }
        Ok(history)
    }

    pub fn to_json(&self) -> String {
        let rows = |m: &[f64], width: usize| -> Vec<Vec<f64>> {
            m.chunks(width).map(<[f64]>::to_vec).collect()
        };
        let file = ModelFile {
            sizes: [self.sizes.input, self.sizes.hidden, self.sizes.output],
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
            w: rows(&self.w, self.sizes.input),
            theta: self.theta.clone(),
            v: rows(&self.v, self.sizes.hidden),
            phi: self.phi.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serialises") + "\n"
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let [input, hidden, output] = file.sizes;
        let sizes = LayerSizes::new(input, hidden, output);
        let flatten = |name: &str, m: Vec<Vec<f64>>, rows: usize, cols: usize| {
            if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                return Err(format!("{name} must be {rows}×{cols}"));
            }
            Ok(m.into_iter().flatten().collect::<Vec<f64>>())
        };
        let w = flatten("W", file.w, hidden, input)?;
        let v = flatten("V", file.v, output, hidden)?;
        BpNetwork::from_parts(
            sizes,
            file.hidden_activation,
            file.output_activation,
            w,
            file.theta,
            v,
            file.phi,
        )
        .map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BpNetwork::from_json(&text).map_err(|reason| Error::Corrupt {
            path: path.to_path_buf(),
            line: 0,
            reason,
        })
    }
}

/// Reusable buffers for one backward pass.
struct Scratch {
    h: Vec<f64>,
    y: Vec<f64>,
    delta_hidden: Vec<f64>,
    delta_out: Vec<f64>,
    grads: Gradients,
}

impl Scratch {
    fn new(sizes: LayerSizes) -> Self {
        Scratch {
            h: vec![0.0; sizes.hidden],
            y: vec![0.0; sizes.output],
            delta_hidden: vec![0.0; sizes.hidden],
            delta_out: vec![0.0; sizes.output],
            grads: Gradients {
                w: vec![0.0; sizes.hidden * sizes.input],
                theta: vec![0.0; sizes.hidden],
                v: vec![0.0; sizes.output * sizes.hidden],
                phi: vec![0.0; sizes.output],
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    sizes: [usize; 3],
    hidden_activation: Activation,
    output_activation: Activation,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    theta: Vec<f64>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    phi: Vec<f64>,
}

fn check_sizes(sizes: LayerSizes) -> Result<()> {
    if sizes.input == 0 || sizes.hidden == 0 || sizes.output == 0 {
        return Err(Error::contract(format!(
            "layer sizes must be positive, got {}-{}-{}",
            sizes.input, sizes.hidden, sizes.output
        )));
    }
    Ok(())
}

fn check_target(target: &[f64], output: usize) -> Result<()> {
    if target.len() != output {
        return Err(Error::contract(format!(
            "target has {} components, network has {output} outputs",
            target.len()
        )));
    }
    Ok(())
}

fn half_squared_error(y: &[f64], t: &[f64]) -> f64 {
    0.5 * y.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>()
}
