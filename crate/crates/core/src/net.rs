//! The 2-64-32-8-1 perceptron mapping `(N, i)` to one ansatz angle, trained
//! with Adam on the mean absolute error.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{AnsatzSpec, Layer, ModelSpec, ParamSet, ParamSource};

pub const LAYER_SIZES: [usize; 5] = [2, 64, 32, 8, 1];

/// Default `(N_scale, i_scale)`: raw inputs are divided by these.
pub const DEFAULT_INPUT_SCALE: (f64, f64) = (64.0, 32.0);

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Sigmoid hidden layers, identity output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub input_scale: (f64, f64),
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], input_scale: (f64, f64), seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes[0] != 2 || *sizes.last().unwrap() != 1 {
            return Err(Error::Config(format!("layer sizes {sizes:?} must start at 2 and end at 1")));
        }
        if !(input_scale.0 > 0.0 && input_scale.1 > 0.0) {
            return Err(Error::Config("input scales must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| rng.random_range(-lim..lim)).collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Mlp { layers, input_scale })
    }

    pub fn standard(seed: u64) -> Self {
        Self::new(&LAYER_SIZES, DEFAULT_INPUT_SCALE, seed).expect("fixed architecture is valid")
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameter vector, layer by layer: weights then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn set_params(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.num_params() {
            return Err(Error::Mismatch { expected: self.num_params(), got: v.len() });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&v[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&v[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn scale(&self, n: f64, i: f64) -> [f64; 2] {
        [n / self.input_scale.0, i / self.input_scale.1]
    }

    /// Activations of every layer for an already scaled input.
    fn activations(&self, x: [f64; 2]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let a = acts.last().unwrap();
            let z: Vec<f64> = (0..l.outputs)
                .map(|o| l.bias[o] + l.weights[o * l.inputs..(o + 1) * l.inputs].iter().zip(a).map(|(w, x)| w * x).sum::<f64>())
                .collect();
            acts.push(if k == last { z } else { z.into_iter().map(sigmoid).collect() });
        }
        acts
    }

    /// Prediction for system size `n` and 1-based layer index `i`.
    pub fn forward(&self, n: f64, i: f64) -> f64 {
        self.forward_scaled(self.scale(n, i))
    }

    pub fn forward_scaled(&self, x: [f64; 2]) -> f64 {
        self.activations(x).last().unwrap()[0]
    }
}

/// One `(N, i) → angle` example.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub n: usize,
    pub i: usize,
    pub target: f64,
}

/// Layer outputs for a whole batch, one column per sample.
fn batch_activations(mlp: &Mlp, batch: &[Sample]) -> Vec<DMatrix<f64>> {
    let x = DMatrix::from_fn(2, batch.len(), |r, c| {
        let [a, b] = mlp.scale(batch[c].n as f64, batch[c].i as f64);
        if r == 0 {
            a
        } else {
            b
        }
    });
    let last = mlp.layers.len() - 1;
    let mut acts = vec![x];
    for (k, l) in mlp.layers.iter().enumerate() {
        let w = DMatrix::from_row_slice(l.outputs, l.inputs, &l.weights);
        let mut z = w * acts.last().unwrap();
        for mut col in z.column_iter_mut() {
            for (o, v) in col.iter_mut().enumerate() {
                *v += l.bias[o];
                if k != last {
                    *v = sigmoid(*v);
                }
            }
        }
        acts.push(z);
    }
    acts
}

/// Mean absolute error and its gradient with respect to the flat parameters.
/// The subgradient at a zero residual is 0.
pub fn loss_and_gradient(mlp: &Mlp, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let inv_b = 1.0 / batch.len() as f64;
    let acts = batch_activations(mlp, batch);
    let last = mlp.layers.len() - 1;
    let out = &acts[last + 1];
    let mut loss = 0.0;
    let mut delta = DMatrix::from_fn(1, batch.len(), |_, c| {
        let r = out[(0, c)] - batch[c].target;
        loss += r.abs() * inv_b;
        if r > 0.0 {
            inv_b
        } else if r < 0.0 {
            -inv_b
        } else {
            0.0
        }
    });
    let mut grads: Vec<Vec<f64>> = vec![Vec::new(); mlp.layers.len()];
    for k in (0..=last).rev() {
        let l = &mlp.layers[k];
        let a_in = &acts[k];
        // dW is out×in; its transpose in column-major order is row-major dW
        let dw = (&delta * a_in.transpose()).transpose();
        let mut g = dw.as_slice().to_vec();
        g.extend(delta.row_iter().map(|r| r.sum()));
        grads[k] = g;
        if k > 0 {
            let w = DMatrix::from_row_slice(l.outputs, l.inputs, &l.weights);
            let mut back = w.transpose() * &delta;
            back.zip_apply(a_in, |b, a| *b *= a * (1.0 - a));
            delta = back;
        }
    }
    Ok((loss, grads.concat()))
}

/// Mean absolute error without gradients.
pub fn mae(mlp: &Mlp, batch: &[Sample]) -> f64 {
    if batch.is_empty() {
        return f64::NAN;
    }
    let acts = batch_activations(mlp, batch);
    let out = acts.last().unwrap();
    batch.iter().enumerate().map(|(c, s)| (out[(0, c)] - s.target).abs()).sum::<f64>() / batch.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
    pub input_scale: (f64, f64),
    /// Stop after this many epochs without a new best validation MAE.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 50_000,
            seed: 0,
            input_scale: DEFAULT_INPUT_SCALE,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.input_scale.0 > 0.0
            && self.input_scale.1 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

/// One bias-corrected Adam update of `params`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Mismatch { expected: params.len(), got: grads.len() });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for k in 0..params.len() {
        let g = grads[k];
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let mhat = state.m[k] / c1;
        let vhat = state.v[k] / c2;
        params[k] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
}

impl TrainingSet {
    /// One family (`α` or `β`) of a list of parameter sets.
    pub fn from_params(train: &[ParamSet], validation: &[ParamSet], family: Layer) -> Result<Self> {
        let collect = |sets: &[ParamSet]| -> Vec<Sample> {
            sets.iter()
                .flat_map(|ps| {
                    ps.family(family)
                        .iter()
                        .enumerate()
                        .map(|(k, &a)| Sample { n: ps.model.n, i: k + 1, target: a })
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        let ts = TrainingSet { train: collect(train), validation: collect(validation) };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        let mut keys: Vec<(usize, usize)> = self.train.iter().chain(&self.validation).map(|s| (s.n, s.i)).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate (N, i) sample".into()));
        }
        if self.train.iter().chain(&self.validation).any(|s| !s.target.is_finite()) {
            return Err(Error::Config("non-finite training target".into()));
        }
        Ok(())
    }

    /// Content hash over the samples.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("samples serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_mae: Vec<f64>,
    pub validation_mae: Vec<f64>,
    pub best_epoch: usize,
    pub best_score: f64,
    pub initial_score: f64,
}

/// Full-batch Adam; returns the snapshot with the lowest validation MAE
/// (training MAE when there is no validation split).
pub fn train(ts: &TrainingSet, cfg: &TrainConfig) -> Result<(Mlp, TrainHistory)> {
    cfg.validate()?;
    if ts.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    ts.validate()?;
    let mut mlp = Mlp::new(&LAYER_SIZES, cfg.input_scale, cfg.seed)?;
    let mut params = mlp.params();
    let mut adam = AdamState::new(params.len());
    let score_of = |m: &Mlp, train_loss: f64| if ts.validation.is_empty() { train_loss } else { mae(m, &ts.validation) };
    let init_loss = mae(&mlp, &ts.train);
    let mut history = TrainHistory { initial_score: score_of(&mlp, init_loss), ..Default::default() };
    let mut best = (history.initial_score, 0usize, params.clone());
    for epoch in 1..=cfg.epochs {
        let (loss, grads) = loss_and_gradient(&mlp, &ts.train)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("training diverged at epoch {epoch} (loss {loss})")));
        }
        adam_step(&mut params, &grads, &mut adam, cfg)?;
        mlp.set_params(&params)?;
        if !mlp.is_finite() {
            return Err(Error::Numerical(format!("non-finite weights at epoch {epoch}")));
        }
        let train_mae = mae(&mlp, &ts.train);
        let score = score_of(&mlp, train_mae);
        history.train_mae.push(train_mae);
        if !ts.validation.is_empty() {
            history.validation_mae.push(score);
        }
        if score < best.0 {
            best = (score, epoch, params.clone());
        }
        if cfg.patience.is_some_and(|p| epoch - best.1 >= p) {
            break;
        }
    }
    mlp.set_params(&best.2)?;
    history.best_epoch = best.1;
    history.best_score = best.0;
    Ok((mlp, history))
}

/// Angles `(α̂_i, β̂_i)` for `i = 1..p` of `model`.
pub fn predict_paramset(alpha: &Mlp, beta: &Mlp, spec: &AnsatzSpec) -> ParamSet {
    let n = spec.model.n as f64;
    let alphas = (1..=spec.depth).map(|i| alpha.forward(n, i as f64)).collect();
    let betas = (1..=spec.depth).map(|i| beta.forward(n, i as f64)).collect();
    ParamSet::new(spec.model, alphas, betas, ParamSource::Predicted)
}

/// Serialized network with enough context to refuse a mismatched use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub family: Layer,
    pub model: ModelSpec,
    pub ansatz_fingerprint: String,
    pub dataset_fingerprint: String,
    pub layer_sizes: Vec<usize>,
    pub mlp: Mlp,
    pub config: TrainConfig,
    pub history_summary: HistorySummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub best_epoch: usize,
    pub best_score: f64,
    pub initial_score: f64,
    pub final_train_mae: f64,
}

impl From<&TrainHistory> for HistorySummary {
    fn from(h: &TrainHistory) -> Self {
        HistorySummary {
            best_epoch: h.best_epoch,
            best_score: h.best_score,
            initial_score: h.initial_score,
            final_train_mae: h.train_mae.last().copied().unwrap_or(f64::NAN),
        }
    }
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.mlp.sizes() != c.layer_sizes {
            return Err(Error::Config("checkpoint layer sizes disagree with its weights".into()));
        }
        for l in &c.mlp.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Config("checkpoint weight shapes are inconsistent".into()));
            }
        }
        Ok(c)
    }
}
