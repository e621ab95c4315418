use serde::{Deserialize, Serialize};

use super::rng::DetRng;
use super::DlError;
use crate::chain::codec::{Decoder, Encoder};
use crate::chain::{hash_bytes, Digest};

/// Hidden/output activations. Only one combination exists today; the field
/// keeps recorded parameters self-describing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    ReluSoftmax,
}

/// Hyperparameters for a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    /// `(input_dim, hidden..., num_classes)`.
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: u32,
    pub init_seed: u64,
    #[serde(default)]
    pub activation: Activation,
}

impl TrainingParams {
    pub fn new(layer_sizes: Vec<usize>, learning_rate: f64, epochs: u32, init_seed: u64) -> Self {
        TrainingParams { layer_sizes, learning_rate, epochs, init_seed, activation: Activation::ReluSoftmax }
    }

    pub fn validate(&self) -> Result<(), DlError> {
        check_layer_sizes(&self.layer_sizes)?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(DlError::BadArchitecture(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

pub(crate) fn check_layer_sizes(sizes: &[usize]) -> Result<(), DlError> {
    if sizes.len() < 2 {
        return Err(DlError::BadArchitecture("need at least an input and an output layer".into()));
    }
    if sizes.contains(&0) {
        return Err(DlError::BadArchitecture(format!("zero-width layer in {sizes:?}")));
    }
    if sizes.iter().any(|&s| s > u32::MAX as usize) {
        return Err(DlError::BadArchitecture("layer wider than u32::MAX".into()));
    }
    if *sizes.last().unwrap() < 2 {
        return Err(DlError::BadArchitecture("need at least two output classes".into()));
    }
    Ok(())
}

/// Feed-forward network parameters. Layer `l` maps `layer_sizes[l]` inputs to
/// `layer_sizes[l + 1]` outputs; `weights[l]` is that matrix row-major
/// (`out × in`), `biases[l]` has length `out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Model {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Model, DlError> {
        check_layer_sizes(layer_sizes)?;
        let weights = layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_sizes.windows(2).map(|w| vec![0.0; w[1]]).collect();
        Ok(Model { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Shapes agree with `layer_sizes` and every value is finite.
    pub fn validate(&self) -> Result<(), DlError> {
        check_layer_sizes(&self.layer_sizes).map_err(|e| DlError::BadModel(e.to_string()))?;
        let n = self.num_layers();
        if self.weights.len() != n || self.biases.len() != n {
            return Err(DlError::BadModel(format!("{n} layers but {} weight / {} bias blocks", self.weights.len(), self.biases.len())));
        }
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] || self.biases[l].len() != w[1] {
                return Err(DlError::BadModel(format!("layer {l} shape mismatch")));
            }
        }
        let finite = self.weights.iter().chain(&self.biases).flatten().all(|x| x.is_finite());
        if !finite {
            return Err(DlError::BadModel("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Canonical bytes:
    ///
    /// ```text
    /// u32 LE  number of entries in layer_sizes (L)
    /// L × u32 LE  layer sizes
    /// for each layer l in 0..L-1:
    ///     out×in f64 LE  weights, row-major
    ///     out    f64 LE  biases
    /// ```
    pub fn serialize(&self) -> Result<Vec<u8>, DlError> {
        self.validate()?;
        let mut enc = Encoder::with_capacity(4 + 4 * self.layer_sizes.len() + 8 * self.param_count());
        enc.u32(self.layer_sizes.len() as u32);
        for &s in &self.layer_sizes {
            enc.u32(s as u32);
        }
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for &x in w.iter().chain(b) {
                enc.f64(x);
            }
        }
        Ok(enc.finish())
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Model, DlError> {
        let bad = |m: &str| DlError::BadModel(m.to_string());
        let mut dec = Decoder::new(bytes);
        let count = dec.u32().ok_or_else(|| bad("truncated layer count"))? as usize;
        // Each size needs four bytes, so this bounds the allocation.
        if count > bytes.len() / 4 {
            return Err(bad("layer count exceeds input"));
        }
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            sizes.push(dec.u32().ok_or_else(|| bad("truncated layer sizes"))? as usize);
        }
        check_layer_sizes(&sizes).map_err(|e| DlError::BadModel(e.to_string()))?;
        let params: usize = sizes
            .windows(2)
            .try_fold(0usize, |acc, w| acc.checked_add(w[0].checked_mul(w[1])?.checked_add(w[1])?))
            .ok_or_else(|| bad("parameter count overflows"))?;
        if params.checked_mul(8) != Some(bytes.len() - 4 - 4 * count) {
            return Err(bad("byte length does not match layer sizes"));
        }
        let mut model = Model::zeros(&sizes)?;
        for l in 0..model.num_layers() {
            for x in model.weights[l].iter_mut().chain(model.biases[l].iter_mut()) {
                *x = dec.f64().ok_or_else(|| bad("truncated parameters"))?;
            }
        }
        debug_assert!(dec.is_empty());
        model.validate()?;
        Ok(model)
    }

    /// `hash_bytes(serialize(self))`.
    pub fn hash(&self) -> Result<Digest, DlError> {
        Ok(hash_bytes(&self.serialize()?))
    }

    /// Pre-activations and activations for every layer. `acts[0]` is the
    /// input; `acts[l + 1]` is ReLU of `pre[l]` for hidden layers and the raw
    /// logits for the last layer.
    pub(crate) fn forward_into(&self, x: &[f64], pre: &mut [Vec<f64>], acts: &mut [Vec<f64>]) {
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let b = &self.biases[l];
            let (head, tail) = acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            out.clear();
            pre[l].clear();
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut s = 0.0;
                for i in 0..n_in {
                    s += row[i] * input[i];
                }
                let z = s + b[j];
                pre[l].push(z);
                out.push(if l < last { relu(z) } else { z });
            }
        }
    }

    pub(crate) fn buffers(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let pre = self.layer_sizes[1..].iter().map(|&n| Vec::with_capacity(n)).collect();
        let acts = self.layer_sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
        (pre, acts)
    }
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Softmax with the maximum logit subtracted first; the normaliser is summed
/// in class order.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let mut sum = 0.0;
    for &e in &exps {
        sum += e;
    }
    exps.into_iter().map(|e| e / sum).collect()
}

/// Class probabilities for one input.
pub fn feed_forward(model: &Model, features: &[f64]) -> Result<Vec<f64>, DlError> {
    if features.len() != model.input_dim() {
        return Err(DlError::BadInput { expected: model.input_dim(), found: features.len() });
    }
    let (mut pre, mut acts) = model.buffers();
    model.forward_into(features, &mut pre, &mut acts);
    Ok(softmax(acts.last().unwrap()))
}

/// Glorot-uniform weights, zero biases. Layer `l` draws its matrix row-major
/// from `DetRng::new("podl/init", init_seed, l)`, uniform on `[-a, a)` with
/// `a = sqrt(6 / (fan_in + fan_out))`.
pub fn init_weights(params: &TrainingParams) -> Result<Model, DlError> {
    check_layer_sizes(&params.layer_sizes)?;
    let mut model = Model::zeros(&params.layer_sizes)?;
    for (l, w) in model.weights.iter_mut().enumerate() {
        let (fan_in, fan_out) = (params.layer_sizes[l], params.layer_sizes[l + 1]);
        let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let mut rng = DetRng::new("podl/init", params.init_seed, l as u64);
        for x in w.iter_mut() {
            *x = rng.uniform(-a, a);
        }
    }
    Ok(model)
}
