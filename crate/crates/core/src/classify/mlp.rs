//! Small fully-connected classifier over diff features.
//!
//! Architecture: input → 32 ReLU units → 5-way softmax, trained with
//! cross-entropy and mini-batch SGD. Everything is f64 and seeded, so a
//! training run is reproducible bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::classify::{FeatureVector, LevelState, CLASS_COUNT, FEATURE_LEN};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Hidden layer width.
pub const HIDDEN_UNITS: usize = 32;

/// Magic bytes of the serialized model format.
const MAGIC: &[u8; 4] = b"LIQD";
/// Serialized format version.
const FORMAT_VERSION: u16 = 1;

/// One dense layer: `out = W x + b` with row-major weights.
#[derive(Debug, Clone, PartialEq)]
struct Dense {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// Feed-forward classifier with ReLU hidden layers and a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

impl MlpModel {
    /// Builds a model with Glorot-uniform weights and zero biases drawn from
    /// a [`SplitMix64`] stream seeded with `seed`.
    pub fn new_seeded(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        Self::validate_sizes(layer_sizes)?;
        Ok(Self::init_from_stream(layer_sizes, &mut SplitMix64::new(seed)))
    }

    /// Glorot init drawing weights in layer order from an existing stream.
    fn init_from_stream(layer_sizes: &[usize], rng: &mut SplitMix64) -> Self {
        let mut layers = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-r, r))
                .collect();
            layers.push(Dense {
                in_dim: fan_in,
                out_dim: fan_out,
                weights,
                bias: vec![0.0; fan_out],
            });
        }
        MlpModel { layers }
    }

    /// The standard classifier shape for this pipeline's feature vector.
    pub fn standard(seed: u64) -> Self {
        Self::new_seeded(&[FEATURE_LEN, HIDDEN_UNITS, CLASS_COUNT], seed)
            .expect("standard layer sizes are valid")
    }

    fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidParameter(
                "a model needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter(
                "layer sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].in_dim];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim
    }

    /// Raw output logits for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::FeatureLength {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&current, &mut next);
            if i + 1 < self.layers.len() {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Class probabilities for one input.
    pub fn probabilities(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(input)?))
    }

    /// Predicted state and its probability. Ties break toward the lowest
    /// class index.
    pub fn predict(&self, features: &FeatureVector) -> Result<(LevelState, f64)> {
        if self.output_dim() != CLASS_COUNT {
            return Err(Error::ModelFormat(format!(
                "model has {} outputs, expected {CLASS_COUNT}",
                self.output_dim()
            )));
        }
        let probs = self.probabilities(features.as_slice())?;
        let mut best = 0usize;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        let state = LevelState::from_index(best).expect("output dim equals class count");
        Ok((state, probs[best]))
    }

    /// All parameters in canonical order: per layer, weights row-major then
    /// biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Overwrites all parameters from canonical order.
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let expected: usize = self
            .layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum();
        if params.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "parameter vector has {} entries, model needs {expected}",
                params.len()
            )));
        }
        let mut cursor = 0;
        for layer in &mut self.layers {
            let w = layer.weights.len();
            layer.weights.copy_from_slice(&params[cursor..cursor + w]);
            cursor += w;
            let b = layer.bias.len();
            layer.bias.copy_from_slice(&params[cursor..cursor + b]);
            cursor += b;
        }
        Ok(())
    }

    /// Cross-entropy loss of one example.
    pub fn example_loss(&self, input: &[f64], label: LevelState) -> Result<f64> {
        let probs = self.probabilities(input)?;
        Ok(-probs[label.index()].max(f64::MIN_POSITIVE).ln())
    }

    /// Cross-entropy loss and its gradient (in [`flat_params`] order) for one
    /// example.
    pub fn loss_gradient(&self, input: &[f64], label: LevelState) -> Result<(f64, Vec<f64>)> {
        let mut grads = GradientBuffer::for_model(self);
        let loss = backprop(self, input, label, &mut grads)?;
        Ok((loss, grads.flat(self)))
    }

    /// Serializes to the binary model format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.layer_sizes();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sizes.len() as u16).to_le_bytes());
        for s in &sizes {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        for layer in &self.layers {
            for w in layer.weights.iter().chain(&layer.bias) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    /// Deserializes and validates the binary model format.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut cursor, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let version = read_u16(&mut cursor)?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {version}"
            )));
        }
        let n_sizes = read_u16(&mut cursor)? as usize;
        if n_sizes < 2 {
            return Err(Error::ModelFormat(format!(
                "layer size list has {n_sizes} entries, need at least 2"
            )));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(read_u32(&mut cursor)? as usize);
        }
        Self::validate_sizes(&sizes).map_err(|e| Error::ModelFormat(e.to_string()))?;

        let mut layers = Vec::new();
        for pair in sizes.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let mut weights = Vec::with_capacity(in_dim * out_dim);
            for _ in 0..in_dim * out_dim {
                weights.push(read_f64(&mut cursor)?);
            }
            let mut bias = Vec::with_capacity(out_dim);
            for _ in 0..out_dim {
                bias.push(read_f64(&mut cursor)?);
            }
            layers.push(Dense {
                in_dim,
                out_dim,
                weights,
                bias,
            });
        }
        if !cursor.is_empty() {
            return Err(Error::ModelFormat(format!(
                "{} trailing bytes after parameters",
                cursor.len()
            )));
        }
        let model = MlpModel { layers };
        if model.flat_params().iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat(
                "parameters contain non-finite values".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::file(path, e))?;
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        file.write_all(&self.to_bytes())
            .map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn read_exact(cursor: &mut &[u8], buf: &mut [u8], what: &str) -> Result<()> {
    if cursor.len() < buf.len() {
        return Err(Error::ModelFormat(format!("truncated while reading {what}")));
    }
    buf.copy_from_slice(&cursor[..buf.len()]);
    *cursor = &cursor[buf.len()..];
    Ok(())
}

fn read_u16(cursor: &mut &[u8]) -> Result<u16> {
    let mut buf = [0u8; 2];
    read_exact(cursor, &mut buf, "u16")?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32(cursor: &mut &[u8]) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(cursor, &mut buf, "u32")?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(cursor: &mut &[u8]) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(cursor, &mut buf, "f64")?;
    Ok(f64::from_le_bytes(buf))
}

/// Per-layer gradient accumulators, mirroring the model's parameter shapes.
struct GradientBuffer {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

impl GradientBuffer {
    fn for_model(model: &MlpModel) -> Self {
        GradientBuffer {
            weights: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn zero(&mut self) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.fill(0.0);
        }
    }

    fn flat(&self, model: &MlpModel) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..model.layers.len() {
            out.extend_from_slice(&self.weights[i]);
            out.extend_from_slice(&self.bias[i]);
        }
        out
    }
}

/// Forward + backward pass for one example; gradients are accumulated into
/// `grads` (not zeroed first) and the example loss is returned.
fn backprop(
    model: &MlpModel,
    input: &[f64],
    label: LevelState,
    grads: &mut GradientBuffer,
) -> Result<f64> {
    if input.len() != model.input_dim() {
        return Err(Error::FeatureLength {
            expected: model.input_dim(),
            got: input.len(),
        });
    }

    // Forward pass, recording each layer's pre-activation and activation.
    let mut activations: Vec<Vec<f64>> = vec![input.to_vec()];
    let mut pre_activations: Vec<Vec<f64>> = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        let mut pre = Vec::new();
        layer.forward(activations.last().expect("seeded with input"), &mut pre);
        let act = if i + 1 < model.layers.len() {
            pre.iter().map(|&v| v.max(0.0)).collect()
        } else {
            pre.clone()
        };
        pre_activations.push(pre);
        activations.push(act);
    }

    let probs = softmax(activations.last().expect("at least one layer"));
    let loss = -probs[label.index()].max(f64::MIN_POSITIVE).ln();

    // Softmax + cross-entropy head: delta = p - onehot(label).
    let mut delta: Vec<f64> = probs;
    delta[label.index()] -= 1.0;

    for i in (0..model.layers.len()).rev() {
        let layer = &model.layers[i];
        let input_act = &activations[i];
        for o in 0..layer.out_dim {
            let d = delta[o];
            grads.bias[i][o] += d;
            let row = &mut grads.weights[i][o * layer.in_dim..(o + 1) * layer.in_dim];
            for (g, x) in row.iter_mut().zip(input_act) {
                *g += d * x;
            }
        }
        if i > 0 {
            let mut prev_delta = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = delta[o];
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (pd, w) in prev_delta.iter_mut().zip(row) {
                    *pd += d * w;
                }
            }
            // ReLU derivative on the previous layer's pre-activation.
            for (pd, &pre) in prev_delta.iter_mut().zip(&pre_activations[i - 1]) {
                if pre <= 0.0 {
                    *pd = 0.0;
                }
            }
            delta = prev_delta;
        }
    }
    Ok(loss)
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub learn_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learn_rate: 0.05,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Trained model plus the loss trace: entry 0 is the loss at initialization,
/// then one entry per epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub loss_trace: Vec<f64>,
}

/// Trains the standard classifier with mini-batch SGD.
///
/// Requires a non-empty dataset covering all five states. One seeded RNG
/// stream drives initialization and the per-epoch shuffles, so equal inputs
/// produce bit-identical models.
pub fn train(dataset: &[(FeatureVector, LevelState)], options: &TrainOptions) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Empty {
            what: "training dataset",
        });
    }
    if options.learn_rate <= 0.0 || !options.learn_rate.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "learn_rate must be positive, got {}",
            options.learn_rate
        )));
    }
    if options.batch_size == 0 {
        return Err(Error::InvalidParameter("batch_size must be positive".into()));
    }
    let mut present = [false; CLASS_COUNT];
    for (_, label) in dataset {
        present[label.index()] = true;
    }
    let missing: Vec<LevelState> = LevelState::ALL
        .into_iter()
        .filter(|s| !present[s.index()])
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses { missing });
    }

    // One stream drives init and every epoch's shuffle.
    let mut rng = SplitMix64::new(options.seed);
    let mut model =
        MlpModel::init_from_stream(&[FEATURE_LEN, HIDDEN_UNITS, CLASS_COUNT], &mut rng);

    let mean_loss = |model: &MlpModel| -> Result<f64> {
        let mut total = 0.0;
        for (features, label) in dataset {
            total += model.example_loss(features.as_slice(), *label)?;
        }
        Ok(total / dataset.len() as f64)
    };

    let mut loss_trace = vec![mean_loss(&model)?];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grads = GradientBuffer::for_model(&model);

    for _ in 0..options.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(options.batch_size) {
            grads.zero();
            for &idx in batch {
                let (features, label) = &dataset[idx];
                backprop(&model, features.as_slice(), *label, &mut grads)?;
            }
            let scale = options.learn_rate / batch.len() as f64;
            for (i, layer) in model.layers.iter_mut().enumerate() {
                for (w, g) in layer.weights.iter_mut().zip(&grads.weights[i]) {
                    *w -= scale * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(&grads.bias[i]) {
                    *b -= scale * g;
                }
            }
        }
        loss_trace.push(mean_loss(&model)?);
    }

    Ok(TrainOutcome { model, loss_trace })
}
