//! Small feed-forward classifier with a designated latent layer.
//!
//! The network factors as `input -> latent -> head -> logits`; every
//! prediction path runs through that same factorization, so
//! `predict(x) == head_predict(latent(x))` holds bitwise. The head exposes an
//! analytic gradient of the softmax cross-entropy with respect to its latent
//! input, which is what the sign-gradient attack consumes.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::seed_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Relu => {
                if x > F::zero() {
                    x
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => F::cast(x.as_f64().tanh()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    fn derivative<F: Scalar>(self, pre: F) -> F {
        match self {
            Activation::Relu => {
                if pre > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => {
                let t = pre.as_f64().tanh();
                F::cast(1.0 - t * t)
            }
            Activation::Identity => F::one(),
        }
    }
}

/// One dense layer: `output = activation(input * weights + bias)`,
/// with `weights` stored input-major (`in_dim x out_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<F: Scalar> {
    pub weights: Array2<F>,
    pub bias: Array1<F>,
    pub activation: Activation,
}

impl<F: Scalar> Layer<F> {
    fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn out_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn forward_batch(&self, input: &Array2<F>) -> Array2<F> {
        let mut pre = input.dot(&self.weights);
        pre += &self.bias;
        pre.mapv_inplace(|v| self.activation.apply(v));
        pre
    }

    fn forward_vec(&self, input: &Array1<F>) -> Array1<F> {
        let mut pre = input.dot(&self.weights);
        pre += &self.bias;
        pre.mapv_inplace(|v| self.activation.apply(v));
        pre
    }
}

/// Optimizer choice for [`train`]. Plain SGD is the deterministic default;
/// the Adam variant follows the usual first/second-moment updates with
/// bias correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct TrainConfig<F: Scalar> {
    pub learning_rate: F,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        Self {
            learning_rate: F::cast(1e-3),
            epochs: 200,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > F::zero()) {
            return Err(Error::InvalidParameter(
                "learning rate must be positive".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Trained parameters plus the index of the latent layer; the latent space is
/// the output of `layers[latent_index]` and the head is everything after it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams<F: Scalar> {
    layers: Vec<Layer<F>>,
    latent_index: usize,
    num_classes: usize,
}

impl<F: Scalar> ClassifierParams<F> {
    pub fn new(layers: Vec<Layer<F>>, latent_index: usize, num_classes: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("need at least one layer".into()));
        }
        if latent_index >= layers.len() {
            return Err(Error::InvalidParameter(format!(
                "latent index {latent_index} out of range for {} layers",
                layers.len()
            )));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::InvalidParameter(format!(
                    "layer dimensions do not chain: {} -> {}",
                    w[0].out_dim(),
                    w[1].in_dim()
                )));
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidParameter(
                    "bias length must equal layer output dimension".into(),
                ));
            }
        }
        let last = layers.last().expect("nonempty");
        if last.out_dim() != num_classes {
            return Err(Error::InvalidParameter(format!(
                "final layer outputs {}, expected num_classes = {num_classes}",
                last.out_dim()
            )));
        }
        Ok(Self {
            layers,
            latent_index,
            num_classes,
        })
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn latent_index(&self) -> usize {
        self.latent_index
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Dimension of the latent space (output of the latent layer).
    pub fn latent_dim(&self) -> usize {
        self.layers[self.latent_index].out_dim()
    }

    fn head_layers(&self) -> &[Layer<F>] {
        &self.layers[self.latent_index + 1..]
    }

    fn check_input_dim(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim() {
            return Err(Error::InvalidParameter(format!(
                "input dimension {dim} does not match first layer ({})",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn check_latent_dim(&self, dim: usize) -> Result<()> {
        if dim != self.latent_dim() {
            return Err(Error::InvalidParameter(format!(
                "latent dimension {dim} does not match latent layer ({})",
                self.latent_dim()
            )));
        }
        Ok(())
    }

    /// Activations at the latent layer for a batch of rows.
    pub fn latent(&self, features: &Array2<F>) -> Result<Array2<F>> {
        self.check_input_dim(features.ncols())?;
        let mut a = features.clone();
        for layer in &self.layers[..=self.latent_index] {
            a = layer.forward_batch(&a);
        }
        Ok(a)
    }

    /// Head logits from latent activations.
    pub fn head_logits(&self, latent: &Array2<F>) -> Result<Array2<F>> {
        self.check_latent_dim(latent.ncols())?;
        let mut a = latent.clone();
        for layer in self.head_layers() {
            a = layer.forward_batch(&a);
        }
        Ok(a)
    }

    /// Full-network logits; runs latent then head, the same computation the
    /// two-stage path performs.
    pub fn logits(&self, features: &Array2<F>) -> Result<Array2<F>> {
        let latent = self.latent(features)?;
        self.head_logits(&latent)
    }

    /// Predicted class per row: argmax of the softmax (equivalently of the
    /// logits), ties broken toward the lower class index.
    pub fn predict(&self, features: &Array2<F>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(features)?))
    }

    /// Predicted class per latent row through the head alone.
    pub fn head_predict(&self, latent: &Array2<F>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.head_logits(latent)?))
    }

    /// Softmax cross-entropy of the head at a single latent point.
    pub fn head_loss(&self, latent_point: ArrayView1<'_, F>, target_label: usize) -> Result<F> {
        self.check_latent_dim(latent_point.len())?;
        self.check_label(target_label)?;
        let mut a = latent_point.to_owned();
        for layer in self.head_layers() {
            a = layer.forward_vec(&a);
        }
        Ok(cross_entropy(&a, target_label))
    }

    /// Exact gradient of the head's softmax cross-entropy with respect to the
    /// latent input.
    pub fn head_loss_gradient(
        &self,
        latent_point: ArrayView1<'_, F>,
        target_label: usize,
    ) -> Result<Array1<F>> {
        self.check_latent_dim(latent_point.len())?;
        self.check_label(target_label)?;

        let head = self.head_layers();
        // Forward pass keeping pre-activations for the backward sweep.
        let mut activations: Vec<Array1<F>> = vec![latent_point.to_owned()];
        let mut pre_activations: Vec<Array1<F>> = Vec::with_capacity(head.len());
        for layer in head {
            let mut pre = activations.last().expect("nonempty").dot(&layer.weights);
            pre += &layer.bias;
            pre_activations.push(pre.clone());
            pre.mapv_inplace(|v| layer.activation.apply(v));
            activations.push(pre);
        }

        // With an empty head the latent point is the logit vector itself and
        // the loop below is a no-op.
        let logits = activations.last().expect("nonempty");
        let mut delta = softmax(logits);
        delta[target_label] -= F::one();
        for i in (0..head.len()).rev() {
            let layer = &head[i];
            if layer.activation != Activation::Identity {
                for (d, &pre) in delta.iter_mut().zip(pre_activations[i].iter()) {
                    *d *= layer.activation.derivative(pre);
                }
            }
            delta = layer.weights.dot(&delta);
        }
        Ok(delta)
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.num_classes {
            return Err(Error::InvalidParameter(format!(
                "label {label} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }
}

fn argmax_rows<F: Scalar>(logits: &Array2<F>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_val = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best_val {
                    best = j;
                    best_val = v;
                }
            }
            best
        })
        .collect()
}

/// Numerically stable softmax of a logit vector.
pub fn softmax<F: Scalar>(logits: &Array1<F>) -> Array1<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let mut out = logits.mapv(|v| (v - max).exp());
    let total: F = out.iter().copied().sum();
    out.mapv_inplace(|v| v / total);
    out
}

fn cross_entropy<F: Scalar>(logits: &Array1<F>, target: usize) -> F {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse: F = logits.iter().map(|&v| (v - max).exp()).sum();
    max + lse.ln() - logits[target]
}

/// Mean softmax cross-entropy of the full network over a labeled batch.
fn full_batch_loss<F: Scalar>(
    params: &ClassifierParams<F>,
    features: &Array2<F>,
    labels: &[usize],
) -> Result<F> {
    let logits = params.logits(features)?;
    let mut total = F::zero();
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        total += cross_entropy(&row.to_owned(), y);
    }
    Ok(total / F::cast(labels.len() as f64))
}

/// Seeded Glorot-uniform initialization for the given layer output sizes.
/// `arch` lists every layer's output dimension and must end in the class
/// count; hidden layers get ReLU, the final layer is linear, and the latent
/// layer is the one before the output (the layer itself when there is only
/// one).
pub fn init_params<F: Scalar>(
    input_dim: usize,
    arch: &[usize],
    num_classes: usize,
    seed: u64,
) -> Result<ClassifierParams<F>> {
    init_params_with(input_dim, arch, num_classes, Activation::Relu, seed)
}

/// [`init_params`] with an explicit hidden-layer activation.
pub fn init_params_with<F: Scalar>(
    input_dim: usize,
    arch: &[usize],
    num_classes: usize,
    hidden_activation: Activation,
    seed: u64,
) -> Result<ClassifierParams<F>> {
    if arch.is_empty() {
        return Err(Error::InvalidParameter("architecture is empty".into()));
    }
    if *arch.last().expect("nonempty") != num_classes {
        return Err(Error::InvalidParameter(format!(
            "architecture must end in num_classes = {num_classes}, got {:?}",
            arch
        )));
    }
    let mut rng = seed_rng(seed);
    let mut layers = Vec::with_capacity(arch.len());
    let mut in_dim = input_dim;
    for (i, &out_dim) in arch.iter().enumerate() {
        if out_dim == 0 {
            return Err(Error::InvalidParameter("layer size must be >= 1".into()));
        }
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut weights = Array2::zeros((in_dim, out_dim));
        for v in weights.iter_mut() {
            let u: f64 = rng.random_range(-limit..limit);
            *v = F::cast(u);
        }
        let activation = if i + 1 == arch.len() {
            Activation::Identity
        } else {
            hidden_activation
        };
        layers.push(Layer {
            weights,
            bias: Array1::zeros(out_dim),
            activation,
        });
        in_dim = out_dim;
    }
    let latent_index = arch.len().saturating_sub(2);
    ClassifierParams::new(layers, latent_index, num_classes)
}

struct AdamState<F: Scalar> {
    m_w: Vec<Array2<F>>,
    v_w: Vec<Array2<F>>,
    m_b: Vec<Array1<F>>,
    v_b: Vec<Array1<F>>,
    step: usize,
}

/// Train a classifier on a fully labeled dataset with minibatch gradient
/// descent on the softmax cross-entropy. Deterministic given the seed; a
/// non-finite full-batch loss aborts with a divergence error naming the
/// epoch.
pub fn train<F: Scalar>(
    data: &LabeledDataset<F>,
    arch: &[usize],
    cfg: &TrainConfig<F>,
) -> Result<ClassifierParams<F>> {
    train_with_activation(data, arch, Activation::Relu, cfg)
}

/// [`train`] with an explicit hidden-layer activation.
pub fn train_with_activation<F: Scalar>(
    data: &LabeledDataset<F>,
    arch: &[usize],
    hidden_activation: Activation,
    cfg: &TrainConfig<F>,
) -> Result<ClassifierParams<F>> {
    cfg.validate()?;
    let labels = data.required_labels()?;
    let mut params = init_params_with(
        data.dim(),
        arch,
        data.num_classes(),
        hidden_activation,
        cfg.seed,
    )?;
    if cfg.epochs == 0 {
        return Ok(params);
    }

    let n = data.n();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed_rng(cfg.seed.wrapping_add(1));
    let mut adam = AdamState {
        m_w: params
            .layers
            .iter()
            .map(|l| Array2::zeros(l.weights.dim()))
            .collect(),
        v_w: params
            .layers
            .iter()
            .map(|l| Array2::zeros(l.weights.dim()))
            .collect(),
        m_b: params
            .layers
            .iter()
            .map(|l| Array1::zeros(l.bias.len()))
            .collect(),
        v_b: params
            .layers
            .iter()
            .map(|l| Array1::zeros(l.bias.len()))
            .collect(),
        step: 0,
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch_x = select_rows(data.features(), chunk);
            let batch_y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let grads = backprop(&params, &batch_x, &batch_y);
            apply_update(&mut params, &grads, cfg, &mut adam);
        }
        let loss = full_batch_loss(&params, data.features(), &labels)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }
    Ok(params)
}

fn select_rows<F: Scalar>(features: &Array2<F>, rows: &[usize]) -> Array2<F> {
    let mut out = Array2::zeros((rows.len(), features.ncols()));
    for (k, &i) in rows.iter().enumerate() {
        out.row_mut(k).assign(&features.row(i));
    }
    out
}

struct Gradients<F: Scalar> {
    weights: Vec<Array2<F>>,
    biases: Vec<Array1<F>>,
}

fn backprop<F: Scalar>(
    params: &ClassifierParams<F>,
    batch_x: &Array2<F>,
    batch_y: &[usize],
) -> Gradients<F> {
    let layers = &params.layers;
    let batch = batch_x.nrows();
    let scale = F::one() / F::cast(batch as f64);

    let mut activations: Vec<Array2<F>> = vec![batch_x.clone()];
    let mut pre_activations: Vec<Array2<F>> = Vec::with_capacity(layers.len());
    for layer in layers {
        let mut pre = activations.last().expect("nonempty").dot(&layer.weights);
        pre += &layer.bias;
        pre_activations.push(pre.clone());
        pre.mapv_inplace(|v| layer.activation.apply(v));
        activations.push(pre);
    }

    // delta = d(mean loss)/d(pre-activation of the current layer)
    let logits = activations.last().expect("nonempty");
    let mut delta = Array2::zeros(logits.dim());
    for (i, (row, &y)) in logits.rows().into_iter().zip(batch_y).enumerate() {
        let probs = softmax(&row.to_owned());
        for (j, &p) in probs.iter().enumerate() {
            let target = if j == y { F::one() } else { F::zero() };
            delta[(i, j)] = (p - target) * scale;
        }
    }

    let mut grad_w = vec![Array2::zeros((0, 0)); layers.len()];
    let mut grad_b = vec![Array1::zeros(0); layers.len()];
    for l in (0..layers.len()).rev() {
        grad_w[l] = activations[l].t().dot(&delta);
        grad_b[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&layers[l].weights.t());
            let prev = &layers[l - 1];
            if prev.activation != Activation::Identity {
                for (u, &pre) in upstream.iter_mut().zip(pre_activations[l - 1].iter()) {
                    *u *= prev.activation.derivative(pre);
                }
            }
            delta = upstream;
        }
    }
    Gradients {
        weights: grad_w,
        biases: grad_b,
    }
}

fn apply_update<F: Scalar>(
    params: &mut ClassifierParams<F>,
    grads: &Gradients<F>,
    cfg: &TrainConfig<F>,
    adam: &mut AdamState<F>,
) {
    let lr = cfg.learning_rate;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (layer, (gw, gb)) in params
                .layers
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.biases))
            {
                layer.weights.zip_mut_with(gw, |w, &g| *w -= lr * g);
                layer.bias.zip_mut_with(gb, |b, &g| *b -= lr * g);
            }
        }
        Optimizer::Adam => {
            let beta1 = F::cast(0.9);
            let beta2 = F::cast(0.999);
            let eps = F::cast(1e-8);
            adam.step += 1;
            let t = adam.step as i32;
            let corr1 = F::one() - beta1.powi(t);
            let corr2 = F::one() - beta2.powi(t);
            for (l, layer) in params.layers.iter_mut().enumerate() {
                let gw = &grads.weights[l];
                adam.m_w[l].zip_mut_with(gw, |m, &g| *m = beta1 * *m + (F::one() - beta1) * g);
                adam.v_w[l]
                    .zip_mut_with(gw, |v, &g| *v = beta2 * *v + (F::one() - beta2) * g * g);
                for ((w, &m), &v) in layer
                    .weights
                    .iter_mut()
                    .zip(adam.m_w[l].iter())
                    .zip(adam.v_w[l].iter())
                {
                    *w -= lr * (m / corr1) / ((v / corr2).sqrt() + eps);
                }
                let gb = &grads.biases[l];
                adam.m_b[l].zip_mut_with(gb, |m, &g| *m = beta1 * *m + (F::one() - beta1) * g);
                adam.v_b[l]
                    .zip_mut_with(gb, |v, &g| *v = beta2 * *v + (F::one() - beta2) * g * g);
                for ((b, &m), &v) in layer
                    .bias
                    .iter_mut()
                    .zip(adam.m_b[l].iter())
                    .zip(adam.v_b[l].iter())
                {
                    *b -= lr * (m / corr1) / ((v / corr2).sqrt() + eps);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization: versioned JSON with row-major weight arrays.

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    input_dim: usize,
    output_dim: usize,
    activation: Activation,
    /// Row-major over (input_dim, output_dim).
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: u32,
    num_classes: usize,
    latent_index: usize,
    layers: Vec<LayerDoc>,
}

const MODEL_FORMAT: u32 = 1;

pub fn to_json<F: Scalar>(params: &ClassifierParams<F>) -> String {
    let doc = ModelDoc {
        format: MODEL_FORMAT,
        num_classes: params.num_classes,
        latent_index: params.latent_index,
        layers: params
            .layers
            .iter()
            .map(|l| LayerDoc {
                input_dim: l.in_dim(),
                output_dim: l.out_dim(),
                activation: l.activation,
                weights: l.weights.iter().map(|v| v.as_f64()).collect(),
                bias: l.bias.iter().map(|v| v.as_f64()).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}

pub fn from_json<F: Scalar>(text: &str) -> Result<ClassifierParams<F>> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(Error::Model(format!(
            "unsupported model format {}, expected {MODEL_FORMAT}",
            doc.format
        )));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, l) in doc.layers.iter().enumerate() {
        if l.weights.len() != l.input_dim * l.output_dim || l.bias.len() != l.output_dim {
            return Err(Error::Model(format!("layer {i} has inconsistent shapes")));
        }
        let weights = Array2::from_shape_vec(
            (l.input_dim, l.output_dim),
            l.weights.iter().map(|&v| F::cast(v)).collect(),
        )
        .expect("shape checked above");
        layers.push(Layer {
            weights,
            bias: Array1::from_vec(l.bias.iter().map(|&v| F::cast(v)).collect()),
            activation: l.activation,
        });
    }
    ClassifierParams::new(layers, doc.latent_index, doc.num_classes)
}

pub fn save_json<F: Scalar>(params: &ClassifierParams<F>, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(params))?;
    Ok(())
}

pub fn load_json<F: Scalar>(path: &Path) -> Result<ClassifierParams<F>> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{accuracy, generate_gaussian_mixture, labeled_split_indices};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    // An identity passthrough feeding the given head layer, so the latent
    // space is exactly the head's input.
    fn head_only_params(weights: Array2<f64>, activation: Activation) -> ClassifierParams<f64> {
        let d = weights.nrows();
        let c = weights.ncols();
        ClassifierParams::new(
            vec![
                Layer {
                    weights: Array2::eye(d),
                    bias: Array1::zeros(d),
                    activation: Activation::Identity,
                },
                Layer {
                    weights,
                    bias: Array1::zeros(c),
                    activation,
                },
            ],
            0,
            c,
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_returns_seeded_initialization() {
        let data = generate_gaussian_mixture::<f64>(2, 10, 2, 3.0, 0.3, 4).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let trained = train(&data, &[8, 2], &cfg).unwrap();
        let init = init_params::<f64>(2, &[8, 2], 2, cfg.seed).unwrap();
        assert_eq!(trained, init);
    }

    #[test]
    fn training_is_deterministic() {
        let data = generate_gaussian_mixture::<f64>(3, 20, 2, 5.0, 0.5, 8).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let a = train(&data, &[16, 8, 3], &cfg).unwrap();
        let b = train(&data, &[16, 8, 3], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unlabeled_rows_are_a_precondition_error() {
        let data = generate_gaussian_mixture::<f64>(2, 10, 2, 3.0, 0.3, 4).unwrap();
        let hidden = data.without_labels();
        let err = train(&hidden, &[4, 2], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    // Oracle: the classic perceptron update converges on linearly separable
    // data; once it certifies separability, a single linear layer must reach
    // perfect training accuracy.
    #[test]
    fn single_linear_layer_fits_linearly_separable_data() {
        let data = generate_gaussian_mixture::<f64>(2, 25, 2, 4.0, 0.3, 15).unwrap();
        let labels = data.required_labels().unwrap();

        let mut w = [0.0f64; 3];
        let mut converged = false;
        for _ in 0..200 {
            let mut mistakes = 0;
            for (i, &y) in labels.iter().enumerate() {
                let x = [data.features()[(i, 0)], data.features()[(i, 1)], 1.0];
                let sign = if y == 0 { -1.0 } else { 1.0 };
                let score: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
                if sign * score <= 0.0 {
                    for (wi, xi) in w.iter_mut().zip(&x) {
                        *wi += sign * xi;
                    }
                    mistakes += 1;
                }
            }
            if mistakes == 0 {
                converged = true;
                break;
            }
        }
        assert!(converged, "perceptron oracle says data is separable");

        let cfg = TrainConfig {
            learning_rate: 0.5,
            epochs: 300,
            batch_size: 50,
            seed: 3,
            optimizer: Optimizer::Sgd,
        };
        let params = train(&data, &[2], &cfg).unwrap();
        let preds = params.predict(data.features()).unwrap();
        assert_abs_diff_eq!(accuracy(&labels, &preds), 1.0);
    }

    #[test]
    fn mixture_reaches_high_test_accuracy() {
        let data = generate_gaussian_mixture::<f64>(3, 50, 2, 5.0, 0.5, 42).unwrap();
        let (test_idx, train_idx) = labeled_split_indices(&data, 10, 100).unwrap();
        let train_set = data.subset(&train_idx).unwrap();
        let test_set = data.subset(&test_idx).unwrap();
        let cfg = TrainConfig {
            optimizer: Optimizer::Adam,
            epochs: 300,
            seed: 5,
            ..TrainConfig::default()
        };
        let params = train(&train_set, &[32, 16, 3], &cfg).unwrap();
        let preds = params.predict(test_set.features()).unwrap();
        let truth = test_set.required_labels().unwrap();
        assert!(accuracy(&truth, &preds) >= 0.9);
    }

    #[test]
    fn predict_factors_through_latent_bitwise() {
        let data = generate_gaussian_mixture::<f64>(3, 15, 2, 4.0, 0.4, 21).unwrap();
        let params = train(&data, &[32, 16, 3], &TrainConfig::default()).unwrap();
        let direct = params.logits(data.features()).unwrap();
        let latent = params.latent(data.features()).unwrap();
        let staged = params.head_logits(&latent).unwrap();
        assert_eq!(direct, staged);
        assert_eq!(
            params.predict(data.features()).unwrap(),
            params.head_predict(&latent).unwrap()
        );
    }

    #[test]
    fn softmax_sums_to_one() {
        let logits = array![3.0f64, -2.0, 0.5, 11.0];
        let p = softmax(&logits);
        assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-12);
        let extreme = array![1000.0f64, -1000.0, 0.0];
        let q = softmax(&extreme);
        assert_abs_diff_eq!(q.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn argmax_ties_break_toward_lower_index() {
        let logits = Array2::from_shape_vec((1, 3), vec![1.0f64, 1.0, 0.0]).unwrap();
        assert_eq!(argmax_rows(&logits), vec![0]);
    }

    #[test]
    fn gradient_vanishes_where_the_prediction_is_one_hot() {
        // With a huge logit margin the softmax is numerically one-hot on the
        // target, so the loss sits at its minimum and the gradient vanishes.
        let params = head_only_params(array![[60.0, -60.0], [-60.0, 60.0]], Activation::Identity);
        let grad = params
            .head_loss_gradient(array![1.0, -1.0].view(), 0)
            .unwrap();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-8, "gradient norm {norm}");
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = seed_rng(77);
        for trial in 0..10 {
            let arch = [6usize, 4, 3];
            let params = init_params::<f64>(5, &arch, 3, 1000 + trial).unwrap();
            let z: Array1<f64> =
                Array1::from_iter((0..params.latent_dim()).map(|_| rng.random_range(-1.0..1.0)));
            let y = rng.random_range(0..3);
            let analytic = params.head_loss_gradient(z.view(), y).unwrap();
            let h = 1e-5;
            let mut fd = Array1::zeros(z.len());
            for k in 0..z.len() {
                let mut plus = z.clone();
                plus[k] += h;
                let mut minus = z.clone();
                minus[k] -= h;
                fd[k] = (params.head_loss(plus.view(), y).unwrap()
                    - params.head_loss(minus.view(), y).unwrap())
                    / (2.0 * h);
            }
            let num = (&analytic - &fd).iter().map(|d| d * d).sum::<f64>().sqrt();
            let den = fd.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
            assert!(num / den < 1e-4, "relative error {}", num / den);
        }
    }

    #[test]
    fn linear_head_gradient_matches_closed_form() {
        // Head = single linear layer W (2 latent dims, 2 classes), bias 0:
        // grad = W (softmax(Wz) - onehot(y)).
        let w = array![[1.5, -0.5], [0.25, 2.0]];
        let params = head_only_params(w.clone(), Activation::Identity);
        let z = array![0.3, -0.7];
        let y = 1usize;
        let grad = params.head_loss_gradient(z.view(), y).unwrap();
        let logits = z.dot(&w);
        let mut residual = softmax(&logits);
        residual[y] -= 1.0;
        let expected = w.dot(&residual);
        for (g, e) in grad.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let data = generate_gaussian_mixture::<f64>(2, 20, 2, 100.0, 0.1, 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e18,
            epochs: 5,
            batch_size: 8,
            seed: 0,
            optimizer: Optimizer::Sgd,
        };
        match train(&data, &[16, 2], &cfg) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_preserves_params() {
        let data = generate_gaussian_mixture::<f64>(3, 10, 2, 4.0, 0.4, 33).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        let params = train(&data, &[8, 4, 3], &cfg).unwrap();
        let text = to_json(&params);
        let back: ClassifierParams<f64> = from_json(&text).unwrap();
        assert_eq!(params, back);
    }

    #[test]
    fn json_rejects_unknown_format() {
        let text = r#"{"format":2,"num_classes":2,"latent_index":0,"layers":[]}"#;
        assert!(from_json::<f64>(text).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let params = head_only_params(array![[1.0, 0.0], [0.0, 1.0]], Activation::Identity);
        let bad = Array2::<f64>::zeros((1, 3));
        assert!(params.predict(&bad).is_err());
        assert!(params
            .head_loss_gradient(array![1.0, 2.0, 3.0].view(), 0)
            .is_err());
        assert!(params.head_loss_gradient(array![1.0, 2.0].view(), 5).is_err());
    }
}
