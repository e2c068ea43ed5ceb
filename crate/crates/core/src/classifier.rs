//! Small feed-forward network over i-vectors: rectified-linear hidden layers,
//! a three-way softmax output, and mini-batch SGD with momentum.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, NUM_CLASSES};

pub const MLP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    /// Layer `l` maps `layer_dims[l]` inputs to `layer_dims[l + 1]` outputs;
    /// stored out×in.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Gradient of the mean cross-entropy, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpModel {
    pub fn new(
        layer_dims: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::validation(format!(
                "expected {layers} weight and bias tensors, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..layers {
            let shape = (layer_dims[l + 1], layer_dims[l]);
            if weights[l].dim() != shape || biases[l].len() != shape.0 {
                return Err(Error::validation(format!("layer {l} parameters have the wrong shape")));
            }
        }
        let model = MlpModel {
            layer_dims,
            weights,
            biases,
        };
        if !model.is_finite() {
            return Err(Error::numerical("model parameters are not finite"));
        }
        Ok(model)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-limit..=limit)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        MlpModel::new(layer_dims.to_vec(), weights, biases)
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        let weights = layer_dims
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = layer_dims.windows(2).map(|p| Array1::zeros(p[1])).collect();
        MlpModel::new(layer_dims.to_vec(), weights, biases)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::validation(format!(
                "classifier expects {}-dimensional input, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer for a batch (rows are examples).
    fn forward(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut act = x.to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = act.dot(&w.t()) + b;
            if l < last {
                act = z.mapv(|v| v.max(0.0));
            }
            pre.push(z);
        }
        pre
    }

    /// Output logits for a batch.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        Ok(self.forward(x).pop().expect("at least one layer"))
    }

    /// Class posteriors for a batch, one row per example.
    pub fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut z = self.logits(x)?;
        for mut row in z.rows_mut() {
            let p = softmax(row.view());
            row.assign(&p);
        }
        Ok(z)
    }

    pub fn predict_proba(&self, w: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        let x = ArrayView2::from_shape((1, w.len()), w)
            .map_err(|e| Error::validation(e.to_string()))?;
        let p = self.predict_proba_batch(x)?;
        Ok([p[[0, 0]], p[[0, 1]], p[[0, 2]]])
    }

    pub fn predict(&self, w: &[f64]) -> Result<Label> {
        Ok(argmax_label(&self.predict_proba(w)?))
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, x: ArrayView2<'_, f64>, labels: &[Label]) -> Result<f64> {
        check_batch(x, labels)?;
        let z = self.logits(x)?;
        Ok(cross_entropy(&z, labels))
    }

    /// Mean cross-entropy and its gradient by backpropagation.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, labels: &[Label]) -> Result<(f64, Gradients)> {
        check_batch(x, labels)?;
        self.check_input(x.ncols())?;
        let pre = self.forward(x);
        let logits = pre.last().expect("at least one layer");
        let loss = cross_entropy(logits, labels);
        let n = labels.len() as f64;

        let mut delta = logits.clone();
        for (mut row, label) in delta.rows_mut().into_iter().zip(labels) {
            let p = softmax(row.view());
            row.assign(&p);
            row[label.index()] -= 1.0;
        }
        delta.mapv_inplace(|v| v / n);

        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            let input = if l == 0 {
                x.to_owned()
            } else {
                pre[l - 1].mapv(|v| v.max(0.0))
            };
            gw[l] = delta.t().dot(&input);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                back.zip_mut_with(&pre[l - 1], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        ))
    }

    pub fn accuracy(&self, x: ArrayView2<'_, f64>, labels: &[Label]) -> Result<f64> {
        check_batch(x, labels)?;
        if labels.is_empty() {
            return Ok(0.0);
        }
        let p = self.predict_proba_batch(x)?;
        let correct = p
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, &label)| argmax_label(&[row[0], row[1], row[2]]) == label)
            .count();
        Ok(correct as f64 / labels.len() as f64)
    }

    pub fn to_document(&self) -> MlpDocument {
        MlpDocument {
            format_version: MLP_FORMAT_VERSION,
            layer_dims: self.layer_dims.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
            label_map: Label::ALL.iter().map(|l| l.name().to_string()).collect(),
        }
    }

    pub fn from_document(doc: &MlpDocument) -> Result<Self> {
        if doc.format_version != MLP_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported classifier format version {}",
                doc.format_version
            )));
        }
        let expected: Vec<&str> = Label::ALL.iter().map(|l| l.name()).collect();
        if doc.label_map != expected {
            return Err(Error::validation(format!(
                "classifier label map {:?} does not match {:?}",
                doc.label_map, expected
            )));
        }
        let weights = doc
            .weights
            .iter()
            .map(|rows| {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Format("ragged weight matrix".into()));
                }
                Array2::from_shape_vec((rows.len(), cols), rows.concat())
                    .map_err(|e| Error::Format(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = doc.biases.iter().map(|b| Array1::from(b.clone())).collect();
        MlpModel::new(doc.layer_dims.clone(), weights, biases)
    }
}

/// JSON form of an [`MlpModel`]; weights are nested row-major out×in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDocument {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub label_map: Vec<String>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::config("classifier needs an input and an output layer"));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::config("classifier layer widths must be positive"));
    }
    if *dims.last().expect("non-empty") != NUM_CLASSES {
        return Err(Error::config(format!(
            "classifier output width must be {NUM_CLASSES}"
        )));
    }
    Ok(())
}

fn check_batch(x: ArrayView2<'_, f64>, labels: &[Label]) -> Result<()> {
    if x.nrows() != labels.len() {
        return Err(Error::validation(format!(
            "{} inputs but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

fn log_softmax_at(logits: ArrayView1<'_, f64>, index: usize) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits[index] - lse
}

fn cross_entropy(logits: &Array2<f64>, labels: &[Label]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, label)| -log_softmax_at(row, label.index()))
        .sum();
    total / labels.len() as f64
}

/// Highest-probability class; ties go to the lowest class index.
pub fn argmax_label(p: &[f64; NUM_CLASSES]) -> Label {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if p[k] > p[best] {
            best = k;
        }
    }
    Label::from_index(best).expect("class index in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            max_epochs: 200,
            patience: 20,
            hidden: vec![32],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        Ok(())
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden);
        dims.push(NUM_CLASSES);
        dims
    }
}

/// Labelled examples, one row per example.
#[derive(Debug, Clone, Copy)]
pub struct LabelledSet<'a> {
    pub inputs: ArrayView2<'a, f64>,
    pub labels: &'a [Label],
}

/// Trains from a seeded Glorot initialization. With a validation set the
/// model with the best validation accuracy is returned, otherwise the final
/// one.
pub fn train_mlp(
    train: LabelledSet<'_>,
    config: &TrainConfig,
    validation: Option<LabelledSet<'_>>,
) -> Result<MlpModel> {
    config.validate()?;
    check_batch(train.inputs, train.labels)?;
    if train.labels.is_empty() {
        return Err(Error::validation("classifier training set is empty"));
    }
    if let Some(v) = &validation {
        check_batch(v.inputs, v.labels)?;
        if v.inputs.ncols() != train.inputs.ncols() {
            return Err(Error::validation("validation inputs have a different dimension"));
        }
    }
    if train.inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("classifier inputs contain non-finite values"));
    }
    let first = train.labels[0];
    if train.labels.iter().all(|&l| l == first) {
        log::warn!("classifier training set contains only class {first}");
    }

    let mut model = MlpModel::init(&config.layer_dims(train.inputs.ncols()), config.seed)?;
    let mut velocity_w: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
    let mut velocity_b: Vec<Array1<f64>> = model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.labels.len()).collect();

    let mut best = match &validation {
        Some(v) if !v.labels.is_empty() => Some((model.accuracy(v.inputs, v.labels)?, model.clone())),
        _ => None,
    };
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let x = train.inputs.select(Axis(0), batch);
            let y: Vec<Label> = batch.iter().map(|&i| train.labels[i]).collect();
            let (loss, grad) = model.loss_and_grad(x.view(), &y)?;
            if !loss.is_finite() {
                return Err(Error::numerical(format!(
                    "classifier loss is not finite at epoch {epoch}, batch {b}"
                )));
            }
            for l in 0..model.weights.len() {
                velocity_w[l] = &velocity_w[l] * config.momentum - &grad.weights[l] * config.learning_rate;
                velocity_b[l] = &velocity_b[l] * config.momentum - &grad.biases[l] * config.learning_rate;
                model.weights[l] += &velocity_w[l];
                model.biases[l] += &velocity_b[l];
            }
        }
        if let (Some(v), Some((best_acc, best_model))) = (&validation, best.as_mut()) {
            let acc = model.accuracy(v.inputs, v.labels)?;
            log::trace!("mlp epoch {epoch}: validation accuracy {acc:.4}");
            if acc > *best_acc {
                *best_acc = acc;
                *best_model = model.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > config.patience {
                    log::debug!("mlp early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }
    if !model.is_finite() {
        return Err(Error::numerical("classifier parameters diverged"));
    }
    Ok(best.map_or(model, |(_, m)| m))
}
