//! From-scratch multi-layer perceptron for binary classification.
//!
//! The model is a plain feed-forward network — configurable hidden stack
//! (default `50-25-20-25-50`), ReLU hidden activations, and one sigmoid
//! output unit — trained with per-sample stochastic gradient descent on
//! binary cross-entropy loss.
//!
//! Two conventions matter when reading the numbers this module produces:
//!
//! * An **epoch is one SGD update** on one uniformly drawn sample, not a
//!   pass over the dataset. Epoch counts therefore count parameter
//!   updates, which keeps very large epoch budgets practical on small
//!   datasets.
//! * The loss is evaluated **from the logit** in the numerically stable
//!   form `max(z, 0) − z·y + ln(1 + e^{−|z|})`, so training never
//!   exponentiates a large positive number.
//!
//! Models serialize to a flat parameter vector (per layer: row-major
//! weight matrix, then bias vector) which is the unit of exchange for
//! federated averaging and Hash-Comb encoding.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Default hidden-layer widths, input to output.
pub const DEFAULT_HIDDEN_LAYERS: [usize; 5] = [50, 25, 20, 25, 50];

/// Default SGD learning rate.
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;

/// Classification threshold on the predicted probability.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Numerically stable logistic function.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy evaluated from the logit:
/// `max(z, 0) − z·y + ln(1 + e^{−|z|})`.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn validate_label(y: f64) -> Result<()> {
    if y == 0.0 || y == 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "binary label must be 0 or 1, got {y}"
        )))
    }
}

/// A labeled binary-classification dataset.
///
/// Rows hold min-max normalized features (every value in `[0, 1]`) and a
/// 0/1 label. Construction validates shape, finiteness, normalization,
/// and label encoding, so downstream code can rely on them. A dataset may
/// be empty; operations that need rows reject emptiness themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, validating every row against the invariants.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        if feature_names.is_empty() {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: feature_names.len(),
                    got: row.len(),
                });
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has feature value {bad} outside the normalized range [0, 1]"
                )));
            }
        }
        for (i, &label) in labels.iter().enumerate() {
            if label != 0.0 && label != 1.0 {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has non-binary label {label}"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    /// Whether the dataset has no rows.
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Number of feature columns.
    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Column names, in feature order.
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Feature row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    /// Label of row `i` (0.0 or 1.0).
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// All labels, row order.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `(negatives, positives)` row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let positives = self.labels.iter().filter(|&&y| y == 1.0).count();
        (self.labels.len() - positives, positives)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidParameter(format!(
                    "row index {i} out of bounds for {} rows",
                    self.len()
                )));
            }
            features.push(self.features[i].clone());
            labels.push(self.labels[i]);
        }
        Ok(Self {
            features,
            labels,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Disjoint seeded train/test split.
    ///
    /// `train_fraction` of the rows (rounded, but always leaving at least
    /// one row on each side) go to the training set after a full shuffle.
    pub fn split<R: Rng + ?Sized>(
        &self,
        train_fraction: f64,
        rng: &mut R,
    ) -> Result<(Self, Self)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        if self.len() < 2 {
            return Err(Error::InvalidDataset(
                "need at least two rows to split into train and test".into(),
            ));
        }
        let mut indices: Vec<usize> = (0..self.len()).collect();
        indices.shuffle(rng);
        let train_count =
            ((self.len() as f64 * train_fraction).round() as usize).clamp(1, self.len() - 1);
        let train = self.subset(&indices[..train_count])?;
        let test = self.subset(&indices[train_count..])?;
        Ok((train, test))
    }
}

/// Binary-classification quality measures at threshold 0.5.
///
/// `f1` is computed in the integer-count form `2·TP / (2·TP + FP + FN)`,
/// which is exact and algebraically equal to the harmonic mean of
/// precision and recall whenever the latter is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl Metrics {
    /// Derives all measures from a confusion matrix. Ratios with a zero
    /// denominator are reported as 0.
    pub fn from_counts(
        true_positives: u64,
        false_positives: u64,
        false_negatives: u64,
        true_negatives: u64,
    ) -> Result<Self> {
        let total = true_positives + false_positives + false_negatives + true_negatives;
        if total == 0 {
            return Err(Error::InvalidDataset(
                "cannot compute metrics over zero samples".into(),
            ));
        }
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Ok(Self {
            accuracy: (true_positives + true_negatives) as f64 / total as f64,
            precision: ratio(true_positives, true_positives + false_positives),
            recall: ratio(true_positives, true_positives + false_negatives),
            f1: ratio(
                2 * true_positives,
                2 * true_positives + false_positives + false_negatives,
            ),
            true_positives,
            false_positives,
            false_negatives,
            true_negatives,
        })
    }
}

/// Feed-forward binary classifier.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs through a
/// row-major weight matrix and a bias vector; every layer but the last
/// applies ReLU, the last is a single sigmoid unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// `[input_dim, hidden..., 1]`.
    sizes: Vec<usize>,
    /// Per-layer row-major `sizes[l + 1] × sizes[l]` weight matrices.
    weights: Vec<Vec<f64>>,
    /// Per-layer bias vectors of length `sizes[l + 1]`.
    biases: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Builds a model with Glorot-uniform weights (`±√(6 / (fan_in +
    /// fan_out))`) and zero biases.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidParameter(
                "input dimension must be at least 1".into(),
            ));
        }
        if hidden.iter().any(|&width| width == 0) {
            return Err(Error::InvalidParameter(
                "hidden layer widths must be at least 1".into(),
            ));
        }
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);

        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for layer in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
            let radius = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let layer_weights = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-radius..radius))
                .collect();
            weights.push(layer_weights);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            sizes,
            weights,
            biases,
        })
    }

    /// Model with the default hidden stack.
    pub fn with_default_layers<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Result<Self> {
        Self::new(input_dim, &DEFAULT_HIDDEN_LAYERS, rng)
    }

    /// `[input_dim, hidden..., 1]`.
    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Expected feature dimension.
    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Runs the network up to the output logit, keeping every layer input
    /// for backpropagation. `acts[l]` is the input to layer `l`
    /// (`acts[0]` is `x` itself).
    fn trace(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
        if x.len() != self.sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.sizes[0],
                got: x.len(),
            });
        }
        let layer_count = self.weights.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layer_count);
        acts.push(x.to_vec());
        for layer in 0..layer_count - 1 {
            let n_in = self.sizes[layer];
            let n_out = self.sizes[layer + 1];
            let prev = &acts[layer];
            let mut out = vec![0.0; n_out];
            for (row, slot) in out.iter_mut().enumerate() {
                let w = &self.weights[layer][row * n_in..(row + 1) * n_in];
                let mut z = self.biases[layer][row];
                for (wi, ai) in w.iter().zip(prev.iter()) {
                    z += wi * ai;
                }
                // ReLU, written so a NaN pre-activation stays NaN instead
                // of being masked to zero.
                *slot = if z < 0.0 { 0.0 } else { z };
            }
            acts.push(out);
        }
        let last = layer_count - 1;
        let prev = &acts[last];
        let mut logit = self.biases[last][0];
        for (wi, ai) in self.weights[last].iter().zip(prev.iter()) {
            logit += wi * ai;
        }
        Ok((acts, logit))
    }

    /// Predicted probability of the positive class.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let (_, logit) = self.trace(x)?;
        Ok(sigmoid(logit))
    }

    /// Loss of the current parameters on one sample, without updating.
    pub fn loss(&self, x: &[f64], y: f64) -> Result<f64> {
        validate_label(y)?;
        let (_, logit) = self.trace(x)?;
        Ok(bce_from_logit(logit, y))
    }

    /// One SGD update on one sample; returns the pre-update loss.
    ///
    /// With `clip = Some(g)`, the gradient of every weight matrix and
    /// every bias vector is scaled, independently per vector, so its L2
    /// norm does not exceed `g`. A non-finite loss or parameter aborts
    /// with a divergence error; the model must be discarded then.
    pub fn sgd_step(&mut self, x: &[f64], y: f64, eta: f64, clip: Option<f64>) -> Result<f64> {
        validate_label(y)?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive and finite, got {eta}"
            )));
        }
        if let Some(limit) = clip {
            if !(limit > 0.0 && limit.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "gradient clip bound must be positive and finite, got {limit}"
                )));
            }
        }

        let (acts, logit) = self.trace(x)?;
        let loss = bce_from_logit(logit, y);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { update: 0 });
        }

        // Backpropagation. `delta` carries ∂loss/∂z of the current layer;
        // for the sigmoid output unit under cross-entropy it is σ(z) − y.
        let layer_count = self.weights.len();
        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut delta = vec![sigmoid(logit) - y];
        for layer in (0..layer_count).rev() {
            let n_in = self.sizes[layer];
            let n_out = self.sizes[layer + 1];
            debug_assert_eq!(delta.len(), n_out);
            for row in 0..n_out {
                let d = delta[row];
                grad_b[layer][row] = d;
                let base = row * n_in;
                for col in 0..n_in {
                    grad_w[layer][base + col] = d * acts[layer][col];
                }
            }
            if layer > 0 {
                // ReLU derivative from the stored activation: the unit was
                // active iff its output is positive.
                let mut next = vec![0.0; n_in];
                for (col, slot) in next.iter_mut().enumerate() {
                    if acts[layer][col] > 0.0 {
                        let mut sum = 0.0;
                        for row in 0..n_out {
                            sum += self.weights[layer][row * n_in + col] * delta[row];
                        }
                        *slot = sum;
                    }
                }
                delta = next;
            }
        }

        if let Some(limit) = clip {
            for grad in grad_w.iter_mut().chain(grad_b.iter_mut()) {
                clip_to_norm(grad, limit);
            }
        }

        let mut finite = true;
        for layer in 0..layer_count {
            for (w, g) in self.weights[layer].iter_mut().zip(&grad_w[layer]) {
                *w -= eta * g;
                finite &= w.is_finite();
            }
            for (b, g) in self.biases[layer].iter_mut().zip(&grad_b[layer]) {
                *b -= eta * g;
                finite &= b.is_finite();
            }
        }
        if !finite {
            return Err(Error::NonFiniteLoss { update: 0 });
        }
        Ok(loss)
    }

    /// Flat parameter snapshot: for each layer, the row-major weight
    /// matrix followed by the bias vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in 0..self.weights.len() {
            flat.extend_from_slice(&self.weights[layer]);
            flat.extend_from_slice(&self.biases[layer]);
        }
        flat
    }

    /// Restores parameters from a flat snapshot in [`Self::to_flat`]
    /// order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in 0..self.weights.len() {
            let w_len = self.weights[layer].len();
            self.weights[layer].copy_from_slice(&flat[offset..offset + w_len]);
            offset += w_len;
            let b_len = self.biases[layer].len();
            self.biases[layer].copy_from_slice(&flat[offset..offset + b_len]);
            offset += b_len;
        }
        Ok(())
    }
}

/// Scales `v` so its L2 norm is at most `limit`.
fn clip_to_norm(v: &mut [f64], limit: f64) {
    let norm = v.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > limit {
        let scale = limit / norm;
        for g in v.iter_mut() {
            *g *= scale;
        }
    }
}

/// Trains on uniformly drawn single samples for `epochs` updates.
///
/// Rejects empty and single-class datasets up front; per-update sampling
/// and SGD are delegated to [`fit`].
pub fn train<R: Rng + ?Sized>(
    model: &mut MlpModel,
    data: &Dataset,
    epochs: u64,
    eta: f64,
    clip: Option<f64>,
    rng: &mut R,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("cannot train on an empty dataset".into()));
    }
    let (negatives, positives) = data.class_counts();
    if negatives == 0 || positives == 0 {
        return Err(Error::InvalidDataset(format!(
            "training split holds a single class ({positives} positive / {negatives} negative rows)"
        )));
    }
    fit(model, data, epochs, eta, clip, rng)
}

/// Core training loop: `epochs` SGD updates on uniformly drawn samples.
///
/// Unlike [`train`] this accepts single-class data, which federated
/// nodes can transiently receive from small random partitions.
pub(crate) fn fit<R: Rng + ?Sized>(
    model: &mut MlpModel,
    data: &Dataset,
    epochs: u64,
    eta: f64,
    clip: Option<f64>,
    rng: &mut R,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("cannot train on an empty dataset".into()));
    }
    for update in 0..epochs {
        let index = rng.gen_range(0..data.len());
        match model.sgd_step(data.row(index), data.label(index), eta, clip) {
            Ok(_) => {}
            Err(Error::NonFiniteLoss { .. }) => {
                return Err(Error::NonFiniteLoss { update });
            }
            Err(other) => return Err(other),
        }
    }
    Ok(())
}

/// Confusion-matrix metrics of `model` on `data` at threshold 0.5.
pub fn evaluate(model: &MlpModel, data: &Dataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("cannot evaluate on an empty dataset".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..data.len() {
        let predicted = model.forward(data.row(i))? >= DECISION_THRESHOLD;
        let actual = data.label(i) == 1.0;
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Metrics::from_counts(tp, fp, fn_, tn)
}
