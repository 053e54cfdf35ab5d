//! Simulated N-node federated training with three aggregation modes.
//!
//! Each communication round follows the same shape: every node receives
//! the current global parameters, trains locally on its own random data
//! partition, uploads a payload, and the server averages the payloads
//! into the next global model, which is then scored on the held-out test
//! split. The payload is what distinguishes the modes:
//!
//! * [`AggregationMode::Clear`] uploads raw parameter vectors (plain
//!   federated averaging).
//! * [`AggregationMode::Hashed`] uploads one Hash-Comb record per
//!   parameter; the server resolves each record's deepest digest to its
//!   channel midpoint before averaging, so parameters travel only as
//!   quantization evidence.
//! * [`AggregationMode::GaussianDp`] clips per-vector gradients during
//!   local training and uploads parameter vectors with zero-mean
//!   Gaussian noise calibrated to an (ε, δ) budget.
//!
//! All randomness is drawn from streams derived deterministically from
//! one master seed (see [`crate::seeds`]), so any run is reproducible
//! bit for bit, including the single-node degenerate case that matches
//! monolithic training exactly.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{encode, DigestTableSet, HashComb};
use crate::error::{Error, Result};
use crate::ml_core::{evaluate, fit, Dataset, MlpModel, DEFAULT_HIDDEN_LAYERS};
use crate::quantization::{sample_level, QuantizationScheme};
use crate::seeds;

/// How node payloads are aggregated each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    /// Plain federated averaging of raw parameter vectors.
    Clear,
    /// Hash-Comb encoded parameters, decoded to midpoints server-side.
    Hashed,
    /// Gaussian-noised parameter vectors with clipped local gradients.
    GaussianDp,
}

impl AggregationMode {
    /// Stable label used in metrics output.
    pub fn label(&self) -> &'static str {
        match self {
            AggregationMode::Clear => "fedavg",
            AggregationMode::Hashed => "fedavg_hc",
            AggregationMode::GaussianDp => "fedavg_dp",
        }
    }
}

/// Quantization depth selection for hashed payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelPolicy {
    /// Every parameter is encoded at this depth.
    Fixed(u8),
    /// Every parameter draws its own depth from the scheme's biased
    /// coin, through a dedicated per-node random stream.
    Sampled,
}

/// Gaussian-mechanism parameters for [`AggregationMode::GaussianDp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpParams {
    /// Privacy budget ε.
    pub epsilon: f64,
    /// Failure probability δ.
    pub delta: f64,
    /// Sampling rate q entering the noise calibration.
    pub sample_fraction: f64,
    /// Local step count Q entering the sensitivity `4·Q·G·η`.
    pub local_steps: f64,
    /// Per-vector gradient clip bound G, applied during local training.
    pub clip: f64,
    /// Explicit noise variance, bypassing the calibration formula. The
    /// calibrated value and an explicit setting are deliberately
    /// independent knobs.
    pub sigma_squared_override: Option<f64>,
}

/// Full description of one federated experiment.
#[derive(Debug, Clone)]
pub struct FederationConfig {
    /// Number of simulated nodes `N ≥ 1`.
    pub nodes: usize,
    /// Number of communication rounds `R ≥ 1`.
    pub rounds: u32,
    /// SGD updates per node per round (an epoch is one update on one
    /// drawn sample).
    pub epochs_per_round: u64,
    /// SGD learning rate η.
    pub eta: f64,
    /// Payload and aggregation mode.
    pub mode: AggregationMode,
    /// Fraction of the training split each node samples per round.
    pub data_fraction: f64,
    /// Fraction of the dataset used for training (the rest is test).
    pub train_fraction: f64,
    /// Hidden-layer widths of every model.
    pub hidden_layers: Vec<usize>,
    /// Depth selection for hashed payloads.
    pub level_policy: LevelPolicy,
    /// Gaussian-mechanism parameters; required in DP mode.
    pub dp: Option<DpParams>,
    /// Master seed all random streams derive from.
    pub seed: u64,
    /// Draw fresh node samples every round (`true`, the default) or
    /// fix the round-0 partition for the whole run.
    pub resample_each_round: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            nodes: 4,
            rounds: 1,
            epochs_per_round: 1000,
            eta: crate::ml_core::DEFAULT_LEARNING_RATE,
            mode: AggregationMode::Clear,
            data_fraction: 0.25,
            train_fraction: 0.75,
            hidden_layers: DEFAULT_HIDDEN_LAYERS.to_vec(),
            level_policy: LevelPolicy::Sampled,
            dp: None,
            seed: 0,
            resample_each_round: true,
        }
    }
}

impl FederationConfig {
    /// Checks the mode-independent and mode-specific invariants.
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::InvalidParameter("node count must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("round count must be at least 1".into()));
        }
        if self.epochs_per_round == 0 {
            return Err(Error::InvalidParameter(
                "epochs per round must be at least 1".into(),
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive and finite, got {}",
                self.eta
            )));
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "per-node data fraction must lie in (0, 1], got {}",
                self.data_fraction
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if let LevelPolicy::Fixed(0) = self.level_policy {
            return Err(Error::InvalidParameter(
                "fixed quantization depth must be at least 1".into(),
            ));
        }
        if self.mode == AggregationMode::GaussianDp && self.dp.is_none() {
            return Err(Error::InvalidParameter(
                "differential-privacy mode requires noise parameters".into(),
            ));
        }
        if let Some(dp) = &self.dp {
            if let Some(s2) = dp.sigma_squared_override {
                if !(s2 >= 0.0 && s2.is_finite()) {
                    return Err(Error::InvalidNoiseParameters(format!(
                        "noise variance must be non-negative and finite, got {s2}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Payload one node uploads in one round.
#[derive(Debug, Clone)]
pub enum MessagePayload {
    /// Raw parameter vector.
    Clear(Vec<f64>),
    /// One Hash-Comb record per parameter.
    Hashed(Vec<HashComb>),
    /// Parameter vector with calibrated Gaussian noise.
    Noisy(Vec<f64>),
}

/// One node's upload for one round.
#[derive(Debug, Clone)]
pub struct RoundMessage {
    /// Sending node (0-based).
    pub node: usize,
    /// Round the payload belongs to (0-based).
    pub round: u32,
    /// The parameters, in the mode's representation.
    pub payload: MessagePayload,
}

/// Global-model quality after one aggregation round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundMetrics {
    /// 1-based communication round.
    pub round: u32,
    /// Aggregation-mode label.
    pub mode: String,
    /// Test-split accuracy of the aggregated model.
    pub accuracy: f64,
    /// Test-split F1 of the aggregated model.
    pub f1: f64,
    /// Wall-clock duration of the round in milliseconds.
    pub wall_ms: u64,
}

/// Draws each node's training sample for one round.
///
/// Every node independently samples `floor(fraction · |data|)` rows
/// without replacement, so node samples may overlap each other. A
/// full-population draw (`fraction` covering every row) returns rows in
/// dataset order without consuming randomness, which makes single-node
/// full-fraction runs bit-identical to monolithic training.
pub fn partition<R: Rng + ?Sized>(
    data: &Dataset,
    nodes: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<Dataset>> {
    if nodes == 0 {
        return Err(Error::InvalidParameter("node count must be at least 1".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "per-node data fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let size = (fraction * data.len() as f64).floor() as usize;
    if size == 0 {
        return Err(Error::InvalidDataset(format!(
            "node partition would be empty: fraction {fraction} of {} rows",
            data.len()
        )));
    }
    (0..nodes)
        .map(|_| {
            if size == data.len() {
                data.subset(&(0..size).collect::<Vec<_>>())
            } else {
                let picked = rand::seq::index::sample(rng, data.len(), size).into_vec();
                data.subset(&picked)
            }
        })
        .collect()
}

/// Element-wise mean of the node parameter vectors.
pub fn fed_avg<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidParameter("no parameter vectors to average".into()))?;
    let mut out = first.as_ref().to_vec();
    for vector in &vectors[1..] {
        let vector = vector.as_ref();
        if vector.len() != out.len() {
            return Err(Error::LengthMismatch {
                expected: out.len(),
                got: vector.len(),
            });
        }
        for (acc, value) in out.iter_mut().zip(vector) {
            *acc += value;
        }
    }
    let n = vectors.len() as f64;
    for acc in out.iter_mut() {
        *acc /= n;
    }
    Ok(out)
}

/// Averages Hash-Comb payloads by resolving each record's deepest digest
/// to its channel midpoint.
///
/// Grouping equal digests and weighting midpoints by their multiplicity
/// is algebraically the same mean; the sum here runs in node order so
/// the result is bit-identical to [`fed_avg`] applied to the decoded
/// midpoints.
pub fn fed_avg_hashed<V: AsRef<[HashComb]>>(
    messages: &[V],
    tables: &DigestTableSet,
) -> Result<Vec<f64>> {
    let first = messages
        .first()
        .ok_or_else(|| Error::InvalidParameter("no hashed payloads to average".into()))?;
    let params = first.as_ref().len();
    for message in messages {
        if message.as_ref().len() != params {
            return Err(Error::LengthMismatch {
                expected: params,
                got: message.as_ref().len(),
            });
        }
    }
    let n = messages.len() as f64;
    let mut out = Vec::with_capacity(params);
    for i in 0..params {
        let mut acc = crate::codec::decode(&messages[0].as_ref()[i], tables)?;
        for message in &messages[1..] {
            acc += crate::codec::decode(&message.as_ref()[i], tables)?;
        }
        out.push(acc / n);
    }
    Ok(out)
}

/// Calibrated Gaussian noise variance
/// `σ² = 2·(4·Q·G·η)²·ln(1.25·q/δ) / ε²`.
pub fn dp_sigma(
    epsilon: f64,
    delta: f64,
    sample_fraction: f64,
    local_steps: f64,
    clip: f64,
    eta: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidNoiseParameters(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidNoiseParameters(format!(
            "delta must lie strictly between 0 and 1, got {delta}"
        )));
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::InvalidNoiseParameters(format!(
            "sampling rate must lie in (0, 1], got {sample_fraction}"
        )));
    }
    if !(local_steps > 0.0 && local_steps.is_finite()) {
        return Err(Error::InvalidNoiseParameters(format!(
            "local step count must be positive and finite, got {local_steps}"
        )));
    }
    if !(clip > 0.0 && clip.is_finite()) {
        return Err(Error::InvalidNoiseParameters(format!(
            "clip bound must be positive and finite, got {clip}"
        )));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidNoiseParameters(format!(
            "learning rate must be positive and finite, got {eta}"
        )));
    }
    let log_argument = 1.25 * sample_fraction / delta;
    if log_argument <= 1.0 {
        return Err(Error::InvalidNoiseParameters(format!(
            "1.25·q/δ must exceed 1 for a positive noise variance, got {log_argument}"
        )));
    }
    let sensitivity = 4.0 * local_steps * clip * eta;
    Ok(2.0 * sensitivity * sensitivity * log_argument.ln() / (epsilon * epsilon))
}

/// Adds i.i.d. zero-mean Gaussian noise of the given variance to every
/// element. Zero variance returns the input unchanged without consuming
/// randomness.
pub fn apply_gaussian_noise<R: Rng + ?Sized>(
    vector: &[f64],
    sigma_squared: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma_squared >= 0.0 && sigma_squared.is_finite()) {
        return Err(Error::InvalidNoiseParameters(format!(
            "noise variance must be non-negative and finite, got {sigma_squared}"
        )));
    }
    if sigma_squared == 0.0 {
        return Ok(vector.to_vec());
    }
    let normal = rand_distr::Normal::new(0.0, sigma_squared.sqrt())
        .map_err(|e| Error::InvalidNoiseParameters(e.to_string()))?;
    Ok(vector.iter().map(|x| x + rng.sample(normal)).collect())
}

/// Dispatches one round's uniform payloads to the matching aggregator.
fn aggregate_round(
    messages: &[RoundMessage],
    tables: Option<&DigestTableSet>,
) -> Result<Vec<f64>> {
    if messages.is_empty() {
        return Err(Error::InvalidParameter("no round messages to aggregate".into()));
    }
    let mut clear: Vec<&[f64]> = Vec::new();
    let mut hashed: Vec<&[HashComb]> = Vec::new();
    for message in messages {
        match &message.payload {
            MessagePayload::Clear(v) | MessagePayload::Noisy(v) => clear.push(v),
            MessagePayload::Hashed(records) => hashed.push(records),
        }
    }
    match (clear.is_empty(), hashed.is_empty()) {
        (false, true) => fed_avg(&clear),
        (true, false) => {
            let tables = tables.ok_or_else(|| {
                Error::InvalidParameter("hashed aggregation requires digest tables".into())
            })?;
            fed_avg_hashed(&hashed, tables)
        }
        _ => Err(Error::InvalidParameter(
            "a round must not mix hashed and clear payloads".into(),
        )),
    }
}

/// Runs the full federated experiment and returns one metrics row per
/// round.
///
/// Per round: partition the training split, train every node from the
/// current global parameters, build the mode's payload, aggregate, and
/// score the new global model on the held-out test split. Node-local
/// work runs in parallel; every random stream is keyed by `(seed,
/// round, node)` so parallelism does not affect the results.
pub fn run_federation(
    config: &FederationConfig,
    data: &Dataset,
    scheme: Option<&QuantizationScheme>,
) -> Result<Vec<RoundMetrics>> {
    config.validate()?;

    let scheme = match config.mode {
        AggregationMode::Hashed => Some(scheme.ok_or_else(|| {
            Error::InvalidParameter(
                "hashed aggregation requires a negotiated quantization scheme".into(),
            )
        })?),
        _ => None,
    };
    let tables = match scheme {
        Some(s) => Some(match config.level_policy {
            LevelPolicy::Fixed(level) => {
                if level == 0 || level > s.max_level() {
                    return Err(Error::LevelTooDeep {
                        level,
                        max: s.max_level(),
                    });
                }
                DigestTableSet::for_levels(s, &[level])?
            }
            LevelPolicy::Sampled => DigestTableSet::full(s)?,
        }),
        None => None,
    };

    let (sigma_squared, clip) = match (config.mode, &config.dp) {
        (AggregationMode::GaussianDp, Some(dp)) => {
            let sigma_squared = match dp.sigma_squared_override {
                Some(s2) => s2,
                None => dp_sigma(
                    dp.epsilon,
                    dp.delta,
                    dp.sample_fraction,
                    dp.local_steps,
                    dp.clip,
                    config.eta,
                )?,
            };
            (Some(sigma_squared), Some(dp.clip))
        }
        _ => (None, None),
    };

    let (train_split, test_split) = data.split(
        config.train_fraction,
        &mut seeds::split_rng(config.seed),
    )?;
    let mut global = MlpModel::new(
        train_split.feature_dim(),
        &config.hidden_layers,
        &mut seeds::init_rng(config.seed),
    )?;

    let fixed_partition = if config.resample_each_round {
        None
    } else {
        Some(partition(
            &train_split,
            config.nodes,
            config.data_fraction,
            &mut seeds::partition_rng(config.seed, 0),
        )?)
    };

    let mut rows = Vec::with_capacity(config.rounds as usize);
    for round in 0..config.rounds {
        let started = std::time::Instant::now();
        let fresh_partition;
        let node_data: &[Dataset] = match &fixed_partition {
            Some(datasets) => datasets,
            None => {
                fresh_partition = partition(
                    &train_split,
                    config.nodes,
                    config.data_fraction,
                    &mut seeds::partition_rng(config.seed, u64::from(round)),
                )?;
                &fresh_partition
            }
        };

        let messages: Vec<RoundMessage> = (0..config.nodes)
            .into_par_iter()
            .map(|node| -> Result<RoundMessage> {
                let mut model = global.clone();
                let mut train_rng =
                    seeds::node_train_rng(config.seed, u64::from(round), node as u64);
                fit(
                    &mut model,
                    &node_data[node],
                    config.epochs_per_round,
                    config.eta,
                    clip,
                    &mut train_rng,
                )?;
                let flat = model.to_flat();
                let payload = match config.mode {
                    AggregationMode::Clear => MessagePayload::Clear(flat),
                    AggregationMode::Hashed => {
                        let s = scheme.expect("hashed mode always carries a scheme");
                        let mut level_rng =
                            seeds::node_level_rng(config.seed, u64::from(round), node as u64);
                        let mut records = Vec::with_capacity(flat.len());
                        for &w in &flat {
                            let level = match config.level_policy {
                                LevelPolicy::Fixed(level) => level,
                                LevelPolicy::Sampled => sample_level(&mut level_rng, s),
                            };
                            records.push(encode(s.clamp(w), level, s)?);
                        }
                        MessagePayload::Hashed(records)
                    }
                    AggregationMode::GaussianDp => {
                        let mut noise_rng =
                            seeds::node_noise_rng(config.seed, u64::from(round), node as u64);
                        MessagePayload::Noisy(apply_gaussian_noise(
                            &flat,
                            sigma_squared.expect("dp mode always carries a variance"),
                            &mut noise_rng,
                        )?)
                    }
                };
                Ok(RoundMessage {
                    node,
                    round,
                    payload,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let aggregated = aggregate_round(&messages, tables.as_ref())?;
        global.set_flat(&aggregated)?;
        let metrics = evaluate(&global, &test_split)?;
        rows.push(RoundMetrics {
            round: round + 1,
            mode: config.mode.label().to_string(),
            accuracy: metrics.accuracy,
            f1: metrics.f1,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(rows)
}
