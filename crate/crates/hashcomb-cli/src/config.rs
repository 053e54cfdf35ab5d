//! Experiment configuration: an optional TOML file merged with
//! command-line overrides into one validated [`RunConfig`].
//!
//! Resolution order is strict: built-in defaults, then the config file,
//! then any flag that was given on the command line. The resolved
//! configuration is echoed verbatim into the run manifest so a result
//! directory is self-describing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Training/aggregation mode of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// One model trained on the whole training split; no federation.
    Monolithic,
    /// Federated averaging of clear parameter vectors.
    Fedavg,
    /// Federated averaging of Hash-Comb encoded parameters.
    FedavgHc,
    /// Federated averaging of Gaussian-noised parameter vectors.
    FedavgDp,
}

impl RunMode {
    /// The mode's stable name, used in flags, configs, and metrics rows.
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Monolithic => "monolithic",
            RunMode::Fedavg => "fedavg",
            RunMode::FedavgHc => "fedavg_hc",
            RunMode::FedavgDp => "fedavg_dp",
        }
    }
}

impl FromStr for RunMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monolithic" => Ok(RunMode::Monolithic),
            "fedavg" => Ok(RunMode::Fedavg),
            "fedavg_hc" => Ok(RunMode::FedavgHc),
            "fedavg_dp" => Ok(RunMode::FedavgDp),
            other => bail!(
                "unknown mode {other:?} (expected monolithic, fedavg, fedavg_hc, or fedavg_dp)"
            ),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Quantization-depth policy for `fedavg_hc` runs.
///
/// Written as a string in both configs and flags: `sampled` draws each
/// parameter's depth from the negotiated biased coin; `fixed:8` encodes
/// every parameter at depth 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSetting {
    /// Every parameter at one fixed depth.
    Fixed(u8),
    /// Per-parameter depths from the biased coin.
    Sampled,
}

impl FromStr for LevelSetting {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sampled" {
            return Ok(LevelSetting::Sampled);
        }
        if let Some(depth) = s.strip_prefix("fixed:") {
            let depth: u8 = depth
                .parse()
                .with_context(|| format!("invalid fixed quantization depth {depth:?}"))?;
            return Ok(LevelSetting::Fixed(depth));
        }
        bail!("unknown level policy {s:?} (expected \"sampled\" or \"fixed:<depth>\")")
    }
}

impl fmt::Display for LevelSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSetting::Fixed(depth) => write!(f, "fixed:{depth}"),
            LevelSetting::Sampled => f.write_str("sampled"),
        }
    }
}

impl Serialize for LevelSetting {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LevelSetting {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Gaussian-mechanism block, required for `fedavg_dp` runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpConfig {
    /// Privacy budget ε.
    pub epsilon: f64,
    /// Failure probability δ.
    pub delta: f64,
    /// Sampling rate q entering the noise calibration.
    pub sample_fraction: f64,
    /// Local step count Q entering the sensitivity 4·Q·G·η.
    pub local_steps: f64,
    /// Per-vector gradient clip bound G.
    pub clip: f64,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            epsilon: 2.0,
            delta: 1e-3,
            sample_fraction: 0.008,
            local_steps: 1.0,
            clip: 2.0,
        }
    }
}

/// One experiment, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV dataset to ingest (header row required).
    pub dataset: PathBuf,
    /// Name of the binary label column.
    pub label_column: String,
    /// Training/aggregation mode.
    pub mode: RunMode,
    /// Simulated node count (federated modes).
    pub nodes: usize,
    /// Communication rounds (federated modes).
    pub rounds: u32,
    /// Total SGD updates of a monolithic run.
    pub epochs: u64,
    /// SGD updates per node per round (federated modes).
    pub epochs_per_round: u64,
    /// SGD learning rate η.
    pub eta: f64,
    /// Fraction of the training split each node samples per round.
    pub data_fraction: f64,
    /// Fraction of the dataset used for training; the rest is held out.
    pub train_fraction: f64,
    /// Hidden-layer widths of the MLP.
    pub hidden_layers: Vec<usize>,
    /// Depth policy for hash-combed parameters.
    pub level: LevelSetting,
    /// Maximum quantization depth L the negotiated scheme supports.
    pub max_level: u8,
    /// Desired mean sampled depth; solved into a coin bias when `bias`
    /// is not set explicitly.
    pub target_mean_level: f64,
    /// Explicit coin bias p, overriding the solved value.
    pub bias: Option<f64>,
    /// Per-party parameter range `[x_min, x_max]` entering negotiation.
    pub weight_range: [f64; 2],
    /// Range-enlargement margin Δ; defaults to half the negotiated range.
    pub delta_margin: Option<f64>,
    /// Master seed every random stream derives from.
    pub seed: u64,
    /// Directory the metrics CSV and manifest are written to.
    pub out_dir: PathBuf,
    /// Gaussian-mechanism block (`fedavg_dp` only).
    pub dp: Option<DpConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data/synthetic.csv"),
            label_column: "label".to_string(),
            mode: RunMode::Monolithic,
            nodes: 4,
            rounds: 1,
            epochs: 1000,
            epochs_per_round: 1000,
            eta: 0.05,
            data_fraction: 0.25,
            train_fraction: 0.75,
            hidden_layers: vec![50, 25, 20, 25, 50],
            level: LevelSetting::Sampled,
            max_level: 16,
            target_mean_level: 8.0,
            bias: None,
            weight_range: [-0.5, 0.5],
            delta_margin: None,
            seed: 0,
            out_dir: PathBuf::from("results"),
            dp: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
///
/// `None` means the flag was not given, so the file (or default) value
/// stands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub label_column: Option<String>,
    pub mode: Option<RunMode>,
    pub nodes: Option<usize>,
    pub rounds: Option<u32>,
    pub epochs: Option<u64>,
    pub epochs_per_round: Option<u64>,
    pub eta: Option<f64>,
    pub data_fraction: Option<f64>,
    pub train_fraction: Option<f64>,
    pub hidden_layers: Option<Vec<usize>>,
    pub level: Option<LevelSetting>,
    pub max_level: Option<u8>,
    pub target_mean_level: Option<f64>,
    pub bias: Option<f64>,
    pub weight_range: Option<[f64; 2]>,
    pub delta_margin: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub sample_fraction: Option<f64>,
    pub local_steps: Option<f64>,
    pub clip: Option<f64>,
}

impl Overrides {
    /// Whether any of the DP flags was given.
    fn touches_dp(&self) -> bool {
        self.epsilon.is_some()
            || self.delta.is_some()
            || self.sample_fraction.is_some()
            || self.local_steps.is_some()
            || self.clip.is_some()
    }
}

/// Parses `path` as a TOML [`RunConfig`], with defaults for absent keys.
pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

/// Merges defaults, the optional config file, and flag overrides, then
/// validates the result.
pub fn resolve(config_file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match config_file {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };

    macro_rules! apply {
        ($($field:ident),* $(,)?) => {
            $(if let Some(value) = overrides.$field.clone() {
                config.$field = value;
            })*
        };
    }
    apply!(
        dataset,
        label_column,
        mode,
        nodes,
        rounds,
        epochs,
        epochs_per_round,
        eta,
        data_fraction,
        train_fraction,
        hidden_layers,
        level,
        max_level,
        target_mean_level,
        seed,
        out_dir,
    );
    if let Some(bias) = overrides.bias {
        config.bias = Some(bias);
    }
    if let Some(range) = overrides.weight_range {
        config.weight_range = range;
    }
    if let Some(margin) = overrides.delta_margin {
        config.delta_margin = Some(margin);
    }
    if overrides.touches_dp() {
        let mut dp = config.dp.unwrap_or_default();
        if let Some(v) = overrides.epsilon {
            dp.epsilon = v;
        }
        if let Some(v) = overrides.delta {
            dp.delta = v;
        }
        if let Some(v) = overrides.sample_fraction {
            dp.sample_fraction = v;
        }
        if let Some(v) = overrides.local_steps {
            dp.local_steps = v;
        }
        if let Some(v) = overrides.clip {
            dp.clip = v;
        }
        config.dp = Some(dp);
    }

    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Checks every invariant that does not require touching the
    /// filesystem, so presets for not-yet-downloaded datasets still
    /// validate.
    pub fn validate(&self) -> Result<()> {
        if self.label_column.is_empty() {
            bail!("label column name must not be empty");
        }
        if self.nodes == 0 {
            bail!("node count must be at least 1");
        }
        if self.rounds == 0 {
            bail!("round count must be at least 1");
        }
        if self.epochs == 0 || self.epochs_per_round == 0 {
            bail!("epoch counts must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            bail!("learning rate must be positive and finite, got {}", self.eta);
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            bail!(
                "per-node data fraction must lie in (0, 1], got {}",
                self.data_fraction
            );
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!(
                "train fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            );
        }
        if self.max_level == 0 {
            bail!("maximum quantization depth must be at least 1");
        }
        if let LevelSetting::Fixed(depth) = self.level {
            if depth == 0 || depth > self.max_level {
                bail!(
                    "fixed quantization depth {depth} must lie in 1..={}",
                    self.max_level
                );
            }
        }
        if !(self.target_mean_level >= 1.0 && self.target_mean_level < f64::from(self.max_level)) {
            bail!(
                "target mean depth {} must lie in [1, {})",
                self.target_mean_level,
                self.max_level
            );
        }
        if let Some(bias) = self.bias {
            if !(bias > 0.0 && bias <= 1.0) {
                bail!("coin bias must lie in (0, 1], got {bias}");
            }
        }
        let [w_min, w_max] = self.weight_range;
        if !(w_min.is_finite() && w_max.is_finite() && w_min < w_max) {
            bail!("weight range [{w_min}, {w_max}] must be finite with min < max");
        }
        if let Some(margin) = self.delta_margin {
            if !(margin >= 0.0 && margin.is_finite()) {
                bail!("range margin must be non-negative and finite, got {margin}");
            }
        }
        match self.mode {
            RunMode::FedavgDp => {
                let Some(dp) = &self.dp else {
                    bail!("mode fedavg_dp requires a [dp] block (epsilon, delta, sample_fraction, local_steps, clip)");
                };
                if !(dp.epsilon > 0.0 && dp.epsilon.is_finite()) {
                    bail!("dp epsilon must be positive and finite, got {}", dp.epsilon);
                }
                if !(dp.delta > 0.0 && dp.delta < 1.0) {
                    bail!("dp delta must lie in (0, 1), got {}", dp.delta);
                }
                if !(dp.sample_fraction > 0.0 && dp.sample_fraction <= 1.0) {
                    bail!(
                        "dp sample fraction must lie in (0, 1], got {}",
                        dp.sample_fraction
                    );
                }
                if !(dp.local_steps > 0.0 && dp.local_steps.is_finite()) {
                    bail!("dp local steps must be positive and finite, got {}", dp.local_steps);
                }
                if !(dp.clip > 0.0 && dp.clip.is_finite()) {
                    bail!("dp clip bound must be positive and finite, got {}", dp.clip);
                }
            }
            RunMode::Monolithic | RunMode::Fedavg | RunMode::FedavgHc => {}
        }
        Ok(())
    }
}
