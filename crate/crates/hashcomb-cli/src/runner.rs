//! Experiment orchestration: negotiation, training, and result emission.
//!
//! A run follows the mode written in its [`RunConfig`]: `monolithic`
//! trains one model on the whole training split; the `fedavg*` modes run
//! the simulated federation. Hash-combed runs first execute the
//! negotiation protocol among as many simulated parties as there are
//! nodes, so the quantization scheme used for encoding is the one the
//! parties agreed on, never a hard-coded one.
//!
//! Every run writes two files into its output directory: `metrics.csv`
//! (one row per communication round: round, mode, accuracy, f1, wall_ms)
//! and `manifest.json` (the resolved config, seed derivation, dataset
//! summary with normalization bounds, and — for hash-combed runs — the
//! salt-free scheme fingerprint). The salt itself never leaves the
//! process.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use hashcomb::federation::{
    dp_sigma, run_federation, AggregationMode, DpParams, FederationConfig, LevelPolicy,
    RoundMetrics,
};
use hashcomb::ml_core::{evaluate, train, MlpModel};
use hashcomb::secret_sharing::negotiation::{
    run_negotiation, LocalRange, NegotiationOutcome, NegotiationParams,
};
use hashcomb::secret_sharing::DEFAULT_MODULUS;
use hashcomb::seeds;

use crate::config::{LevelSetting, RunConfig, RunMode};
use crate::ingest::{ingest_csv, IngestReport};

/// Names of the metrics file inside the output directory.
pub const METRICS_FILE: &str = "metrics.csv";
/// Name of the manifest file inside the output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Where a finished run put its outputs, plus the in-memory metrics.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    /// Path of the written metrics CSV.
    pub metrics_path: PathBuf,
    /// Path of the written manifest JSON.
    pub manifest_path: PathBuf,
    /// The per-round metrics, as written to the CSV.
    pub metrics: Vec<RoundMetrics>,
}

/// Dataset facts recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
struct DataSummary {
    path: PathBuf,
    rows: usize,
    features: usize,
    positives: usize,
    negatives: usize,
    train_rows: usize,
    test_rows: usize,
    label_column: String,
    /// Pre-normalization column minima, in feature order.
    feature_mins: Vec<f64>,
    /// Pre-normalization column maxima, in feature order.
    feature_maxs: Vec<f64>,
}

/// Salt-free identity of the negotiated scheme.
#[derive(Debug, Clone, Serialize)]
struct SchemeSummary {
    /// Hex digest of the scheme's canonical bytes without the salt.
    fingerprint: String,
    c_min: f64,
    c_max: f64,
    delta: f64,
    max_level: u8,
    selection_p: f64,
    coordinator: u64,
}

/// Noise calibration recorded for differential-privacy runs.
#[derive(Debug, Clone, Serialize)]
struct NoiseSummary {
    sensitivity: f64,
    sigma_squared: f64,
}

/// Seed-derivation facts: one master seed, named derived streams.
#[derive(Debug, Clone, Serialize)]
struct SeedSummary {
    master: u64,
    derived_streams: Vec<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    config: RunConfig,
    seeds: SeedSummary,
    data: DataSummary,
    scheme: Option<SchemeSummary>,
    noise: Option<NoiseSummary>,
    metrics_file: String,
}

/// The negotiation inputs a run derives from its config: every node is a
/// party holding the configured parameter range.
fn negotiation_inputs(config: &RunConfig) -> (Vec<LocalRange>, NegotiationParams) {
    let [w_min, w_max] = config.weight_range;
    let ranges = vec![
        LocalRange {
            x_min: w_min,
            x_max: w_max,
        };
        config.nodes
    ];
    // An honest majority needs n ≥ 2t + 1; degenerate fleets fall back
    // to threshold 0 (shares are then plain copies, which is fine for a
    // simulation of one or two parties).
    let threshold = if config.nodes >= 3 { 1 } else { 0 };
    let params = NegotiationParams {
        threshold,
        max_level: config.max_level,
        target_mean_level: config.target_mean_level,
        delta: config.delta_margin,
        selection_p: config.bias,
        modulus: DEFAULT_MODULUS,
    };
    (ranges, params)
}

/// Runs the hyper-parameter negotiation exactly as a `fedavg_hc` run
/// would, using the config's node count, ranges, and seed.
pub fn negotiate_scheme(config: &RunConfig) -> Result<NegotiationOutcome> {
    let (ranges, params) = negotiation_inputs(config);
    let mut rng = seeds::negotiation_rng(config.seed);
    Ok(run_negotiation(&ranges, &params, &mut rng)?)
}

/// Executes a resolved config end to end and writes its artifacts.
pub fn execute(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let ingest = ingest_csv(&config.dataset, &config.label_column)?;

    let negotiation = match config.mode {
        RunMode::FedavgHc => Some(negotiate_scheme(config)?),
        _ => None,
    };

    let metrics = match config.mode {
        RunMode::Monolithic => run_monolithic(config, &ingest)?,
        RunMode::Fedavg | RunMode::FedavgHc | RunMode::FedavgDp => {
            let fed = federation_config(config);
            let scheme = negotiation.as_ref().map(|n| &n.scheme);
            run_federation(&fed, &ingest.dataset, scheme)?
        }
    };

    write_artifacts(config, &ingest, negotiation.as_ref(), metrics)
}

/// One model, the whole training split, `config.epochs` SGD updates.
///
/// Uses the same derived streams as a single-node full-fraction
/// federation round, so the two paths are bit-identical.
fn run_monolithic(config: &RunConfig, ingest: &IngestReport) -> Result<Vec<RoundMetrics>> {
    let mut split_stream = seeds::split_rng(config.seed);
    let (train_split, test_split) = ingest.dataset.split(config.train_fraction, &mut split_stream)?;
    let mut model = MlpModel::new(
        ingest.dataset.feature_dim(),
        &config.hidden_layers,
        &mut seeds::init_rng(config.seed),
    )?;
    let started = Instant::now();
    train(
        &mut model,
        &train_split,
        config.epochs,
        config.eta,
        None,
        &mut seeds::node_train_rng(config.seed, 0, 0),
    )?;
    let scores = evaluate(&model, &test_split)?;
    Ok(vec![RoundMetrics {
        round: 1,
        mode: config.mode.as_str().to_string(),
        accuracy: scores.accuracy,
        f1: scores.f1,
        wall_ms: started.elapsed().as_millis() as u64,
    }])
}

fn federation_config(config: &RunConfig) -> FederationConfig {
    FederationConfig {
        nodes: config.nodes,
        rounds: config.rounds,
        epochs_per_round: config.epochs_per_round,
        eta: config.eta,
        mode: match config.mode {
            RunMode::Fedavg => AggregationMode::Clear,
            RunMode::FedavgHc => AggregationMode::Hashed,
            RunMode::FedavgDp => AggregationMode::GaussianDp,
            RunMode::Monolithic => unreachable!("monolithic runs never build a federation"),
        },
        data_fraction: config.data_fraction,
        train_fraction: config.train_fraction,
        hidden_layers: config.hidden_layers.clone(),
        level_policy: match config.level {
            LevelSetting::Fixed(depth) => LevelPolicy::Fixed(depth),
            LevelSetting::Sampled => LevelPolicy::Sampled,
        },
        dp: config.dp.map(|dp| DpParams {
            epsilon: dp.epsilon,
            delta: dp.delta,
            sample_fraction: dp.sample_fraction,
            local_steps: dp.local_steps,
            clip: dp.clip,
            sigma_squared_override: None,
        }),
        seed: config.seed,
        resample_each_round: true,
    }
}

fn write_artifacts(
    config: &RunConfig,
    ingest: &IngestReport,
    negotiation: Option<&NegotiationOutcome>,
    metrics: Vec<RoundMetrics>,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("cannot create output directory {}", config.out_dir.display()))?;
    let metrics_path = config.out_dir.join(METRICS_FILE);
    let manifest_path = config.out_dir.join(MANIFEST_FILE);

    let mut writer = csv::Writer::from_path(&metrics_path)
        .with_context(|| format!("cannot write {}", metrics_path.display()))?;
    for row in &metrics {
        writer.serialize(row)?;
    }
    writer.flush()?;

    // Count the split exactly as the training paths do: same stream,
    // same shuffle, same rounding.
    let (train_split, test_split) = ingest
        .dataset
        .split(config.train_fraction, &mut seeds::split_rng(config.seed))?;
    let (negatives, positives) = ingest.dataset.class_counts();

    let scheme = negotiation.map(|outcome| SchemeSummary {
        fingerprint: hex::encode(outcome.scheme.fingerprint()),
        c_min: outcome.scheme.c_min(),
        c_max: outcome.scheme.c_max(),
        delta: outcome.scheme.delta(),
        max_level: outcome.scheme.max_level(),
        selection_p: outcome.scheme.selection_p(),
        coordinator: outcome.coordinator,
    });
    let noise = match (config.mode, &config.dp) {
        (RunMode::FedavgDp, Some(dp)) => Some(NoiseSummary {
            sensitivity: 4.0 * dp.local_steps * dp.clip * config.eta,
            sigma_squared: dp_sigma(
                dp.epsilon,
                dp.delta,
                dp.sample_fraction,
                dp.local_steps,
                dp.clip,
                config.eta,
            )?,
        }),
        _ => None,
    };

    let manifest = Manifest {
        config: config.clone(),
        seeds: SeedSummary {
            master: config.seed,
            derived_streams: vec![
                "init",
                "split",
                "partition",
                "train",
                "level",
                "noise",
                "negotiation",
            ],
        },
        data: DataSummary {
            path: config.dataset.clone(),
            rows: ingest.dataset.len(),
            features: ingest.dataset.feature_dim(),
            positives,
            negatives,
            train_rows: train_split.len(),
            test_rows: test_split.len(),
            label_column: ingest.label_column.clone(),
            feature_mins: ingest.feature_mins.clone(),
            feature_maxs: ingest.feature_maxs.clone(),
        },
        scheme,
        noise,
        metrics_file: METRICS_FILE.to_string(),
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    std::fs::write(&manifest_path, manifest_json)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;

    Ok(RunArtifacts {
        metrics_path,
        manifest_path,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DpConfig;

    /// Small synthetic dataset + tiny model so runs finish in
    /// milliseconds.
    fn small_config(dir: &std::path::Path, mode: RunMode) -> RunConfig {
        let dataset = dir.join("synth.csv");
        crate::synth::write_csv(&dataset, 400, 4, 0.0, 11).unwrap();
        RunConfig {
            dataset,
            mode,
            nodes: 4,
            rounds: 2,
            epochs: 300,
            epochs_per_round: 150,
            hidden_layers: vec![6, 3],
            max_level: 8,
            target_mean_level: 6.0,
            out_dir: dir.join("out"),
            dp: Some(DpConfig::default()),
            seed: 5,
            ..RunConfig::default()
        }
    }

    #[test]
    fn every_mode_produces_metrics_and_a_manifest() {
        for mode in [
            RunMode::Monolithic,
            RunMode::Fedavg,
            RunMode::FedavgHc,
            RunMode::FedavgDp,
        ] {
            let dir = tempfile::tempdir().unwrap();
            let config = small_config(dir.path(), mode);
            let artifacts = execute(&config).unwrap();
            let expected_rows = if mode == RunMode::Monolithic {
                1
            } else {
                config.rounds as usize
            };
            assert_eq!(artifacts.metrics.len(), expected_rows, "{mode}");
            assert!(artifacts.metrics_path.is_file());
            assert!(artifacts.manifest_path.is_file());
            for row in &artifacts.metrics {
                assert_eq!(row.mode, mode.as_str());
                assert!((0.0..=1.0).contains(&row.accuracy));
                assert!((0.0..=1.0).contains(&row.f1));
            }

            let manifest: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(&artifacts.manifest_path).unwrap())
                    .unwrap();
            assert_eq!(manifest["seeds"]["master"], 5);
            assert_eq!(manifest["data"]["rows"], 400);
            assert_eq!(
                manifest["scheme"].is_object(),
                mode == RunMode::FedavgHc,
                "{mode}"
            );
            assert_eq!(manifest["noise"].is_object(), mode == RunMode::FedavgDp);
        }
    }

    #[test]
    fn hashed_runs_use_the_negotiated_scheme() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), RunMode::FedavgHc);
        let artifacts = execute(&config).unwrap();

        // Re-running the negotiation standalone reproduces the same
        // scheme the run recorded.
        let outcome = negotiate_scheme(&config).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&artifacts.manifest_path).unwrap())
                .unwrap();
        assert_eq!(
            manifest["scheme"]["fingerprint"],
            hex::encode(outcome.scheme.fingerprint())
        );
        // Default range [-0.5, 0.5] widens by half its span to [-1, 1].
        assert_eq!(manifest["scheme"]["c_min"], -1.0);
        assert_eq!(manifest["scheme"]["c_max"], 1.0);
    }

    #[test]
    fn missing_dataset_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), RunMode::Fedavg);
        config.dataset = dir.path().join("absent.csv");
        let err = execute(&config).unwrap_err();
        assert!(
            err.chain()
                .all(|c| c.downcast_ref::<hashcomb::Error>().is_none()),
            "missing data must not classify as a training failure: {err:#}"
        );
    }

    #[test]
    fn runaway_learning_rate_surfaces_as_divergence() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), RunMode::Monolithic);
        config.eta = 1e200;
        let err = execute(&config).unwrap_err();
        let diverged = err.chain().any(|cause| {
            matches!(
                cause.downcast_ref::<hashcomb::Error>(),
                Some(hashcomb::Error::NonFiniteLoss { .. })
            )
        });
        assert!(diverged, "expected divergence, got: {err:#}");
    }

    #[test]
    fn metrics_csv_is_deterministic_apart_from_wall_time() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), RunMode::FedavgHc);

        config.out_dir = dir.path().join("first");
        let first = execute(&config).unwrap();
        config.out_dir = dir.path().join("second");
        let second = execute(&config).unwrap();

        assert_eq!(first.metrics.len(), second.metrics.len());
        for (a, b) in first.metrics.iter().zip(&second.metrics) {
            assert_eq!(a.round, b.round);
            assert_eq!(a.mode, b.mode);
            assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
            assert_eq!(a.f1.to_bits(), b.f1.to_bits());
        }
    }
}
