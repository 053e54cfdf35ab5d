//! `hashcomb` — experiment harness for hash-combed federated learning.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hashcomb::privacy_analysis::{adjacent_divergence_report, DEFAULT_ALPHAS};
use hashcomb::quantization::solve_bias;
use hashcomb::secret_sharing::negotiation::{run_negotiation, LocalRange, NegotiationParams};
use hashcomb::secret_sharing::DEFAULT_MODULUS;
use hashcomb::QuantizationScheme;

use hashcomb_cli::config::{self, LevelSetting, Overrides, RunMode};
use hashcomb_cli::{runner, synth};

#[derive(Parser)]
#[command(
    name = "hashcomb",
    version,
    about = "Federated learning with hash-combed parameter exchange: run experiments, negotiate schemes, inspect privacy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment and write metrics.csv + manifest.json.
    Run(Box<RunArgs>),
    /// Solve the biased-coin probability for a target mean depth.
    SolveBias(SolveBiasArgs),
    /// Run the hyper-parameter negotiation standalone.
    Negotiate(NegotiateArgs),
    /// Rényi-divergence report for one adjacent-sample replacement.
    PrivacyReport(PrivacyReportArgs),
    /// Generate a synthetic labeled CSV dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags given alongside override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// CSV dataset path (header row required).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Name of the binary label column.
    #[arg(long)]
    label_column: Option<String>,
    /// monolithic | fedavg | fedavg_hc | fedavg_dp.
    #[arg(long)]
    mode: Option<RunMode>,
    /// Simulated node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Communication rounds.
    #[arg(long)]
    rounds: Option<u32>,
    /// Total SGD updates (monolithic mode).
    #[arg(long)]
    epochs: Option<u64>,
    /// SGD updates per node per round (federated modes).
    #[arg(long)]
    epochs_per_round: Option<u64>,
    /// SGD learning rate.
    #[arg(long)]
    eta: Option<f64>,
    /// Fraction of the training split each node draws per round.
    #[arg(long)]
    data_fraction: Option<f64>,
    /// Fraction of the dataset used for training.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Hidden-layer widths, comma-separated (e.g. 50,25,20,25,50).
    #[arg(long, value_parser = parse_layer_list)]
    hidden: Option<std::vec::Vec<usize>>,
    /// Quantization depth policy: "sampled" or "fixed:<depth>".
    #[arg(long)]
    level: Option<LevelSetting>,
    /// Maximum quantization depth L.
    #[arg(long)]
    max_level: Option<u8>,
    /// Target mean sampled depth (solved into a coin bias).
    #[arg(long)]
    target_mean: Option<f64>,
    /// Explicit coin bias p, overriding the solved value.
    #[arg(long)]
    bias: Option<f64>,
    /// Per-party parameter range as "min:max".
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    weight_range: Option<(f64, f64)>,
    /// Range-enlargement margin Δ.
    #[arg(long)]
    delta_margin: Option<f64>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics.csv and manifest.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Privacy budget ε (fedavg_dp).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Failure probability δ (fedavg_dp).
    #[arg(long)]
    delta: Option<f64>,
    /// Sampling rate q entering the noise calibration (fedavg_dp).
    #[arg(long)]
    sample_fraction: Option<f64>,
    /// Local step count Q entering the sensitivity (fedavg_dp).
    #[arg(long)]
    local_steps: Option<f64>,
    /// Per-vector gradient clip bound G (fedavg_dp).
    #[arg(long)]
    clip: Option<f64>,
}

#[derive(Args)]
struct SolveBiasArgs {
    /// Desired mean sampled depth.
    #[arg(long)]
    target: f64,
    /// Number of coin tosses L (the maximum depth).
    #[arg(long = "L", visible_alias = "levels")]
    levels: u8,
}

#[derive(Args)]
struct NegotiateArgs {
    /// Number of simulated parties; defaults to the number of ranges,
    /// or 4.
    #[arg(long)]
    parties: Option<usize>,
    /// Per-party ranges as "min:max,min:max,..."; defaults to
    /// "-0.5:0.5" for every party.
    #[arg(long, value_parser = parse_pair_list, allow_hyphen_values = true)]
    ranges: Option<std::vec::Vec<(f64, f64)>>,
    /// Sharing threshold t (any t+1 shares reconstruct); defaults to 1
    /// for three or more parties, 0 otherwise.
    #[arg(long)]
    threshold: Option<usize>,
    /// Maximum quantization depth L.
    #[arg(long, default_value_t = 16)]
    max_level: u8,
    /// Target mean sampled depth.
    #[arg(long, default_value_t = 8.0)]
    target_mean: f64,
    /// Explicit coin bias p, overriding the solved value.
    #[arg(long)]
    bias: Option<f64>,
    /// Range-enlargement margin Δ; defaults to half the global range.
    #[arg(long)]
    delta_margin: Option<f64>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full transcript (JSON) to this file.
    #[arg(long, value_name = "FILE")]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct PrivacyReportArgs {
    /// Sample values, comma-separated.
    #[arg(long, value_parser = parse_float_list, conflicts_with = "values_file", allow_hyphen_values = true)]
    values: Option<std::vec::Vec<f64>>,
    /// File with one sample value per line.
    #[arg(long, value_name = "FILE")]
    values_file: Option<PathBuf>,
    /// Index of the value the adjacent sample replaces.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Replacement value defining the adjacent sample.
    #[arg(long, allow_hyphen_values = true)]
    replacement: f64,
    /// Quantization range minimum; defaults to the smallest value seen.
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    /// Quantization range maximum; defaults to the largest value seen.
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    /// Range-enlargement margin Δ; defaults to half the range (or 0.5
    /// for a degenerate zero-width range).
    #[arg(long)]
    delta_margin: Option<f64>,
    /// Quantization depth the distributions are built at.
    #[arg(long, default_value_t = 8)]
    max_level: u8,
    /// Rényi orders to evaluate, comma-separated (all must exceed 1).
    #[arg(long, value_parser = parse_float_list)]
    alphas: Option<std::vec::Vec<f64>>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of data rows.
    #[arg(long, default_value_t = 4000)]
    rows: usize,
    /// Number of feature columns (the first two drive the label).
    #[arg(long, default_value_t = 10)]
    features: usize,
    /// Label-flip probability in [0, 0.5).
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// Generation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .with_context(|| format!("expected \"min:max\", got {s:?}"))?;
    Ok((
        lo.trim().parse().with_context(|| format!("invalid number {lo:?}"))?,
        hi.trim().parse().with_context(|| format!("invalid number {hi:?}"))?,
    ))
}

fn parse_pair_list(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',').map(parse_pair).collect()
}

fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid number {v:?}"))
        })
        .collect()
}

fn parse_layer_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid layer width {v:?}"))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests print to stdout and succeed;
            // anything else is a configuration error.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify_failure(&err))
        }
    }
}

/// Training divergence exits 2; every other failure is a config error
/// and exits 1.
fn classify_failure(err: &anyhow::Error) -> u8 {
    let diverged = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<hashcomb::Error>(),
            Some(hashcomb::Error::NonFiniteLoss { .. })
        )
    });
    if diverged {
        2
    } else {
        1
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(*args),
        Command::SolveBias(args) => {
            let p = solve_bias(args.target, args.levels)?;
            println!("{p}");
            Ok(())
        }
        Command::Negotiate(args) => negotiate(args),
        Command::PrivacyReport(args) => privacy_report(args),
        Command::Synth(args) => {
            synth::write_csv(&args.out, args.rows, args.features, args.noise, args.seed)?;
            println!(
                "wrote {} ({} rows, {} features, noise {})",
                args.out.display(),
                args.rows,
                args.features,
                args.noise
            );
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let overrides = Overrides {
        dataset: args.dataset,
        label_column: args.label_column,
        mode: args.mode,
        nodes: args.nodes,
        rounds: args.rounds,
        epochs: args.epochs,
        epochs_per_round: args.epochs_per_round,
        eta: args.eta,
        data_fraction: args.data_fraction,
        train_fraction: args.train_fraction,
        hidden_layers: args.hidden,
        level: args.level,
        max_level: args.max_level,
        target_mean_level: args.target_mean,
        bias: args.bias,
        weight_range: args.weight_range.map(|(lo, hi)| [lo, hi]),
        delta_margin: args.delta_margin,
        seed: args.seed,
        out_dir: args.out_dir,
        epsilon: args.epsilon,
        delta: args.delta,
        sample_fraction: args.sample_fraction,
        local_steps: args.local_steps,
        clip: args.clip,
    };
    let config = config::resolve(args.config.as_deref(), &overrides)?;
    let artifacts = runner::execute(&config)?;

    let best = artifacts
        .metrics
        .iter()
        .max_by(|a, b| a.f1.total_cmp(&b.f1))
        .expect("runs always produce at least one round");
    let last = artifacts.metrics.last().expect("non-empty metrics");
    println!(
        "wrote {} ({} rows) and {}",
        artifacts.metrics_path.display(),
        artifacts.metrics.len(),
        artifacts.manifest_path.display()
    );
    println!(
        "final: accuracy {:.4} f1 {:.4} | best f1 {:.4} at round {}",
        last.accuracy, last.f1, best.f1, best.round
    );
    Ok(())
}

/// Everything the negotiate subcommand writes: the outcome summary plus
/// the full message transcript. The negotiated salt is deliberately not
/// part of this.
#[derive(Serialize)]
struct NegotiationDump<'a> {
    parties: usize,
    threshold: usize,
    coordinator: u64,
    fingerprint: String,
    c_min: f64,
    c_max: f64,
    delta: f64,
    max_level: u8,
    selection_p: f64,
    phases: Vec<hashcomb::secret_sharing::negotiation::Phase>,
    transcript: &'a hashcomb::secret_sharing::negotiation::Transcript,
}

fn negotiate(args: NegotiateArgs) -> Result<()> {
    let ranges: Vec<LocalRange> = match args.ranges {
        Some(pairs) => {
            if let Some(parties) = args.parties {
                if pairs.len() != parties {
                    bail!(
                        "--parties says {parties} but --ranges lists {} ranges",
                        pairs.len()
                    );
                }
            }
            pairs
                .into_iter()
                .map(|(x_min, x_max)| LocalRange { x_min, x_max })
                .collect()
        }
        None => vec![
            LocalRange {
                x_min: -0.5,
                x_max: 0.5,
            };
            args.parties.unwrap_or(4)
        ],
    };
    let threshold = args
        .threshold
        .unwrap_or(if ranges.len() >= 3 { 1 } else { 0 });
    let params = NegotiationParams {
        threshold,
        max_level: args.max_level,
        target_mean_level: args.target_mean,
        delta: args.delta_margin,
        selection_p: args.bias,
        modulus: DEFAULT_MODULUS,
    };
    let mut rng = hashcomb::seeds::negotiation_rng(args.seed);
    let outcome = run_negotiation(&ranges, &params, &mut rng)?;

    let scheme = &outcome.scheme;
    println!("parties:     {}", ranges.len());
    println!("threshold:   {threshold}");
    println!("coordinator: party {}", outcome.coordinator);
    println!(
        "scheme:      range [{}, {}], delta {}, max level {}, bias {}",
        scheme.c_min(),
        scheme.c_max(),
        scheme.delta(),
        scheme.max_level(),
        scheme.selection_p()
    );
    println!("fingerprint: {}", hex::encode(scheme.fingerprint()));
    println!(
        "transcript:  {} messages across {} phases",
        outcome.transcript.len(),
        outcome.transcript.phases_in_order().len()
    );

    if let Some(path) = args.transcript {
        let dump = NegotiationDump {
            parties: ranges.len(),
            threshold,
            coordinator: outcome.coordinator,
            fingerprint: hex::encode(scheme.fingerprint()),
            c_min: scheme.c_min(),
            c_max: scheme.c_max(),
            delta: scheme.delta(),
            max_level: scheme.max_level(),
            selection_p: scheme.selection_p(),
            phases: outcome.transcript.phases_in_order(),
            transcript: &outcome.transcript,
        };
        let mut json = serde_json::to_string_pretty(&dump)?;
        json.push('\n');
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(&path, json)
            .with_context(|| format!("cannot write transcript to {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn read_values_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read values from {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(|line| {
            line.parse::<f64>()
                .with_context(|| format!("invalid number {line:?} in {}", path.display()))
        })
        .collect()
}

fn privacy_report(args: PrivacyReportArgs) -> Result<()> {
    let values = match (args.values, &args.values_file) {
        (Some(values), _) => values,
        (None, Some(path)) => read_values_file(path)?,
        (None, None) => bail!("provide the sample via --values or --values-file"),
    };
    if values.is_empty() {
        bail!("the sample is empty");
    }

    let observed_min = values
        .iter()
        .chain(std::iter::once(&args.replacement))
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let observed_max = values
        .iter()
        .chain(std::iter::once(&args.replacement))
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let x_min = args.x_min.unwrap_or(observed_min);
    let x_max = args.x_max.unwrap_or(observed_max);
    let margin = args.delta_margin.unwrap_or_else(|| {
        let span = x_max - x_min;
        if span > 0.0 {
            span / 2.0
        } else {
            0.5
        }
    });
    // Only the channel geometry matters for the report; the bias and
    // salt fields of the scheme are inert here.
    let scheme = QuantizationScheme::new(x_min, x_max, margin, args.max_level, 0.5, [0u8; 16])?;

    let alphas = args.alphas.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let report =
        adjacent_divergence_report(&values, args.index, args.replacement, &scheme, &alphas)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    match args.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&path, json)
                .with_context(|| format!("cannot write report to {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}
