//! Synthetic binary-classification data for offline runs and tests.
//!
//! Rows are uniform points in the unit hypercube; the label tests a fixed
//! linear rule on the first two features (`0.8·f1 + 0.6·f2 > 0.7`, which
//! splits the square into equal halves), optionally flipped with a small
//! noise probability. Remaining features are pure distractors, so a model
//! must learn to ignore them. Output is deterministic in the seed.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;

/// Number of rows below which a balanced draw is not statistically safe.
const MIN_ROWS: usize = 10;

/// Generates a headered CSV (`f1..fN,label`) of `rows` labeled points.
pub fn generate_csv(rows: usize, features: usize, noise: f64, seed: u64) -> Result<String> {
    if rows < MIN_ROWS {
        bail!("synthetic datasets need at least {MIN_ROWS} rows, got {rows}");
    }
    if features < 2 {
        bail!("the labeling rule reads two features, got {features}");
    }
    if !(0.0..0.5).contains(&noise) {
        bail!("label noise must lie in [0, 0.5), got {noise}");
    }

    let mut rng = hashcomb::seeds::derived_rng(seed, "synthetic-data", 0, 0);
    let mut out = String::new();
    for i in 1..=features {
        if i > 1 {
            out.push(',');
        }
        let _ = write!(out, "f{i}");
    }
    out.push_str(",label\n");

    let mut positives = 0usize;
    for _ in 0..rows {
        let point: Vec<f64> = (0..features).map(|_| rng.gen::<f64>()).collect();
        let mut label = u8::from(0.8 * point[0] + 0.6 * point[1] > 0.7);
        if noise > 0.0 && rng.gen_bool(noise) {
            label ^= 1;
        }
        positives += usize::from(label);
        for value in &point {
            let _ = write!(out, "{value},");
        }
        let _ = writeln!(out, "{label}");
    }
    if positives == 0 || positives == rows {
        bail!(
            "the draw came out single-class ({positives}/{rows} positive); use more rows or another seed"
        );
    }
    Ok(out)
}

/// Writes [`generate_csv`] output to `path`, creating parent directories.
pub fn write_csv(path: &Path, rows: usize, features: usize, noise: f64, seed: u64) -> Result<()> {
    let content = generate_csv(rows, features, noise, seed)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    std::fs::write(path, content)
        .with_context(|| format!("cannot write synthetic dataset to {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let a = generate_csv(200, 5, 0.02, 9).unwrap();
        let b = generate_csv(200, 5, 0.02, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_csv(200, 5, 0.02, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_ingests_cleanly_and_is_roughly_balanced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        write_csv(&path, 1000, 6, 0.0, 3).unwrap();
        let report = crate::ingest::ingest_csv(&path, "label").unwrap();
        assert_eq!(report.dataset.len(), 1000);
        assert_eq!(report.dataset.feature_dim(), 6);
        let (neg, pos) = report.dataset.class_counts();
        // The rule halves the unit square; 1000 draws stay within ~5σ.
        assert!((400..=600).contains(&pos), "{pos} positive / {neg} negative");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(generate_csv(5, 4, 0.0, 0).is_err());
        assert!(generate_csv(100, 1, 0.0, 0).is_err());
        assert!(generate_csv(100, 4, 0.5, 0).is_err());
    }
}
