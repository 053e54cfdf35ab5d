//! CSV dataset ingestion with column-wise min-max normalization.
//!
//! Input files need a header row; every non-label column is treated as a
//! numeric feature and rescaled to `[0, 1]` by its own column minimum and
//! maximum. The pre-normalization bounds are kept so the run manifest can
//! record exactly how the data was transformed.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hashcomb::ml_core::Dataset;

/// An ingested dataset plus the normalization it went through.
#[derive(Debug, Clone)]
pub struct IngestReport {
    /// Normalized, validated dataset.
    pub dataset: Dataset,
    /// Per-feature column minima before normalization.
    pub feature_mins: Vec<f64>,
    /// Per-feature column maxima before normalization.
    pub feature_maxs: Vec<f64>,
    /// Name of the column the labels came from.
    pub label_column: String,
}

/// Reads `path` as a headered CSV, min-max normalizes every feature
/// column, and validates the labels.
///
/// Errors on non-numeric cells, a missing label column, and single-class
/// label columns. A constant feature column (zero width) normalizes to
/// all zeros.
pub fn ingest_csv(path: &Path, label_column: &str) -> Result<IngestReport> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open dataset {}", path.display()))?;

    let headers = reader
        .headers()
        .with_context(|| format!("cannot read the header row of {}", path.display()))?
        .clone();
    let label_index = headers
        .iter()
        .position(|name| name == label_column)
        .with_context(|| {
            format!(
                "dataset {} has no column named {label_column:?} (columns: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            )
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_index)
        .map(|(_, name)| name.to_string())
        .collect();
    if feature_names.is_empty() {
        bail!("dataset {} has no feature columns", path.display());
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (row_number, record) in reader.records().enumerate() {
        let record = record
            .with_context(|| format!("malformed CSV record in {}", path.display()))?;
        if record.len() != headers.len() {
            bail!(
                "row {} of {} has {} fields, header has {}",
                row_number + 2,
                path.display(),
                record.len(),
                headers.len()
            );
        }
        let mut features = Vec::with_capacity(feature_names.len());
        for (column, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().with_context(|| {
                format!(
                    "non-numeric cell {:?} at row {}, column {:?} of {}",
                    cell,
                    row_number + 2,
                    &headers[column],
                    path.display()
                )
            })?;
            if !value.is_finite() {
                bail!(
                    "non-finite cell {value} at row {}, column {:?} of {}",
                    row_number + 2,
                    &headers[column],
                    path.display()
                );
            }
            if column == label_index {
                if value != 0.0 && value != 1.0 {
                    bail!(
                        "label {value} at row {} of {} is not binary (expected 0 or 1)",
                        row_number + 2,
                        path.display()
                    );
                }
                labels.push(value);
            } else {
                features.push(value);
            }
        }
        rows.push(features);
    }
    if rows.is_empty() {
        bail!("dataset {} has a header but no data rows", path.display());
    }

    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == labels.len() {
        bail!(
            "dataset {} is single-class ({} of {} rows positive); a binary task needs both classes",
            path.display(),
            positives,
            labels.len()
        );
    }

    let columns = feature_names.len();
    let mut mins = vec![f64::INFINITY; columns];
    let mut maxs = vec![f64::NEG_INFINITY; columns];
    for row in &rows {
        for (j, &value) in row.iter().enumerate() {
            mins[j] = mins[j].min(value);
            maxs[j] = maxs[j].max(value);
        }
    }
    for row in &mut rows {
        for (j, value) in row.iter_mut().enumerate() {
            let width = maxs[j] - mins[j];
            // A constant column carries no information; pin it to zero
            // instead of dividing by its zero width.
            *value = if width == 0.0 {
                0.0
            } else {
                (*value - mins[j]) / width
            };
        }
    }

    let dataset = Dataset::new(rows, labels, feature_names)?;
    Ok(IngestReport {
        dataset,
        feature_mins: mins,
        feature_maxs: maxs,
        label_column: label_column.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file.flush().unwrap();
        file
    }

    #[test]
    fn min_max_normalization_hits_the_endpoints() {
        let file = write_csv("a,b,label\n0,5,0\n10,7,1\n");
        let report = ingest_csv(file.path(), "label").unwrap();
        assert_eq!(report.dataset.row(0), &[0.0, 0.0]);
        assert_eq!(report.dataset.row(1), &[1.0, 1.0]);
        assert_eq!(report.feature_mins, vec![0.0, 5.0]);
        assert_eq!(report.feature_maxs, vec![10.0, 7.0]);
        assert_eq!(report.dataset.feature_names(), &["a", "b"]);
    }

    #[test]
    fn interior_values_scale_linearly() {
        let file = write_csv("x,label\n0,0\n5,1\n20,0\n");
        let report = ingest_csv(file.path(), "label").unwrap();
        assert_eq!(report.dataset.row(1), &[0.25]);
    }

    #[test]
    fn constant_columns_become_zeros() {
        let file = write_csv("a,b,label\n3,1,0\n3,2,1\n3,3,1\n");
        let report = ingest_csv(file.path(), "label").unwrap();
        for i in 0..3 {
            assert_eq!(report.dataset.row(i)[0], 0.0);
        }
        assert_eq!(report.feature_mins[0], 3.0);
        assert_eq!(report.feature_maxs[0], 3.0);
    }

    #[test]
    fn label_column_position_does_not_matter() {
        let head = write_csv("label,a\n0,1\n1,9\n");
        let report = ingest_csv(head.path(), "label").unwrap();
        assert_eq!(report.dataset.labels(), &[0.0, 1.0]);
        assert_eq!(report.dataset.row(1), &[1.0]);
    }

    #[test]
    fn non_numeric_cells_are_rejected() {
        let file = write_csv("a,label\n1,0\nbanana,1\n");
        let err = ingest_csv(file.path(), "label").unwrap_err();
        assert!(err.to_string().contains("banana"), "{err:#}");
    }

    #[test]
    fn missing_label_column_is_rejected() {
        let file = write_csv("a,b\n1,0\n2,1\n");
        let err = ingest_csv(file.path(), "label").unwrap_err();
        assert!(err.to_string().contains("no column named"), "{err:#}");
    }

    #[test]
    fn non_binary_labels_are_rejected() {
        let file = write_csv("a,label\n1,0\n2,2\n");
        assert!(ingest_csv(file.path(), "label").is_err());
    }

    #[test]
    fn single_class_data_is_rejected() {
        let file = write_csv("a,label\n1,1\n2,1\n");
        let err = ingest_csv(file.path(), "label").unwrap_err();
        assert!(err.to_string().contains("single-class"), "{err:#}");
    }

    #[test]
    fn ragged_and_empty_files_are_rejected() {
        let ragged = write_csv("a,b,label\n1,2,0\n1,1\n");
        assert!(ingest_csv(ragged.path(), "label").is_err());
        let empty = write_csv("a,label\n");
        assert!(ingest_csv(empty.path(), "label").is_err());
        assert!(ingest_csv(Path::new("/nonexistent/nope.csv"), "label").is_err());
    }
}
