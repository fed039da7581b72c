//! Datasets of pre-embedded feature vectors: CSV ingestion, stratified
//! splitting and a synthetic Gaussian generator.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// Labeled feature vectors. Labels are dense class ids `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
}

impl Dataset {
    /// Infers the number of classes as `max(label) + 1`.
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Self::with_classes(features, labels, n_classes)
    }

    pub fn with_classes(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: features.rows(),
            });
        }
        let mut class_counts = vec![0; n_classes];
        for &l in &labels {
            if l >= n_classes {
                return Err(Error::InvalidConfig(format!(
                    "label {l} out of range for {n_classes} classes"
                )));
            }
            class_counts[l] += 1;
        }
        Ok(Self {
            features,
            labels,
            class_counts,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_counts.len()
    }

    /// Row indices of class `c`, in dataset order.
    pub fn class_indices(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c).then_some(i))
            .collect()
    }

    pub fn class_rows(&self, c: usize) -> Matrix {
        self.features.select_rows(&self.class_indices(c))
    }

    /// Rows at `indices`, keeping the class count of the parent.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::with_classes(
            self.features.select_rows(indices),
            labels,
            self.n_classes(),
        )
        .expect("subset of a valid dataset")
    }

    /// Largest class count over smallest non-empty class count.
    pub fn imbalance_ratio(&self) -> f64 {
        let nonempty = self.class_counts.iter().filter(|&&c| c > 0);
        let max = nonempty.clone().max().copied().unwrap_or(0);
        let min = nonempty.min().copied().unwrap_or(0);
        if min == 0 {
            return f64::NAN;
        }
        max as f64 / min as f64
    }
}

fn path_label(path: &Path) -> String {
    path.display().to_string()
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn parse_cell(cell: &str, path: &Path, line: u64, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            path: path_label(path),
            line,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

/// Reads a labeled CSV: a header row, one integer label column named
/// `label_column`, every other column a feature.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyInput("load_csv"));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::UnknownLabelColumn(label_column.to_string()))?;
    let width = headers.len();
    let dim = width - 1;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::RaggedRow {
                path: path_label(path),
                line,
                expected: width,
                found: record.len(),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                let label = cell.parse::<usize>().map_err(|_| Error::NonNumeric {
                    path: path_label(path),
                    line,
                    column: label_column.to_string(),
                    value: cell.to_string(),
                })?;
                labels.push(label);
            } else {
                data.push(parse_cell(cell, path, line, &headers[i])?);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("load_csv"));
    }
    Dataset::new(Matrix::from_vec(labels.len(), dim, data)?, labels)
}

/// Reads an unlabeled CSV where every column is a feature.
pub fn load_features_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers()?.clone();
    let width = headers.len();
    if width == 0 {
        return Err(Error::EmptyInput("load_features_csv"));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::RaggedRow {
                path: path_label(path),
                line,
                expected: width,
                found: record.len(),
            });
        }
        for (cell, name) in record.iter().zip(headers.iter()) {
            data.push(parse_cell(cell, path, line, name)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput("load_features_csv"));
    }
    Matrix::from_vec(rows, width, data)
}

/// Writes the dataset as CSV with feature columns `f0..f{d-1}` followed by
/// the label column. Floats use the shortest representation that parses
/// back to the identical `f64`.
pub fn write_csv<W: Write>(dataset: &Dataset, label_column: &str, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
    header.push(label_column.to_string());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(dataset.dim() + 1);
    for (row, label) in dataset.features().row_iter().zip(dataset.labels()) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(label.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Result of a stratified split. Index lists refer to rows of the source
/// dataset and are sorted.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Stratified split: class `c` contributes `round(ratio · n_c)` rows to the
/// training side, clamped so both sides keep at least one row. Rows are
/// shuffled within each class before the cut.
pub fn split(dataset: &Dataset, ratio: f64, rng: &mut Rng) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split ratio must lie strictly between 0 and 1, got {ratio}"
        )));
    }
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for c in 0..dataset.n_classes() {
        let mut idx = dataset.class_indices(c);
        let n_c = idx.len();
        if n_c < 2 {
            return Err(Error::InsufficientData {
                class: c,
                count: n_c,
                required: 2,
            });
        }
        rng.shuffle(&mut idx);
        let n_train = ((ratio * n_c as f64).round() as usize).clamp(1, n_c - 1);
        train_indices.extend_from_slice(&idx[..n_train]);
        test_indices.extend_from_slice(&idx[n_train..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(Split {
        train: dataset.subset(&train_indices),
        test: dataset.subset(&test_indices),
        train_indices,
        test_indices,
    })
}

/// One Gaussian class of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub count: usize,
    pub mean: Vec<f64>,
    pub std: f64,
}

/// Recipe for an isotropic Gaussian mixture with exact per-class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub dim: usize,
    pub classes: Vec<ClassSpec>,
    pub seed: u64,
}

impl SynthSpec {
    /// Class `c` is centred at `(sep · std / √2) · e_c`, so every pair of
    /// class means lies exactly `sep · std` apart.
    pub fn separated(counts: &[usize], dim: usize, sep: f64, std: f64, seed: u64) -> Result<Self> {
        if counts.len() > dim {
            return Err(Error::InvalidConfig(format!(
                "{} classes need at least {} dimensions, got {dim}",
                counts.len(),
                counts.len()
            )));
        }
        let offset = sep * std / std::f64::consts::SQRT_2;
        let classes = counts
            .iter()
            .enumerate()
            .map(|(c, &count)| {
                let mut mean = vec![0.0; dim];
                mean[c] = offset;
                ClassSpec { count, mean, std }
            })
            .collect();
        Ok(Self { dim, classes, seed })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if self.classes.len() < 2 {
            return Err(Error::InvalidConfig("need at least two classes".into()));
        }
        for (c, spec) in self.classes.iter().enumerate() {
            if spec.count < 2 {
                return Err(Error::InsufficientData {
                    class: c,
                    count: spec.count,
                    required: 2,
                });
            }
            if spec.mean.len() != self.dim {
                return Err(Error::dim("SynthSpec mean", self.dim, spec.mean.len()));
            }
            if !(spec.std > 0.0 && spec.std.is_finite()) || spec.mean.iter().any(|m| !m.is_finite())
            {
                return Err(Error::InvalidConfig(format!(
                    "class {c}: std must be positive and parameters finite"
                )));
            }
        }
        Ok(())
    }
}

/// Samples the mixture described by `spec`. Rows are grouped by class in
/// class order; each coordinate is `mean + std · z` with `z` standard normal.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::seed_from(spec.seed);
    let n: usize = spec.classes.iter().map(|c| c.count).sum();
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, class) in spec.classes.iter().enumerate() {
        for _ in 0..class.count {
            data.extend(class.mean.iter().map(|m| m + class.std * rng.normal()));
            labels.push(c);
        }
    }
    Dataset::with_classes(Matrix::from_vec(n, spec.dim, data)?, labels, spec.classes.len())
}
