//! Dataset ingestion and preprocessing.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::Dataset;

/// Environment variable overriding the directory the wine CSVs are read from.
pub const DATA_DIR_ENV: &str = "ASAP_DATA_DIR";

pub const WINE_RED_FILE: &str = "winequality-red.csv";
pub const WINE_WHITE_FILE: &str = "winequality-white.csv";

/// `$ASAP_DATA_DIR`, or the `data/` directory at the workspace root.
pub fn default_data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Reads a wine-quality CSV: one header row, feature columns, and the label
/// (`quality`) last. The delimiter is `;` as distributed by UCI, or `,`;
/// whichever appears in the header wins.
pub fn load_wine_csv(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
    if bytes[..header_end].iter().all(u8::is_ascii_whitespace) {
        return Err(Error::Parse { line: 1, message: format!("{} has no header row", path.display()) });
    }
    let delimiter = if bytes[..header_end].contains(&b';') { b';' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let columns = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.len();
    if columns < 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected features and a label, found {columns} column(s)"),
        });
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != columns {
            return Err(Error::Parse { line, message: format!("expected {columns} columns, found {}", record.len()) });
        }
        let mut values = Vec::with_capacity(columns);
        for field in record.iter() {
            let v: f64 =
                field.parse().map_err(|_| Error::Parse { line, message: format!("`{field}` is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite value `{field}`") });
            }
            values.push(v);
        }
        labels.push(values.pop().expect("columns ≥ 2"));
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset(format!("{} contains no data rows", path.display())));
    }
    Dataset::new(rows, labels)
}

/// Shifts and scales every feature column to mean 0 and sample standard
/// deviation 1; constant columns become zeros. Labels are mean-centered when
/// `center_labels` is set and left untouched otherwise.
pub fn standardize(ds: &Dataset, center_labels: bool) -> Result<Dataset> {
    let (n, d) = (ds.n(), ds.d());
    if n < 2 {
        return Err(Error::InvalidDataset("standardization needs at least two rows".into()));
    }
    let mut features = ds.features().to_vec();
    for j in 0..d {
        let mean = (0..n).map(|i| features[i * d + j]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (features[i * d + j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let constant = sd <= 1e-12 * mean.abs().max(1.0);
        for i in 0..n {
            let v = &mut features[i * d + j];
            *v = if constant { 0.0 } else { (*v - mean) / sd };
        }
    }
    let mut labels = ds.labels().to_vec();
    if center_labels {
        let mean = labels.iter().sum::<f64>() / n as f64;
        labels.iter_mut().for_each(|y| *y -= mean);
    }
    Dataset::from_row_major(n, d, features, labels)
}

/// Gaussian design `x_i ~ N(0, I)` and labels `x_iᵀθ + noise·N(0, 1)` with a
/// ground truth `θ ~ N(0, I)`, all drawn from `seed`.
pub fn synthetic_ridge(n: usize, d: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::param("n, d", "must be ≥ 1"));
    }
    let mut rng = rng::stream(seed);
    let truth: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let z: f64 = rng.sample(StandardNormal);
        labels.push(crate::linalg::dot(&x, &truth) + noise * z);
        features.extend(x);
    }
    Dataset::from_row_major(n, d, features, labels)
}
