//! CSV datasets with declared column roles and train/test splits.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("split mismatch: {0}")]
    Split(String),
}

/// Which rows are held out.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SplitSpec {
    /// Every row is training data.
    #[default]
    All,
    /// A column holding `train` or `test`.
    Column { column: String },
    /// A JSON split file; see [`SplitFile`].
    File { path: PathBuf },
}

/// Rows whose `column` value falls in any closed test interval are held out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub column: String,
    pub test_intervals: Vec<[f64; 2]>,
    pub expected_train: Option<usize>,
    pub expected_test: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub inputs: Vec<String>,
    pub target: String,
    #[serde(default)]
    pub split: SplitSpec,
}

impl DatasetSpec {
    /// Resolve relative paths against `base`.
    pub fn resolved(&self, base: &Path) -> DatasetSpec {
        let mut s = self.clone();
        s.path = base.join(&self.path);
        if let SplitSpec::File { path } = &self.split {
            s.split = SplitSpec::File { path: base.join(path) };
        }
        s
    }
}

/// Per-dimension affine map `z = (x − mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fit on `rows`; a zero spread keeps scale 1 so the map stays invertible.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|k| {
                let v = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Standardizer { mean: vec![0.0; d], scale: vec![1.0; d] }
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn destandardize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| v * s + m).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Raw inputs, one row per record.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Fitted on the training rows.
    pub x_stats: Standardizer,
    pub input_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.input_names.len()
    }

    pub fn rows(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
        (idx.iter().map(|&i| self.x[i].clone()).collect(), idx.iter().map(|&i| self.y[i]).collect())
    }

    pub fn standardized_rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.x_stats.standardize(&self.x[i])).collect()
    }
}

fn io_err(path: &Path, e: impl ToString) -> DataError {
    DataError::Io { path: path.to_path_buf(), message: e.to_string() }
}

pub fn read_split_file(path: &Path) -> Result<SplitFile, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| DataError::Parse { path: path.to_path_buf(), line: e.line() as u64, message: e.to_string() })
}

pub fn load_csv_dataset(spec: &DatasetSpec) -> Result<Dataset, DataError> {
    let path = spec.path.as_path();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| io_err(path, e))?;
    let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::SchemaMismatch(format!("column `{name}` not found in {}", path.display())))
    };
    let in_cols = spec.inputs.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
    if in_cols.is_empty() {
        return Err(DataError::SchemaMismatch("no input columns declared".into()));
    }
    let t_col = col(&spec.target)?;
    let split_file = match &spec.split {
        SplitSpec::File { path } => Some(read_split_file(path)?),
        _ => None,
    };
    let split_col = match (&spec.split, &split_file) {
        (SplitSpec::Column { column }, _) => Some(col(column)?),
        (_, Some(f)) => Some(col(&f.column)?),
        _ => None,
    };

    let (mut x, mut y, mut train, mut test) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |c: usize| -> Result<f64, DataError> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column `{}`: cannot parse `{s}` as a finite number", &headers[c]),
            })
        };
        let row = in_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?;
        let target = num(t_col)?;
        let is_test = match (&spec.split, &split_file, split_col) {
            (SplitSpec::Column { .. }, _, Some(c)) => match rec.get(c).unwrap_or("") {
                "train" => false,
                "test" => true,
                other => {
                    return Err(DataError::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("split value `{other}` is neither train nor test"),
                    })
                }
            },
            (_, Some(f), Some(c)) => {
                let v = num(c)?;
                f.test_intervals.iter().any(|[a, b]| v >= *a && v <= *b)
            }
            _ => false,
        };
        let i = x.len();
        if is_test {
            test.push(i);
        } else {
            train.push(i);
        }
        x.push(row);
        y.push(target);
    }
    if let Some(f) = &split_file {
        for (what, want, got) in [("train", f.expected_train, train.len()), ("test", f.expected_test, test.len())] {
            if let Some(w) = want {
                if w != got {
                    return Err(DataError::Split(format!("split file declares {w} {what} rows, data has {got}")));
                }
            }
        }
    }
    if train.is_empty() {
        return Err(DataError::Split("no training rows".into()));
    }
    let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    Ok(Dataset {
        x_stats: Standardizer::fit(&train_rows),
        x,
        y,
        train,
        test,
        input_names: spec.inputs.clone(),
        target_name: spec.target.clone(),
    })
}
