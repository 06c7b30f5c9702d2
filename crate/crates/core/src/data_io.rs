//! Datasets, the train/test split, and the on-disk formats.
//!
//! All randomness goes through `ChaCha8Rng::seed_from_u64(seed)` from
//! `rand_chacha` 0.9; shuffles use `rand` 0.9's `SliceRandom::shuffle`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabelMatrix, PredictionTensor, TrainReport};

/// Name of the class column in dataset CSV files.
pub const LABEL_COLUMN: &str = "label";

/// Labelled feature matrix, row-major `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = feature_names.len();
        if features.len() != labels.len() * d {
            return Err(Error::DimensionMismatch {
                what: "feature matrix size n*d",
                expected: labels.len() * d,
                found: features.len(),
            });
        }
        if let Some(&c) = labels.iter().find(|&&c| c >= class_names.len()) {
            return Err(Error::DimensionMismatch {
                what: "class label",
                expected: class_names.len(),
                found: c,
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "features",
                index: format!("({}, {})", pos / d.max(1), pos % d.max(1)),
                value: features[pos],
            });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d()..(i + 1) * self.d()]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Rows `rows`, in that order; class names are kept even if a class
    /// no longer occurs.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(rows.len() * self.d());
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Self::new(
            features,
            rows.iter().map(|&r| self.labels[r]).collect(),
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }
}

/// Reads a headered CSV: the `label` column holds class names (indexed in
/// order of first appearance), every other column is a numeric feature.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Csv {
            row: 1,
            column: 0,
            message: "empty file".into(),
        });
    }
    let label_col = header
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| Error::Csv {
            row: 1,
            column: 0,
            message: format!("no `{LABEL_COLUMN}` column in header"),
        })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_col)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| csv_error(&e, line))?;
        for (col, cell) in record.iter().enumerate() {
            if col == label_col {
                let idx = match class_names.iter().position(|c| c == cell) {
                    Some(i) => i,
                    None => {
                        class_names.push(cell.to_string());
                        class_names.len() - 1
                    }
                };
                labels.push(idx);
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                    row: line,
                    column: col + 1,
                    message: format!("non-numeric feature cell {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row: line,
                        column: col + 1,
                        message: format!("non-finite feature cell {cell:?}"),
                    });
                }
                features.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Csv {
            row: 2,
            column: 0,
            message: "no data rows".into(),
        });
    }
    Dataset::new(features, labels, feature_names, class_names)
}

fn csv_error(e: &csv::Error, fallback_line: usize) -> Error {
    let row = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    let column = match e.kind() {
        csv::ErrorKind::UnequalLengths { len, .. } => *len as usize,
        _ => 0,
    };
    Error::Csv {
        row,
        column,
        message: e.to_string(),
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file))
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Format {
        line: 0,
        message: e.to_string(),
    };
    let mut header = ds.feature_names.clone();
    header.push(LABEL_COLUMN.to_string());
    w.write_record(&header).map_err(to_err)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| fmt_f64(*v)).collect();
        rec.push(ds.class_names[ds.labels[i]].clone());
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Format {
        line: 0,
        message: e.to_string(),
    })
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, BufWriter::new(file))
}

/// Number of test rows for a split: `round(test_fraction * n)`.
pub fn test_count(n: usize, test_fraction: f64) -> usize {
    (test_fraction * n as f64).round() as usize
}

/// Shuffled `(train, test)` row indices.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let test = test_count(n, test_fraction);
    if test == 0 || test >= n {
        return Err(Error::EmptySplit { n, test });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_rows = perm.split_off(n - test);
    Ok((perm, test_rows))
}

pub fn split_train_test(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.n(), test_fraction, seed)?;
    Ok((ds.select(&train)?, ds.select(&test)?))
}

pub fn one_hot(ds: &Dataset) -> LabelMatrix {
    LabelMatrix::from_indices(ds.n_classes(), &ds.labels).expect("dataset labels are in range")
}

/// Two Gaussian-feature classes split by a random hyperplane, with a
/// `noise` fraction of labels flipped.
pub fn synthetic_noisy_binary(n: usize, d: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Config(format!(
            "noise must lie in [0, 1], got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let normal_dir: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let side: f64 = row.iter().zip(&normal_dir).map(|(a, b)| a * b).sum();
        let mut y = usize::from(side > 0.0);
        if rng.random::<f64>() < noise {
            y = 1 - y;
        }
        features.extend(row);
        labels.push(y);
    }
    Dataset::new(
        features,
        labels,
        (0..d).map(|j| format!("x{j}")).collect(),
        vec!["neg".into(), "pos".into()],
    )
}

/// Random probability-valued tensor with uniform random labels.
pub fn synthetic_tensor(
    n: usize,
    c: usize,
    m: usize,
    seed: u64,
) -> Result<(PredictionTensor, LabelMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * c * m];
    for i in 0..n {
        let block = &mut values[i * c * m..(i + 1) * c * m];
        for k in 0..m {
            let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            for (j, r) in raw.iter().enumerate() {
                block[j * m + k] = r / total;
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    Ok((
        PredictionTensor::new(n, c, m, values)?,
        LabelMatrix::from_indices(c, &labels)?,
    ))
}

pub const TENSOR_LAYOUT: &str = "icm-row-major";
pub const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorHeader {
    n: usize,
    c: usize,
    m: usize,
    layout: String,
    version: u32,
}

/// Shortest decimal text that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Tensor text format: a JSON header line
/// `{"n":..,"c":..,"m":..,"layout":"icm-row-major","version":1}` followed by
/// one line per instance holding its `c * m` scores (class-major,
/// learner-minor), space separated.
pub fn write_tensor<W: Write>(g: &PredictionTensor, mut writer: W) -> std::io::Result<()> {
    let header = TensorHeader {
        n: g.n(),
        c: g.c(),
        m: g.m(),
        layout: TENSOR_LAYOUT.into(),
        version: TENSOR_VERSION,
    };
    writeln!(
        writer,
        "{}",
        serde_json::to_string(&header).map_err(std::io::Error::other)?
    )?;
    for i in 0..g.n() {
        let line: Vec<String> = g.instance(i).iter().map(|v| fmt_f64(*v)).collect();
        writeln!(writer, "{}", line.join(" "))?;
    }
    writer.flush()
}

pub fn read_tensor<R: BufRead>(reader: R) -> Result<PredictionTensor> {
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(line) => line.map_err(|e| Error::Format {
            line: 1,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Format {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let header: TensorHeader = serde_json::from_str(&header_line).map_err(|e| Error::Format {
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    if header.layout != TENSOR_LAYOUT || header.version != TENSOR_VERSION {
        return Err(Error::Format {
            line: 1,
            message: format!(
                "unsupported layout {:?} version {}",
                header.layout, header.version
            ),
        });
    }
    let block = header
        .c
        .checked_mul(header.m)
        .ok_or_else(|| Error::Format {
            line: 1,
            message: "header dimensions overflow".into(),
        })?;
    let total = block.checked_mul(header.n).ok_or_else(|| Error::Format {
        line: 1,
        message: "header dimensions overflow".into(),
    })?;

    let mut values = Vec::with_capacity(total.min(1 << 20));
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::Format {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if rows == header.n {
            return Err(Error::DimensionMismatch {
                what: "instance lines",
                expected: header.n,
                found: rows + 1,
            });
        }
        let before = values.len();
        for tok in line.split_ascii_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Format {
                line: lineno,
                message: format!("cannot parse {tok:?} as a number"),
            })?;
            values.push(v);
            if values.len() - before > block {
                break;
            }
        }
        if values.len() - before != block {
            return Err(Error::DimensionMismatch {
                what: "values per instance line",
                expected: block,
                found: values.len() - before,
            });
        }
        rows += 1;
    }
    if rows != header.n {
        return Err(Error::DimensionMismatch {
            what: "instance lines",
            expected: header.n,
            found: rows,
        });
    }
    PredictionTensor::new(header.n, header.c, header.m, values)
}

pub fn save_tensor(g: &PredictionTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensor(g, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<PredictionTensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(BufReader::new(file))
}

/// Reports are pretty-printed JSON with fields in declaration order.
pub fn write_report<W: Write>(r: &TrainReport, mut writer: W) -> Result<()> {
    r.validate()?;
    serde_json::to_writer_pretty(&mut writer, r).map_err(|e| Error::Format {
        line: 0,
        message: e.to_string(),
    })?;
    writeln!(writer)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::Format {
            line: 0,
            message: e.to_string(),
        })
}

pub fn read_report<R: Read>(reader: R) -> Result<TrainReport> {
    let r: TrainReport = serde_json::from_reader(reader).map_err(|e| Error::Format {
        line: e.line(),
        message: e.to_string(),
    })?;
    r.validate()?;
    Ok(r)
}

pub fn save_report(r: &TrainReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_report(r, BufWriter::new(file))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<TrainReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_report(BufReader::new(file))
}
