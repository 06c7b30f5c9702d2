//! Shared data model: prediction tensors, labels, weights and configuration.
//!
//! Every type here is immutable once built. Constructors check shape; the
//! full set of value invariants for a tensor/label pair is checked by
//! [`validate_pair`], which every consumer calls before doing arithmetic.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the simplex sum and the sphere norm.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Scores of every learner for every class on every instance.
///
/// Stored instance-major: entry `(i, j, k)` lives at `(i * c + j) * m + k`,
/// so the `c x m` matrix of instance `i` is one contiguous row-major block.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTensor {
    n: usize,
    c: usize,
    m: usize,
    values: Vec<f64>,
}

impl PredictionTensor {
    pub fn new(n: usize, c: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if c < 2 {
            return Err(Error::DimensionMismatch {
                what: "class count (must be at least 2)",
                expected: 2,
                found: c,
            });
        }
        if m == 0 {
            return Err(Error::DimensionMismatch {
                what: "learner count (must be at least 1)",
                expected: 1,
                found: 0,
            });
        }
        if values.len() != n * c * m {
            return Err(Error::DimensionMismatch {
                what: "tensor value count n*c*m",
                expected: n * c * m,
                found: values.len(),
            });
        }
        Ok(Self { n, c, m, values })
    }

    /// Builds a tensor from `f(i, j, k)`.
    pub fn from_fn(
        n: usize,
        c: usize,
        m: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n * c * m);
        for i in 0..n {
            for j in 0..c {
                for k in 0..m {
                    values.push(f(i, j, k));
                }
            }
        }
        Self::new(n, c, m, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.c + j) * self.m + k]
    }

    /// The `c x m` row-major score matrix of instance `i`.
    #[inline]
    pub fn instance(&self, i: usize) -> &[f64] {
        let block = self.c * self.m;
        &self.values[i * block..(i + 1) * block]
    }

    /// Largest absolute score, used as the bound `M_g` on learner outputs.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Keeps only the instances listed in `rows`, in that order.
    pub fn select_instances(&self, rows: &[usize]) -> Result<Self> {
        let block = self.c * self.m;
        let mut values = Vec::with_capacity(rows.len() * block);
        for &i in rows {
            values.extend_from_slice(self.instance(i));
        }
        Self::new(rows.len(), self.c, self.m, values)
    }
}

/// One-hot labels, logically a `c x n` matrix indexed `(j, i)`.
///
/// Stored one instance column at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    c: usize,
    n: usize,
    values: Vec<f64>,
}

impl LabelMatrix {
    /// `values` holds the columns back to back: entry `(j, i)` is `values[i * c + j]`.
    pub fn from_columns(c: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != c * n {
            return Err(Error::DimensionMismatch {
                what: "label value count c*n",
                expected: c * n,
                found: values.len(),
            });
        }
        Ok(Self { c, n, values })
    }

    pub fn from_indices(c: usize, labels: &[usize]) -> Result<Self> {
        let mut values = vec![0.0; c * labels.len()];
        for (i, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(Error::DimensionMismatch {
                    what: "class index",
                    expected: c,
                    found: y,
                });
            }
            values[i * c + y] = 1.0;
        }
        Self::from_columns(c, labels.len(), values)
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[i * self.c + j]
    }

    /// Label vector `Y_i` of instance `i`.
    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.values[i * self.c..(i + 1) * self.c]
    }

    /// Index of the hot entry of column `i` (first maximum for malformed columns).
    pub fn class_of(&self, i: usize) -> usize {
        crate::margin::argmax(self.column(i))
    }

    pub fn class_indices(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.class_of(i)).collect()
    }

    pub fn select_instances(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.c);
        for &i in rows {
            values.extend_from_slice(self.column(i));
        }
        Self::from_columns(self.c, rows.len(), values)
    }
}

/// Checks every invariant of a tensor and its labels, reporting the first
/// violation with its index.
pub fn validate_pair(g: &PredictionTensor, y: &LabelMatrix) -> Result<()> {
    if g.c != y.c {
        return Err(Error::DimensionMismatch {
            what: "class count of labels vs tensor",
            expected: g.c,
            found: y.c,
        });
    }
    if g.n != y.n {
        return Err(Error::DimensionMismatch {
            what: "instance count of labels vs tensor",
            expected: g.n,
            found: y.n,
        });
    }
    if let Some(pos) = g.values.iter().position(|v| !v.is_finite()) {
        let k = pos % g.m;
        let j = (pos / g.m) % g.c;
        let i = pos / (g.m * g.c);
        return Err(Error::NonFinite {
            what: "prediction tensor",
            index: format!("({i}, {j}, {k})"),
            value: g.values[pos],
        });
    }
    for i in 0..y.n {
        let col = y.column(i);
        let ones = col.iter().filter(|&&v| v == 1.0).count();
        let zeros = col.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != y.c - 1 {
            return Err(Error::NotOneHot { column: i });
        }
    }
    Ok(())
}

/// Ensemble weights on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some((i, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidWeights(format!(
                "w[{i}] = {v} is not a nonnegative real"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > CONSTRAINT_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(w))
    }

    /// For vectors that lie on the simplex by construction.
    pub(crate) fn from_vec_unchecked(w: Vec<f64>) -> Self {
        debug_assert!(w.iter().all(|v| *v >= 0.0));
        Self(w)
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "uniform weights need at least one learner");
        Self(vec![1.0 / m as f64; m])
    }

    /// Hadamard map `w = z ⊙ z`.
    pub fn from_sphere(z: &SphereParam) -> Self {
        Self(z.iter().map(|v| v * v).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SimplexWeights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

/// Point on the unit sphere; its elementwise square is a [`SimplexWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct SphereParam(Vec<f64>);

impl SphereParam {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidWeights("empty sphere point".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeights(
                "sphere point has non-finite entries".into(),
            ));
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > CONSTRAINT_TOL {
            return Err(Error::InvalidWeights(format!(
                "sphere point has norm {norm}"
            )));
        }
        Ok(Self(z))
    }

    pub(crate) fn from_vec_unchecked(z: Vec<f64>) -> Self {
        Self(z)
    }

    /// The nonnegative square root of a simplex point.
    pub fn from_simplex(w: &SimplexWeights) -> Self {
        Self(w.iter().map(|v| v.sqrt()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SphereParam {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Log-sum-exp temperature and variance weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub lambda: f64,
}

impl LossConfig {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        let cfg = Self { alpha, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            lambda: 0.0,
        }
    }
}

/// Iteration budget and step schedule shared by both optimizers.
///
/// The step at iteration `t` is `step_size * step_decay^t`. A `grad_tol` of
/// zero disables early stopping, so exactly `max_iters` steps are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub step_size: f64,
    pub step_decay: f64,
    pub grad_tol: f64,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Config(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(Error::Config(format!(
                "step_decay must lie in (0, 1], got {}",
                self.step_decay
            )));
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(Error::Config(format!(
                "grad_tol must be nonnegative, got {}",
                self.grad_tol
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn step_at(&self, t: usize) -> f64 {
        self.step_size * self.step_decay.powi(t as i32)
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_size: 0.1,
            step_decay: 0.999,
            grad_tol: 1e-8,
            seed: 0,
        }
    }
}

/// Outcome of one optimization run.
///
/// Accuracies are filled in by whoever owns the data; the optimizers
/// themselves leave them empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_trajectory: Vec<f64>,
    pub iterations_run: usize,
    pub wall_clock_total: f64,
    pub wall_clock_per_iter: f64,
    pub final_weights: SimplexWeights,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self
            .loss_trajectory
            .last()
            .expect("trajectory holds the initial loss")
    }

    pub fn validate(&self) -> Result<()> {
        if self.loss_trajectory.len() != self.iterations_run + 1 {
            return Err(Error::Format {
                line: 0,
                message: format!(
                    "loss trajectory has {} entries but {} iterations were run",
                    self.loss_trajectory.len(),
                    self.iterations_run
                ),
            });
        }
        if !(self.wall_clock_total >= 0.0 && self.wall_clock_per_iter >= 0.0) {
            return Err(Error::Format {
                line: 0,
                message: "wall-clock fields must be nonnegative".into(),
            });
        }
        for acc in [self.train_accuracy, self.test_accuracy]
            .into_iter()
            .flatten()
        {
            if !(0.0..=1.0).contains(&acc) {
                return Err(Error::Format {
                    line: 0,
                    message: format!("accuracy {acc} outside [0, 1]"),
                });
            }
        }
        Ok(())
    }
}
