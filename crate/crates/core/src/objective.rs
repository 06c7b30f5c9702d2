//! Objectives over simplex weights, consumed by both optimizers.

use crate::error::Result;
use crate::margin;
use crate::model::{validate_pair, LabelMatrix, LossConfig, PredictionTensor};

/// A smooth function of the weight vector with its Euclidean gradient.
///
/// Implementations must be re-entrant: the optimizers only ever take `&self`.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> f64;

    /// Writes `∇f(w)` into `grad`.
    fn gradient(&self, w: &[f64], grad: &mut [f64]);

    /// Value and gradient together; override when they share work.
    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(w, grad);
        self.value(w)
    }
}

/// An objective assembled from a value closure and a gradient closure.
pub struct ObjectiveHandle<V, G> {
    dim: usize,
    value_fn: V,
    grad_fn: G,
}

impl<V, G> ObjectiveHandle<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    pub fn new(dim: usize, value_fn: V, grad_fn: G) -> Self {
        Self {
            dim,
            value_fn,
            grad_fn,
        }
    }
}

impl<V, G> Objective for ObjectiveHandle<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> f64 {
        (self.value_fn)(w)
    }

    fn gradient(&self, w: &[f64], grad: &mut [f64]) {
        (self.grad_fn)(w, grad)
    }
}

/// The margin-variance ensemble loss on a fixed tensor/label pair.
#[derive(Debug, Clone, Copy)]
pub struct MarginObjective<'a> {
    g: &'a PredictionTensor,
    y: &'a LabelMatrix,
    cfg: LossConfig,
}

impl<'a> MarginObjective<'a> {
    pub fn new(g: &'a PredictionTensor, y: &'a LabelMatrix, cfg: LossConfig) -> Result<Self> {
        validate_pair(g, y)?;
        cfg.validate()?;
        Ok(Self { g, y, cfg })
    }

    pub fn config(&self) -> &LossConfig {
        &self.cfg
    }
}

impl Objective for MarginObjective<'_> {
    fn dim(&self) -> usize {
        self.g.m()
    }

    fn value(&self, w: &[f64]) -> f64 {
        margin::loss(self.g, self.y, w, &self.cfg)
    }

    fn gradient(&self, w: &[f64], grad: &mut [f64]) {
        margin::loss_and_grad(self.g, self.y, w, &self.cfg, grad);
    }

    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        margin::loss_and_grad(self.g, self.y, w, &self.cfg, grad)
    }
}

/// Convex quadratic `½ wᵀAw + bᵀw` with dense row-major `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Quadratic {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        assert_eq!(a.len(), b.len() * b.len(), "A must be m x m");
        Self { a, b }
    }

    /// `‖w − target‖²`.
    pub fn distance_to(target: &[f64]) -> Self {
        let m = target.len();
        let mut a = vec![0.0; m * m];
        for k in 0..m {
            a[k * m + k] = 2.0;
        }
        Self::new(a, target.iter().map(|t| -2.0 * t).collect())
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let m = self.b.len();
        let mut v = 0.0;
        for (r, (row, b)) in self.a.chunks_exact(m).zip(&self.b).enumerate() {
            let aw: f64 = row.iter().zip(w).map(|(a, w)| a * w).sum();
            v += w[r] * (0.5 * aw + b);
        }
        v
    }

    fn gradient(&self, w: &[f64], grad: &mut [f64]) {
        let m = self.b.len();
        for ((g, row), b) in grad.iter_mut().zip(self.a.chunks_exact(m)).zip(&self.b) {
            *g = row.iter().zip(w).map(|(a, w)| a * w).sum::<f64>() + b;
        }
    }
}
