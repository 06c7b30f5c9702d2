//! Ensemble scores, hard and smoothed margins, and the margin-variance loss.
//!
//! For instance `i` with score block `G_i` (`c x m`) and weights `w`, the
//! class scores are `s = G_i w`. The hard margin is
//! `sᵀY_i − max_j (s − Y_i ⊙ s)_j` and the smoothed margin replaces the max
//! with a temperature-`alpha` log-sum-exp. The loss is
//! `−mean(m) + lambda · var(m)` over the smoothed margins `m`.

use crate::model::{LabelMatrix, LossConfig, PredictionTensor};

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = j;
        }
    }
    best
}

/// Writes `s = G_i w` into `out`, where `block` is the row-major `c x m` matrix `G_i`.
#[inline]
pub fn scores_into(block: &[f64], w: &[f64], out: &mut [f64]) {
    let m = w.len();
    debug_assert_eq!(block.len(), out.len() * m);
    for (row, s) in block.chunks_exact(m).zip(out.iter_mut()) {
        *s = row.iter().zip(w).map(|(g, w)| g * w).sum();
    }
}

/// Weighted class scores `G_i w`.
pub fn ensemble_scores(block: &[f64], w: &[f64]) -> Vec<f64> {
    assert!(
        !w.is_empty() && block.len().is_multiple_of(w.len()),
        "score block does not match weights"
    );
    let mut out = vec![0.0; block.len() / w.len()];
    scores_into(block, w, &mut out);
    out
}

/// Ensemble class prediction for one instance.
pub fn predict(block: &[f64], w: &[f64]) -> usize {
    argmax(&ensemble_scores(block, w))
}

#[inline]
fn true_score(s: &[f64], y: &[f64]) -> f64 {
    s.iter().zip(y).map(|(s, y)| s * y).sum()
}

/// `sᵀY − max(s − Y ⊙ s)`. The masked vector keeps a zero at the true class,
/// so the max is taken over the competing scores together with 0.
pub fn hard_margin(s: &[f64], y: &[f64]) -> f64 {
    let masked_max = s
        .iter()
        .zip(y)
        .map(|(s, y)| s - y * s)
        .fold(f64::NEG_INFINITY, f64::max);
    true_score(s, y) - masked_max
}

/// `(1/alpha) log Σ exp(alpha v_j)`, shifted by the max so it never overflows.
pub fn log_sum_exp(v: &[f64], alpha: f64) -> f64 {
    let top = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(alpha * b));
    let sum: f64 = v.iter().map(|&x| (alpha * x - top).exp()).sum();
    (top + sum.ln()) / alpha
}

/// Smoothed margin `sᵀY − (1/alpha) log Σ_j exp(alpha (s − Y ⊙ s)_j)`.
pub fn smooth_margin(s: &[f64], y: &[f64], alpha: f64) -> f64 {
    let masked: Vec<f64> = s.iter().zip(y).map(|(s, y)| s - y * s).collect();
    true_score(s, y) - log_sum_exp(&masked, alpha)
}

/// Smoothed margin plus its gradient with respect to `s`, written to `ds`.
///
/// `∂m/∂s = Y − p ⊙ (1 − Y)` where `p` is the softmax of `alpha (s − Y ⊙ s)`.
fn smooth_margin_with_grad(s: &[f64], y: &[f64], alpha: f64, ds: &mut [f64]) -> f64 {
    // ds doubles as scratch for the masked scores.
    for ((d, s), y) in ds.iter_mut().zip(s).zip(y) {
        *d = s - y * s;
    }
    let top = ds.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(alpha * b));
    let mut sum = 0.0;
    for d in ds.iter_mut() {
        *d = (alpha * *d - top).exp();
        sum += *d;
    }
    let margin = true_score(s, y) - (top + sum.ln()) / alpha;
    for (d, y) in ds.iter_mut().zip(y) {
        *d = y - (*d / sum) * (1.0 - y);
    }
    margin
}

/// Smoothed margins of every instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginVector(pub Vec<f64>);

impl MarginVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Population variance, two-pass.
    pub fn variance(&self) -> f64 {
        margin_variance(&self.0)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute margin, the bound `M_m`.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Population variance `(1/n) Σ (m_i − mean)²`.
pub fn margin_variance(m: &[f64]) -> f64 {
    let n = m.len() as f64;
    let mean = m.iter().sum::<f64>() / n;
    m.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Analytic Hessian of [`margin_variance`] in margin space:
/// `(2/n)(I − 11ᵀ/n)`, row-major `n x n`.
pub fn variance_hessian(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut h = vec![-2.0 / (nf * nf); n * n];
    for k in 0..n {
        h[k * n + k] += 2.0 / nf;
    }
    h
}

/// Margin-variance loss as a function of the margins alone.
pub fn loss_from_margins(m: &[f64], lambda: f64) -> f64 {
    let mean = m.iter().sum::<f64>() / m.len() as f64;
    -mean + lambda * margin_variance(m)
}

pub fn margins(g: &PredictionTensor, y: &LabelMatrix, w: &[f64], cfg: &LossConfig) -> MarginVector {
    let mut s = vec![0.0; g.c()];
    let values = (0..g.n())
        .map(|i| {
            scores_into(g.instance(i), w, &mut s);
            smooth_margin(&s, y.column(i), cfg.alpha)
        })
        .collect();
    MarginVector(values)
}

pub fn hard_margins(g: &PredictionTensor, y: &LabelMatrix, w: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; g.c()];
    (0..g.n())
        .map(|i| {
            scores_into(g.instance(i), w, &mut s);
            hard_margin(&s, y.column(i))
        })
        .collect()
}

/// `−(1/n) Σ m_i + lambda · Var(m)`.
pub fn loss(g: &PredictionTensor, y: &LabelMatrix, w: &[f64], cfg: &LossConfig) -> f64 {
    loss_from_margins(margins(g, y, w, cfg).as_slice(), cfg.lambda)
}

/// Loss value and its Euclidean gradient in `w`, written to `grad`.
pub fn loss_and_grad(
    g: &PredictionTensor,
    y: &LabelMatrix,
    w: &[f64],
    cfg: &LossConfig,
    grad: &mut [f64],
) -> f64 {
    let (n, c, m) = (g.n(), g.c(), g.m());
    debug_assert_eq!(w.len(), m);
    debug_assert_eq!(grad.len(), m);

    let mut s = vec![0.0; c];
    let mut ds = vec![0.0; n * c];
    let mut mv = Vec::with_capacity(n);
    for i in 0..n {
        scores_into(g.instance(i), w, &mut s);
        mv.push(smooth_margin_with_grad(
            &s,
            y.column(i),
            cfg.alpha,
            &mut ds[i * c..(i + 1) * c],
        ));
    }

    let nf = n as f64;
    let mean = mv.iter().sum::<f64>() / nf;
    let var = margin_variance(&mv);

    // ∇L = Σ_i a_i G_iᵀ ∇_s m_i with a_i = −1/n + (2λ/n)(m_i − mean).
    grad.fill(0.0);
    for i in 0..n {
        let a = (-1.0 + 2.0 * cfg.lambda * (mv[i] - mean)) / nf;
        let block = g.instance(i);
        for (row, d) in block.chunks_exact(m).zip(&ds[i * c..(i + 1) * c]) {
            let coef = a * d;
            if coef != 0.0 {
                for (gk, r) in grad.iter_mut().zip(row) {
                    *gk += coef * r;
                }
            }
        }
    }
    -mean + cfg.lambda * var
}

/// Exact gradient of [`loss`] with respect to `w` (no constraint handling).
pub fn grad_loss(g: &PredictionTensor, y: &LabelMatrix, w: &[f64], cfg: &LossConfig) -> Vec<f64> {
    let mut out = vec![0.0; g.m()];
    loss_and_grad(g, y, w, cfg, &mut out);
    out
}

/// Summary of the margin distribution at `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub margins: MarginVector,
}

pub fn margin_stats(
    g: &PredictionTensor,
    y: &LabelMatrix,
    w: &[f64],
    cfg: &LossConfig,
) -> MarginStats {
    let margins = margins(g, y, w, cfg);
    MarginStats {
        mean: margins.mean(),
        variance: margins.variance(),
        min: margins.min(),
        margins,
    }
}

/// Gradient-norm bound `3 M_g (1 + 4 lambda M_m)`, where `M_g` bounds the
/// scores and `M_m` the margins.
///
/// Guaranteed for nonnegative scores and at most nine learners; beyond that
/// the true bound grows like `sqrt(m) M_g (1 + 4 lambda M_m)`.
pub fn lipschitz_bound(max_score: f64, max_margin: f64, lambda: f64) -> f64 {
    3.0 * max_score * (1.0 + 4.0 * lambda * max_margin)
}

/// Fraction of instances whose ensemble prediction matches the label.
pub fn accuracy(g: &PredictionTensor, y: &LabelMatrix, w: &[f64]) -> f64 {
    let mut s = vec![0.0; g.c()];
    let correct = (0..g.n())
        .filter(|&i| {
            scores_into(g.instance(i), w, &mut s);
            argmax(&s) == y.class_of(i)
        })
        .count();
    correct as f64 / g.n() as f64
}
