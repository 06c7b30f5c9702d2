//! Projected gradient descent on the probability simplex, and a KKT checker
//! shared by both optimizers.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{OptimizerConfig, SimplexWeights, TrainReport, CONSTRAINT_TOL};
use crate::objective::Objective;

/// Euclidean projection onto `{w : w ≥ 0, Σw = 1}` by sort-and-threshold.
///
/// Inputs already on the simplex (sum within [`CONSTRAINT_TOL`]) are
/// returned unchanged, which makes the projection idempotent bit for bit.
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::InvalidWeights(
            "cannot project an empty vector".into(),
        ));
    }
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "projection input",
            index: i.to_string(),
            value: *x,
        });
    }
    let mut sorted = v.to_vec();
    let mut out = vec![0.0; v.len()];
    project_into(v, &mut sorted, &mut out);
    Ok(SimplexWeights::from_vec_unchecked(out))
}

/// Projection kernel; `scratch` has the length of `v` and is clobbered.
fn project_into(v: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    scratch.copy_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));

    // Summing in sorted order keeps the result independent of input order.
    let sum: f64 = scratch.iter().sum();
    if scratch[scratch.len() - 1] >= 0.0 && (sum - 1.0).abs() <= CONSTRAINT_TOL {
        out.copy_from_slice(v);
        return;
    }

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
}

pub fn projected_gd<O: Objective + ?Sized>(
    obj: &O,
    w0: &SimplexWeights,
    cfg: &OptimizerConfig,
) -> Result<(SimplexWeights, TrainReport)> {
    cfg.validate()?;
    let m = w0.len();
    if obj.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "objective dimension vs weights",
            expected: obj.dim(),
            found: m,
        });
    }

    let start = Instant::now();
    let mut w = w0.to_vec();
    let mut grad = vec![0.0; m];
    let mut step_point = vec![0.0; m];
    let mut candidate = vec![0.0; m];
    let mut scratch = vec![0.0; m];

    let mut loss = obj.value_and_gradient(&w, &mut grad);
    if !loss.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            value: loss,
        });
    }
    let mut trajectory = Vec::with_capacity(cfg.max_iters.min(100_000) + 1);
    trajectory.push(loss);

    let mut iterations = 0;
    for t in 0..cfg.max_iters {
        let step = cfg.step_at(t);
        for ((p, w), g) in step_point.iter_mut().zip(&w).zip(&grad) {
            *p = w - step * g;
        }
        project_into(&step_point, &mut scratch, &mut candidate);

        // norm of the gradient mapping (w − w⁺)/step
        let moved = candidate
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if cfg.grad_tol > 0.0 && moved / step <= cfg.grad_tol {
            break;
        }

        std::mem::swap(&mut w, &mut candidate);
        loss = obj.value_and_gradient(&w, &mut grad);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: t + 1,
                value: loss,
            });
        }
        trajectory.push(loss);
        iterations = t + 1;
    }

    let total = start.elapsed().as_secs_f64();
    let weights = SimplexWeights::from_vec_unchecked(w);
    let report = TrainReport {
        loss_trajectory: trajectory,
        iterations_run: iterations,
        wall_clock_total: total,
        wall_clock_per_iter: total / iterations.max(1) as f64,
        final_weights: weights.clone(),
        train_accuracy: None,
        test_accuracy: None,
    };
    Ok((weights, report))
}

/// Residuals of the first-order optimality conditions on the simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Estimated multiplier of the equality constraint.
    pub multiplier: f64,
    /// `max(0, −min_i μ_i)`: how far the inequality multipliers go negative.
    pub stationarity: f64,
    /// `max_i |μ_i w_i|`.
    pub complementarity: f64,
    /// `|Σw − 1| + max_i max(−w_i, 0)`.
    pub feasibility: f64,
    pub passes: bool,
}

/// Checks `∇f(w) + λ1 − μ = 0`, `μ ≥ 0`, `μ ⊙ w = 0` and feasibility of `w`.
///
/// `λ` is estimated as minus the mean gradient over the support
/// `{i : w_i > tol}` and `μ = g + λ1`.
pub fn check_kkt_simplex(w: &[f64], g: &[f64], tol: f64) -> KktReport {
    assert_eq!(w.len(), g.len(), "weights and gradient differ in length");
    let mut support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > tol).collect();
    if support.is_empty() {
        support = (0..w.len()).collect();
    }
    let multiplier = -support.iter().map(|&i| g[i]).sum::<f64>() / support.len() as f64;

    let mut min_mu = f64::INFINITY;
    let mut complementarity: f64 = 0.0;
    for (wi, gi) in w.iter().zip(g) {
        let mu = gi + multiplier;
        min_mu = min_mu.min(mu);
        complementarity = complementarity.max((mu * wi).abs());
    }
    let stationarity = (-min_mu).max(0.0);
    let negativity = w.iter().fold(0.0_f64, |a, &v| a.max(-v));
    let feasibility = (w.iter().sum::<f64>() - 1.0).abs() + negativity;

    KktReport {
        multiplier,
        stationarity,
        complementarity,
        feasibility,
        passes: stationarity <= tol && complementarity <= tol && feasibility <= tol,
    }
}
