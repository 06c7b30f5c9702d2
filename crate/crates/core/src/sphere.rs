//! Riemannian gradient descent on the unit sphere.
//!
//! Weights are parameterized as `w = z ⊙ z` with `‖z‖₂ = 1`, which maps the
//! sphere onto the probability simplex. Each step pulls the Euclidean
//! gradient back to `z` (`2 z ⊙ ∇f(w)`), removes its radial component, takes
//! a step in the tangent space and renormalizes. No projection onto the
//! simplex is ever needed.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{OptimizerConfig, SimplexWeights, SphereParam, TrainReport};
use crate::objective::Objective;

/// `w = z ⊙ z`.
pub fn hadamard(z: &SphereParam) -> SimplexWeights {
    SimplexWeights::from_sphere(z)
}

/// Chain rule through the Hadamard map: `2 z ⊙ g_w`.
pub fn reparam_grad(z: &[f64], g_w: &[f64]) -> Vec<f64> {
    z.iter().zip(g_w).map(|(z, g)| 2.0 * z * g).collect()
}

/// `g − z (zᵀ g)`, the component of `g` tangent to the sphere at `z`.
pub fn tangent_project(z: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = g.to_vec();
    project_in_place(z, &mut out);
    out
}

#[inline]
fn project_in_place(z: &[f64], g: &mut [f64]) {
    let radial: f64 = z.iter().zip(g.iter()).map(|(z, g)| z * g).sum();
    for (g, z) in g.iter_mut().zip(z) {
        *g -= z * radial;
    }
}

/// `y / ‖y‖₂`.
pub fn retract(y: &[f64]) -> Result<SphereParam> {
    let mut z = y.to_vec();
    normalize_in_place(&mut z, 0)?;
    Ok(SphereParam::from_vec_unchecked(z))
}

fn normalize_in_place(y: &mut [f64], iteration: usize) -> Result<()> {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateRetraction { iteration });
    }
    y.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

/// Uniform random point on the sphere: normalized standard Gaussians drawn
/// from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn init_sphere(m: usize, seed: u64) -> SphereParam {
    assert!(m >= 1, "sphere dimension must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        if normalize_in_place(&mut z, 0).is_ok() {
            return SphereParam::from_vec_unchecked(z);
        }
    }
}

/// State handed to an observer once per iteration, before the stopping test.
#[derive(Debug)]
pub struct SphereIterate<'a> {
    pub iteration: usize,
    pub z: &'a [f64],
    /// Riemannian gradient at `z`.
    pub xi: &'a [f64],
    pub loss: f64,
}

pub fn riemannian_gd<O: Objective + ?Sized>(
    obj: &O,
    z0: &SphereParam,
    cfg: &OptimizerConfig,
) -> Result<(SphereParam, TrainReport)> {
    riemannian_gd_observed(obj, z0, cfg, |_| {})
}

/// [`riemannian_gd`] with a callback invoked on every iterate.
pub fn riemannian_gd_observed<O, F>(
    obj: &O,
    z0: &SphereParam,
    cfg: &OptimizerConfig,
    mut observe: F,
) -> Result<(SphereParam, TrainReport)>
where
    O: Objective + ?Sized,
    F: FnMut(&SphereIterate<'_>),
{
    cfg.validate()?;
    let m = z0.len();
    if obj.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "objective dimension vs sphere point",
            expected: obj.dim(),
            found: m,
        });
    }

    let start = Instant::now();
    let mut z = z0.to_vec();
    let mut w: Vec<f64> = z.iter().map(|v| v * v).collect();
    let mut xi = vec![0.0; m];

    let mut loss = obj.value_and_gradient(&w, &mut xi);
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
        // xi holds g_w here; turn it into 2 z ⊙ g_w, then project.
        for (g, z) in xi.iter_mut().zip(&z) {
            *g *= 2.0 * z;
        }
        project_in_place(&z, &mut xi);
        let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();

        observe(&SphereIterate {
            iteration: t,
            z: &z,
            xi: &xi,
            loss,
        });
        if cfg.grad_tol > 0.0 && xi_norm <= cfg.grad_tol {
            break;
        }

        let step = cfg.step_at(t);
        for (z, xi) in z.iter_mut().zip(&xi) {
            *z -= step * xi;
        }
        normalize_in_place(&mut z, t)?;
        for (w, z) in w.iter_mut().zip(&z) {
            *w = z * z;
        }

        loss = obj.value_and_gradient(&w, &mut xi);
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
    let report = TrainReport {
        loss_trajectory: trajectory,
        iterations_run: iterations,
        wall_clock_total: total,
        wall_clock_per_iter: total / iterations.max(1) as f64,
        final_weights: SimplexWeights::from_vec_unchecked(w),
        train_accuracy: None,
        test_accuracy: None,
    };
    Ok((SphereParam::from_vec_unchecked(z), report))
}
