//! End-to-end experiment drivers: fit base learners, learn ensemble weights,
//! and tabulate the results. The CLI is a thin wrapper around these.

use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselearn::{ensemble_predictions, fit_bagged};
use crate::data_io::{one_hot, split_train_test, Dataset};
use crate::error::{Error, Result};
use crate::margin::{accuracy, margin_stats};
use crate::model::{
    LabelMatrix, LossConfig, OptimizerConfig, PredictionTensor, SimplexWeights, TrainReport,
};
use crate::objective::{MarginObjective, Objective};
use crate::simplex::projected_gd;
use crate::sphere::{hadamard, init_sphere, riemannian_gd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Hadamard parameterization with Riemannian descent on the sphere.
    Sphere,
    /// Projected gradient descent on the simplex.
    Projected,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sphere => "sphere",
            Method::Projected => "projected",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Method::Sphere),
            "projected" => Ok(Method::Projected),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub learners: usize,
    pub max_depth: usize,
    pub test_fraction: f64,
    pub method: Method,
    pub loss: LossConfig,
    /// `optimizer.seed` also drives the split and the bootstrap.
    pub optimizer: OptimizerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            learners: 10,
            max_depth: 7,
            test_fraction: 0.2,
            method: Method::Sphere,
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learners == 0 {
            return Err(Error::Config("learner count must be at least 1".into()));
        }
        self.loss.validate()?;
        self.optimizer.validate()
    }
}

/// Learner outputs on both sides of a split.
#[derive(Debug, Clone)]
pub struct Tensors {
    pub train: PredictionTensor,
    pub train_labels: LabelMatrix,
    pub test: PredictionTensor,
    pub test_labels: LabelMatrix,
}

pub fn fit_tensors(train: &Dataset, test: &Dataset, cfg: &PipelineConfig) -> Result<Tensors> {
    let ens = fit_bagged(
        train.features(),
        train.d(),
        train.labels(),
        train.n_classes(),
        cfg.learners,
        cfg.max_depth,
        cfg.optimizer.seed,
    )?;
    Ok(Tensors {
        train: ensemble_predictions(&ens, train.features(), train.d())?,
        train_labels: one_hot(train),
        test: ensemble_predictions(&ens, test.features(), test.d())?,
        test_labels: one_hot(test),
    })
}

/// Learns weights on `(g, y)` with the chosen method. The sphere starts at
/// a seeded random point, the simplex method at uniform weights.
pub fn optimize(
    g: &PredictionTensor,
    y: &LabelMatrix,
    loss: LossConfig,
    opt: &OptimizerConfig,
    method: Method,
) -> Result<TrainReport> {
    let obj = MarginObjective::new(g, y, loss)?;
    let report = match method {
        Method::Sphere => riemannian_gd(&obj, &init_sphere(g.m(), opt.seed), opt)?.1,
        Method::Projected => projected_gd(&obj, &SimplexWeights::uniform(g.m()), opt)?.1,
    };
    Ok(report)
}

/// Optimizes on the training tensor and scores both sides.
pub fn train_on_tensors(t: &Tensors, cfg: &PipelineConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = optimize(
        &t.train,
        &t.train_labels,
        cfg.loss,
        &cfg.optimizer,
        cfg.method,
    )?;
    let w = report.final_weights.as_slice();
    report.train_accuracy = Some(accuracy(&t.train, &t.train_labels, w));
    report.test_accuracy = Some(accuracy(&t.test, &t.test_labels, w));
    Ok(report)
}

/// Split, bag, optimize, evaluate.
pub fn train(ds: &Dataset, cfg: &PipelineConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let (train, test) = split_train_test(ds, cfg.test_fraction, cfg.optimizer.seed)?;
    let tensors = fit_tensors(&train, &test, cfg)?;
    train_on_tensors(&tensors, cfg)
}

/// Timing comparison of the two optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub learners: usize,
    pub iterations: usize,
    pub repeats: usize,
    /// Median total seconds, sphere method.
    pub sphere_seconds: f64,
    /// Median total seconds, projected method.
    pub projected_seconds: f64,
    pub sphere_per_iter: f64,
    pub projected_per_iter: f64,
    /// `(projected − sphere) / projected · 100`.
    pub speedup_percent: f64,
    pub sphere_final_loss: f64,
    pub projected_final_loss: f64,
}

impl BenchResult {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "learners = {}", self.learners);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "repeats = {}", self.repeats);
        let _ = writeln!(s, "sphere_seconds = {}", self.sphere_seconds);
        let _ = writeln!(s, "projected_seconds = {}", self.projected_seconds);
        let _ = writeln!(s, "sphere_seconds_per_iter = {}", self.sphere_per_iter);
        let _ = writeln!(
            s,
            "projected_seconds_per_iter = {}",
            self.projected_per_iter
        );
        let _ = writeln!(s, "speedup_percent = {}", self.speedup_percent);
        let _ = writeln!(s, "sphere_final_loss = {}", self.sphere_final_loss);
        let _ = writeln!(s, "projected_final_loss = {}", self.projected_final_loss);
        s
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs both optimizers `repeats` times from the same start (`z0` for the
/// sphere, `hadamard(z0)` for the simplex) with exactly `opt.max_iters`
/// iterations each, and reports median wall-clock times.
pub fn bench_objective<O: Objective + ?Sized>(
    obj: &O,
    opt: &OptimizerConfig,
    repeats: usize,
) -> Result<BenchResult> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    // grad_tol = 0 keeps both runs at the full, matched budget
    let opt = OptimizerConfig {
        grad_tol: 0.0,
        ..*opt
    };
    let z0 = init_sphere(obj.dim(), opt.seed);
    let w0 = hadamard(&z0);

    let mut sphere_t = Vec::with_capacity(repeats);
    let mut proj_t = Vec::with_capacity(repeats);
    let mut sphere_iters = 0;
    let mut proj_iters = 0;
    let (mut sphere_loss, mut proj_loss) = (f64::NAN, f64::NAN);
    for _ in 0..repeats {
        let (_, r) = riemannian_gd(obj, &z0, &opt)?;
        sphere_t.push(r.wall_clock_total);
        sphere_iters = r.iterations_run;
        sphere_loss = r.final_loss();
        let (_, r) = projected_gd(obj, &w0, &opt)?;
        proj_t.push(r.wall_clock_total);
        proj_iters = r.iterations_run;
        proj_loss = r.final_loss();
    }
    let sphere_seconds = median(sphere_t);
    let projected_seconds = median(proj_t);
    Ok(BenchResult {
        learners: obj.dim(),
        iterations: opt.max_iters,
        repeats,
        sphere_seconds,
        projected_seconds,
        sphere_per_iter: sphere_seconds / sphere_iters.max(1) as f64,
        projected_per_iter: projected_seconds / proj_iters.max(1) as f64,
        speedup_percent: (projected_seconds - sphere_seconds) / projected_seconds * 100.0,
        sphere_final_loss: sphere_loss,
        projected_final_loss: proj_loss,
    })
}

pub fn bench(
    g: &PredictionTensor,
    y: &LabelMatrix,
    loss: LossConfig,
    opt: &OptimizerConfig,
    repeats: usize,
) -> Result<BenchResult> {
    let obj = MarginObjective::new(g, y, loss)?;
    bench_objective(&obj, opt, repeats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `train_accuracy − test_accuracy`.
    pub gap: f64,
    pub margin_mean: f64,
    pub margin_variance: f64,
    pub final_loss: f64,
}

/// One row per `lambda`, all sharing the same split and base learners.
pub fn sweep_lambda(t: &Tensors, cfg: &PipelineConfig, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = PipelineConfig {
                loss: LossConfig::new(cfg.loss.alpha, lambda)?,
                ..*cfg
            };
            let report = train_on_tensors(t, &cfg)?;
            let stats = margin_stats(&t.train, &t.train_labels, &report.final_weights, &cfg.loss);
            let train_accuracy = report.train_accuracy.unwrap_or_default();
            let test_accuracy = report.test_accuracy.unwrap_or_default();
            Ok(SweepRow {
                lambda,
                train_accuracy,
                test_accuracy,
                gap: train_accuracy - test_accuracy,
                margin_mean: stats.mean,
                margin_variance: stats.variance,
                final_loss: report.final_loss(),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "lambda,train_accuracy,test_accuracy,gap,margin_mean,margin_variance,final_loss"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.lambda,
            r.train_accuracy,
            r.test_accuracy,
            r.gap,
            r.margin_mean,
            r.margin_variance,
            r.final_loss
        )?;
    }
    w.flush()
}

/// First `round(fraction · n)` rows (at least one) of a seeded permutation,
/// returned in ascending order. Larger fractions contain smaller ones and
/// fraction 1 returns `0..n`.
pub fn nested_subset(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    perm.shuffle(&mut rng);
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut rows = perm[..k].to_vec();
    rows.sort_unstable();
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub fraction: f64,
    pub train_size: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Retrains from scratch on nested subsets of the training split and scores
/// each fit on the full test split.
pub fn learning_curve(
    ds: &Dataset,
    cfg: &PipelineConfig,
    fractions: &[f64],
) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let (train, test) = split_train_test(ds, cfg.test_fraction, cfg.optimizer.seed)?;
    fractions
        .iter()
        .map(|&fraction| {
            let rows = nested_subset(train.n(), fraction, cfg.optimizer.seed)?;
            let subset = train.select(&rows)?;
            let tensors = fit_tensors(&subset, &test, cfg)?;
            let report = train_on_tensors(&tensors, cfg)?;
            Ok(CurveRow {
                fraction,
                train_size: rows.len(),
                train_accuracy: report.train_accuracy.unwrap_or_default(),
                test_accuracy: report.test_accuracy.unwrap_or_default(),
            })
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "fraction,train_size,train_accuracy,test_accuracy")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.fraction, r.train_size, r.train_accuracy, r.test_accuracy
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_subsets_grow() {
        let a = nested_subset(100, 0.1, 0).unwrap();
        let b = nested_subset(100, 0.2, 0).unwrap();
        assert_eq!((a.len(), b.len()), (10, 20));
        assert!(a.iter().all(|r| b.contains(r)));
        assert_eq!(
            nested_subset(100, 1.0, 0).unwrap(),
            (0..100).collect::<Vec<_>>()
        );
        assert_eq!(nested_subset(3, 0.01, 0).unwrap().len(), 1);
        assert!(nested_subset(3, 0.0, 0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("sphere".parse::<Method>().unwrap(), Method::Sphere);
        assert_eq!("projected".parse::<Method>().unwrap(), Method::Projected);
        assert!("newton".parse::<Method>().is_err());
    }
}
