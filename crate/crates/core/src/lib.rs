//! Ensemble weighting by margin-variance minimization.
//!
//! Base classifiers (bagged decision trees here) produce a
//! [`PredictionTensor`] of per-class scores. The ensemble weights live on the
//! probability simplex and are chosen to maximize the mean smoothed margin
//! while penalizing its variance. Two optimizers are provided:
//!
//! * [`sphere::riemannian_gd`] reparameterizes `w = z ⊙ z` with `‖z‖ = 1`
//!   and runs Riemannian gradient descent on the sphere;
//! * [`simplex::projected_gd`] is the classical projected-gradient baseline.

pub mod baselearn;
pub mod data_io;
pub mod error;
pub mod experiment;
pub mod margin;
pub mod model;
pub mod objective;
pub mod simplex;
pub mod sphere;

pub use error::{Error, ErrorKind, Result};
pub use model::{
    validate_pair, LabelMatrix, LossConfig, OptimizerConfig, PredictionTensor, SimplexWeights,
    SphereParam, TrainReport,
};
pub use objective::{MarginObjective, Objective, ObjectiveHandle, Quadratic};
