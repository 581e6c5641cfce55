//! Positive-unlabeled (PU) learning from scratch.
//!
//! The crate provides the unbiased PU risk estimator (uPU), its non-negative
//! correction (nnPU), the mini-batch training loop that minimizes either of
//! them with a pluggable stochastic optimizer, and a Monte Carlo laboratory
//! that measures bias, MSE and the frequency of negative-risk events against
//! exact risk oracles on Gaussian tasks.
//!
//! Modules, bottom-up:
//!
//! - [`loss`]: surrogate and evaluation losses with their algebraic flags.
//! - [`model`]: linear models and MLPs with hand-written backpropagation.
//! - [`optim`]: SGD, Adam and AdaGrad with a step-size discount hook.
//! - [`risk`]: partial risks, the PN/uPU/nnPU estimators and their gradients.
//! - [`trainer`]: the epoch loop with defect-branch dispatch.
//! - [`data`]: Gaussian tasks, risk oracles, IDX ingestion and PU construction.
//! - [`lab`]: replicated estimator studies.

pub mod csv;
pub mod data;
pub mod error;
pub mod lab;
pub mod loss;
pub mod matrix;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod risk;
pub mod trainer;

pub use data::{GaussianTask, LabeledSet, PuDataset};
pub use error::{PuError, Result};
pub use lab::EstimatorStats;
pub use loss::{LossKind, LossSpec};
pub use matrix::Matrix;
pub use model::{Activation, Architecture, GradientBuffer, Model};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use risk::{Branch, Estimator, RiskBreakdown};
pub use trainer::{EpochLog, Method, TrainConfig};
