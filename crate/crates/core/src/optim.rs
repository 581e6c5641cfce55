//! Stochastic optimizers with a per-step discount on the applied update.

use std::fmt;
use std::str::FromStr;

use crate::error::{PuError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Adagrad,
}

impl OptimizerKind {
    pub fn default_step_size(self) -> f64 {
        match self {
            OptimizerKind::Adam => 1e-4,
            OptimizerKind::Adagrad => 1e-2,
            OptimizerKind::Sgd => 1e-2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Adagrad => "adagrad",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = PuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            other => Err(PuError::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub adagrad_eps: f64,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            step_size: kind.default_step_size(),
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            adagrad_eps: 1e-8,
        }
    }

    pub fn with_step_size(mut self, step_size: f64) -> Self {
        self.step_size = step_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(PuError::Config(format!(
                "step size {} must be positive",
                self.step_size
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(PuError::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0 && self.adagrad_eps > 0.0) {
            return Err(PuError::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::new(OptimizerKind::Adam)
    }
}

/// Optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    /// First moment (adam).
    moment1: Vec<f64>,
    /// Second moment (adam) or squared-gradient accumulator (adagrad).
    moment2: Vec<f64>,
    step_count: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, param_count: usize) -> Result<Self> {
        config.validate()?;
        let (m1, m2) = match config.kind {
            OptimizerKind::Sgd => (0, 0),
            OptimizerKind::Adam => (param_count, param_count),
            OptimizerKind::Adagrad => (0, param_count),
        };
        Ok(Self {
            config,
            moment1: vec![0.0; m1],
            moment2: vec![0.0; m2],
            step_count: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moment1(&self) -> &[f64] {
        &self.moment1
    }

    pub fn moment2(&self) -> &[f64] {
        &self.moment2
    }

    /// Applies one update with step size `discount · η`. The adaptive
    /// statistics are updated as if `discount` were 1. A non-finite gradient
    /// is rejected before anything is modified.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], discount: f64) -> Result<()> {
        if params.len() != grad.len() {
            return Err(PuError::Shape(format!(
                "gradient has {} entries for {} parameters",
                grad.len(),
                params.len()
            )));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(PuError::Config(format!("discount {discount} outside [0, 1]")));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(PuError::NonFinite(format!("gradient entry {i} is {}", grad[i])));
        }
        let expected = match self.config.kind {
            OptimizerKind::Sgd => params.len(),
            _ => self.moment2.len(),
        };
        if params.len() != expected {
            return Err(PuError::Shape(format!(
                "optimizer sized for {expected} parameters, got {}",
                params.len()
            )));
        }
        self.step_count += 1;
        let lr = discount * self.config.step_size;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let OptimizerConfig {
                    beta1, beta2, adam_eps, ..
                } = self.config;
                let t = self.step_count as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.moment1)
                    .zip(&mut self.moment2)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + adam_eps);
                }
            }
            OptimizerKind::Adagrad => {
                let eps = self.config.adagrad_eps;
                for ((p, g), acc) in params.iter_mut().zip(grad).zip(&mut self.moment2) {
                    *acc += g * g;
                    *p -= lr * g / (acc.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
