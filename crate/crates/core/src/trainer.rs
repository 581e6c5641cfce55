//! Mini-batch training for PN, uPU and nnPU.
//!
//! Each epoch shuffles P and U (or P and N) independently, splits both into
//! the same number of contiguous mini-batches and applies one optimizer step
//! per batch pair. Under nnPU a batch whose estimated negative-class risk
//! falls below `-β` takes the defect step instead: it ascends that risk with
//! the step size discounted by `γ`.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::csv::{opt, Metadata};
use crate::data::PuDataset;
use crate::error::{PuError, Result};
use crate::loss::{LossKind, LossSpec};
use crate::matrix::Matrix;
use crate::model::{Architecture, Model, DEFAULT_L2};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::risk::{self, check_beta_gamma, Branch, RiskBreakdown};

pub use crate::risk::Estimator as Method;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub beta: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub loss: LossSpec,
    pub eval_loss: LossSpec,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Architecture string such as `d-100-1:relu`.
    pub architecture: String,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Nnpu,
            beta: 0.0,
            gamma: 1.0,
            epochs: 100,
            batches_per_epoch: 1,
            loss: LossSpec::new(LossKind::Sigmoid),
            eval_loss: LossSpec::new(LossKind::ZeroOne),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            architecture: "d-100-1:relu".into(),
            l2: DEFAULT_L2,
        }
    }
}

/// How a mini-batch gradient is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientRule {
    Pn,
    /// Plain uPU gradient on every batch.
    DirectUpu,
    /// The branching nnPU rule.
    NonNegative {
        beta: f64,
        gamma: f64,
    },
}

impl TrainConfig {
    /// The update rule for this config. uPU with a bounded loss runs the
    /// nnPU rule with `β = π_p · sup ℓ`, which never takes the defect branch.
    pub fn gradient_rule(&self, pi_p: f64) -> Result<GradientRule> {
        match self.method {
            Method::Pn => Ok(GradientRule::Pn),
            Method::Upu if self.loss.is_bounded() => {
                check_beta_gamma(&self.loss, pi_p, 0.0, self.gamma)?;
                Ok(GradientRule::NonNegative {
                    beta: pi_p * self.loss.sup_value,
                    gamma: self.gamma,
                })
            }
            Method::Upu => Ok(GradientRule::DirectUpu),
            Method::Nnpu => {
                check_beta_gamma(&self.loss, pi_p, self.beta, self.gamma)?;
                Ok(GradientRule::NonNegative {
                    beta: self.beta,
                    gamma: self.gamma,
                })
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(PuError::Config("epochs must be positive".into()));
        }
        if self.batches_per_epoch == 0 {
            return Err(PuError::Config("batches_per_epoch must be positive".into()));
        }
        if self.loss.kind == LossKind::ZeroOne {
            return Err(PuError::Config("zero_one cannot be used as a training loss".into()));
        }
        self.optimizer.validate()
    }

    /// Every setting, defaults included, for output headers.
    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.push("method", self.method)
            .push("beta", self.beta)
            .push("gamma", self.gamma)
            .push("epochs", self.epochs)
            .push("batches_per_epoch", self.batches_per_epoch)
            .push("loss", self.loss.kind)
            .push("eval_loss", self.eval_loss.kind)
            .push("optimizer", self.optimizer.kind)
            .push("step_size", self.optimizer.step_size)
            .push("adam_beta1", self.optimizer.beta1)
            .push("adam_beta2", self.optimizer.beta2)
            .push("adam_eps", self.optimizer.adam_eps)
            .push("adagrad_eps", self.optimizer.adagrad_eps)
            .push("seed", self.seed)
            .push("architecture", &self.architecture)
            .push("l2", self.l2);
        m
    }
}

/// Risks after one epoch, measured on the full data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// The minimized estimator with the training loss.
    pub train_surrogate: f64,
    /// The minimized estimator with the evaluation loss.
    pub train_eval: f64,
    /// PN risk with the evaluation loss on the labeled test set.
    pub test_eval: Option<f64>,
    /// Fraction of mini-batches that took the defect branch.
    pub defect_frac: f64,
}

pub const EPOCH_CSV_HEADER: &str = "epoch,train_surrogate,train_eval,test_eval,defect_frac";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.epoch,
            self.train_surrogate,
            self.train_eval,
            opt(self.test_eval),
            self.defect_frac
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub logs: Vec<EpochLog>,
}

/// `n` rows split into `batches` contiguous ranges; the last one absorbs
/// the remainder.
pub fn batch_ranges(n: usize, batches: usize, what: &str) -> Result<Vec<Range<usize>>> {
    if batches == 0 || batches > n {
        return Err(PuError::Config(format!(
            "{batches} mini-batches cannot be filled from {n} {what} points"
        )));
    }
    let size = n / batches;
    Ok((0..batches)
        .map(|i| {
            let end = if i + 1 == batches { n } else { (i + 1) * size };
            i * size..end
        })
        .collect())
}

/// Seed of the shuffle RNG for `epoch`, derived from the run seed.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The two sides paired in every mini-batch.
fn sides<'a>(data: &'a PuDataset, rule: &GradientRule) -> Result<(&'a Matrix, &'a Matrix)> {
    match rule {
        GradientRule::Pn => {
            let n = data
                .n_points
                .as_ref()
                .ok_or_else(|| PuError::Config("PN training needs a negative sample".into()))?;
            Ok((&data.p_points, n))
        }
        _ => Ok((&data.p_points, &data.u_points)),
    }
}

fn method_of(rule: &GradientRule, cfg: &TrainConfig) -> Method {
    match rule {
        GradientRule::Pn => Method::Pn,
        GradientRule::DirectUpu => Method::Upu,
        GradientRule::NonNegative { .. } => cfg.method,
    }
}

/// Value of the minimized estimator on the full training data.
fn training_risk(model: &Model, loss: &LossSpec, data: &PuDataset, method: Method) -> Result<f64> {
    let b = match method {
        Method::Pn => RiskBreakdown::evaluate(
            model,
            loss,
            &data.p_points,
            &Matrix::zeros(0, data.dim()),
            data.n_points.as_ref(),
            data.pi_p_given,
        )?,
        _ => RiskBreakdown::evaluate(model, loss, &data.p_points, &data.u_points, None, data.pi_p_given)?,
    };
    method.value(&b)
}

/// PN risk on the labeled test set, weighted by the true prior.
fn test_risk(model: &Model, loss: &LossSpec, data: &PuDataset) -> Result<Option<f64>> {
    let Some(test) = &data.test else {
        return Ok(None);
    };
    let scores = model.forward(&test.points)?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (s, &l) in scores.into_iter().zip(&test.labels) {
        if l == 1 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(PuError::InsufficientData("test set needs both classes".into()));
    }
    let b = RiskBreakdown::from_scores(loss, &pos, &[], Some(&neg), data.pi_p_true)?;
    b.pn_risk().map(Some)
}

/// One pass over the data followed by a full-data evaluation.
pub fn run_epoch(
    model: &mut Model,
    optimizer: &mut Optimizer,
    data: &PuDataset,
    cfg: &TrainConfig,
    rule: &GradientRule,
    epoch: usize,
    epoch_seed: u64,
) -> Result<EpochLog> {
    let pi_p = data.pi_p_given;
    let (first, second) = sides(data, rule)?;
    let first_ranges = batch_ranges(first.rows(), cfg.batches_per_epoch, "positive")?;
    let second_ranges = batch_ranges(
        second.rows(),
        cfg.batches_per_epoch,
        if matches!(rule, GradientRule::Pn) {
            "negative"
        } else {
            "unlabeled"
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    let mut first_order: Vec<usize> = (0..first.rows()).collect();
    let mut second_order: Vec<usize> = (0..second.rows()).collect();
    first_order.shuffle(&mut rng);
    second_order.shuffle(&mut rng);

    let mut defects = 0usize;
    for (fr, sr) in first_ranges.into_iter().zip(second_ranges) {
        let a = first.select_rows(&first_order[fr]);
        let b = second.select_rows(&second_order[sr]);
        let (gradient, discount) = match *rule {
            GradientRule::Pn => (risk::pn_gradient(model, &cfg.loss, &a, &b, pi_p)?.1, 1.0),
            GradientRule::DirectUpu => (risk::upu_gradient(model, &cfg.loss, &a, &b, pi_p)?.1, 1.0),
            GradientRule::NonNegative { beta, gamma } => {
                let step = risk::risk_gradient(model, &cfg.loss, &a, &b, pi_p, beta, gamma)?;
                if step.branch == Branch::Defect {
                    defects += 1;
                }
                (step.gradient, step.discount)
            }
        };
        optimizer.step(&mut model.parameters, &gradient.values, discount)?;
    }

    let method = method_of(rule, cfg);
    Ok(EpochLog {
        epoch,
        train_surrogate: training_risk(model, &cfg.loss, data, method)?,
        train_eval: training_risk(model, &cfg.eval_loss, data, method)?,
        test_eval: test_risk(model, &cfg.eval_loss, data)?,
        defect_frac: defects as f64 / cfg.batches_per_epoch as f64,
    })
}

/// Trains for `cfg.epochs` epochs with the rule implied by `cfg.method`.
pub fn train(data: &PuDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let rule = cfg.gradient_rule(data.pi_p_given)?;
    train_with_rule(data, cfg, rule)
}

/// Trains with an explicit update rule.
pub fn train_with_rule(data: &PuDataset, cfg: &TrainConfig, rule: GradientRule) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.validate()?;
    let arch = Architecture::parse(&cfg.architecture, data.dim())?;
    let mut model = Model::init(arch, cfg.seed).with_l2(cfg.l2);
    let mut optimizer = Optimizer::new(cfg.optimizer, model.parameters.len())?;
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let before = model.clone();
        let outcome = run_epoch(
            &mut model,
            &mut optimizer,
            data,
            cfg,
            &rule,
            epoch,
            epoch_seed(cfg.seed, epoch),
        );
        let log = match outcome {
            Ok(log) if log.train_surrogate.is_finite() => log,
            Ok(_) | Err(PuError::NonFinite(_)) => {
                return Err(PuError::Diverged {
                    epoch,
                    last_model: Box::new(before),
                    logs,
                })
            }
            Err(e) => return Err(e),
        };
        logs.push(log);
    }
    Ok(TrainOutcome { model, logs })
}
