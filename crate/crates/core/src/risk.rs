//! Empirical risk estimators for PN and PU learning.
//!
//! With `π_n = 1 - π_p` and partial risks
//!
//! ```text
//! R̂p⁺ = mean_P ℓ(g(x))    R̂p⁻ = mean_P ℓ(-g(x))
//! R̂u⁻ = mean_U ℓ(-g(x))   R̂n⁻ = mean_N ℓ(-g(x))
//! ```
//!
//! the estimators are
//!
//! ```text
//! PN:   π_p R̂p⁺ + π_n R̂n⁻
//! uPU:  π_p R̂p⁺ - π_p R̂p⁻ + R̂u⁻
//! nnPU: π_p R̂p⁺ + max{0, R̂u⁻ - π_p R̂p⁻}
//! ```
//!
//! uPU is unbiased but can go negative; nnPU clips the estimated negative
//! class risk at zero.

use std::fmt;
use std::str::FromStr;

use crate::error::{PuError, Result};
use crate::loss::LossSpec;
use crate::matrix::Matrix;
use crate::model::{ForwardPass, GradientBuffer, Model};
use crate::numeric::mean_by;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBreakdown {
    pub r_p_plus: f64,
    pub r_p_minus: f64,
    pub r_u_minus: f64,
    pub r_n_minus: Option<f64>,
    pub pi_p: f64,
    pub n_p: usize,
    pub n_u: usize,
    pub n_n: usize,
}

pub const CSV_HEADER: &str = "r_p_plus,r_p_minus,r_u_minus,r_n_minus,pi_p,n_p,n_u,n_n";

pub(crate) fn check_prior(pi_p: f64) -> Result<()> {
    if pi_p > 0.0 && pi_p < 1.0 {
        Ok(())
    } else {
        Err(PuError::Config(format!("class prior {pi_p} must lie in (0, 1)")))
    }
}

fn mean_loss(loss: &LossSpec, scores: &[f64], label: f64) -> f64 {
    mean_by(scores, |&s| loss.value(label * s))
}

impl RiskBreakdown {
    /// Partial risks from precomputed scores. `u_scores` may be empty only
    /// when negative scores are supplied (PN mode).
    pub fn from_scores(
        loss: &LossSpec,
        p_scores: &[f64],
        u_scores: &[f64],
        n_scores: Option<&[f64]>,
        pi_p: f64,
    ) -> Result<Self> {
        check_prior(pi_p)?;
        if p_scores.is_empty() {
            return Err(PuError::EmptyBatch("positive sample is empty".into()));
        }
        if u_scores.is_empty() && n_scores.is_none_or(|n| n.is_empty()) {
            return Err(PuError::EmptyBatch(
                "need a non-empty unlabeled or negative sample".into(),
            ));
        }
        let r_u_minus = if u_scores.is_empty() {
            0.0
        } else {
            mean_loss(loss, u_scores, -1.0)
        };
        let r_n_minus = match n_scores {
            Some([]) => return Err(PuError::EmptyBatch("negative sample is empty".into())),
            Some(n) => Some(mean_loss(loss, n, -1.0)),
            None => None,
        };
        Ok(Self {
            r_p_plus: mean_loss(loss, p_scores, 1.0),
            r_p_minus: mean_loss(loss, p_scores, -1.0),
            r_u_minus,
            r_n_minus,
            pi_p,
            n_p: p_scores.len(),
            n_u: u_scores.len(),
            n_n: n_scores.map_or(0, <[f64]>::len),
        })
    }

    /// Scores the samples with `model` and computes the partial risks.
    pub fn evaluate(
        model: &Model,
        loss: &LossSpec,
        p: &Matrix,
        u: &Matrix,
        n: Option<&Matrix>,
        pi_p: f64,
    ) -> Result<Self> {
        let ps = model.forward(p)?;
        let us = model.forward(u)?;
        let ns = n.map(|n| model.forward(n)).transpose()?;
        Self::from_scores(loss, &ps, &us, ns.as_deref(), pi_p)
    }

    pub fn pi_n(&self) -> f64 {
        1.0 - self.pi_p
    }

    /// `R̂u⁻ - π_p R̂p⁻`, the estimated negative-class risk.
    pub fn negative_part(&self) -> f64 {
        self.r_u_minus - self.pi_p * self.r_p_minus
    }

    pub fn pn_risk(&self) -> Result<f64> {
        let r_n = self
            .r_n_minus
            .ok_or_else(|| PuError::Config("PN risk needs a negative sample".into()))?;
        Ok(self.pi_p * self.r_p_plus + self.pi_n() * r_n)
    }

    /// Evaluated as `π_p R̂p⁺ + (R̂u⁻ - π_p R̂p⁻)` so that it shares its
    /// rounding with [`RiskBreakdown::nnpu_risk`] and never exceeds it.
    pub fn upu_risk(&self) -> f64 {
        self.pi_p * self.r_p_plus + self.negative_part()
    }

    pub fn nnpu_risk(&self) -> f64 {
        self.pi_p * self.r_p_plus + self.negative_part().max(0.0)
    }

    pub fn csv_row(&self) -> String {
        let r_n = self.r_n_minus.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.r_p_plus, self.r_p_minus, self.r_u_minus, r_n, self.pi_p, self.n_p, self.n_u, self.n_n
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Pn,
    Upu,
    Nnpu,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Pn => "pn",
            Estimator::Upu => "upu",
            Estimator::Nnpu => "nnpu",
        }
    }

    pub fn value(self, b: &RiskBreakdown) -> Result<f64> {
        match self {
            Estimator::Pn => b.pn_risk(),
            Estimator::Upu => Ok(b.upu_risk()),
            Estimator::Nnpu => Ok(b.nnpu_risk()),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = PuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pn" => Ok(Estimator::Pn),
            "upu" => Ok(Estimator::Upu),
            "nnpu" => Ok(Estimator::Nnpu),
            other => Err(PuError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Which update rule a mini-batch took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Normal,
    Defect,
}

/// Output of [`risk_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepGradient {
    pub gradient: GradientBuffer,
    pub branch: Branch,
    pub discount: f64,
    /// `R̂u⁻ - π_p R̂p⁻` on the mini-batch.
    pub r: f64,
    pub breakdown: RiskBreakdown,
}

/// Gradients of the partial risks, without weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialGradients {
    pub p_plus: GradientBuffer,
    pub p_minus: GradientBuffer,
    pub u_minus: Option<GradientBuffer>,
    pub n_minus: Option<GradientBuffer>,
}

/// `∇_θ mean_i ℓ(label · g(x_i))` from a cached pass.
fn mean_loss_gradient(model: &Model, loss: &LossSpec, pass: &ForwardPass, label: f64) -> Result<GradientBuffer> {
    let n = pass.rows() as f64;
    let upstream = pass
        .scores()
        .iter()
        .map(|&s| loss.derivative(label * s).map(|d| d * label / n))
        .collect::<Result<Vec<_>>>()?;
    model.backward_unregularized(pass, &upstream)
}

fn nonempty(m: &Matrix, what: &str) -> Result<()> {
    if m.is_empty() {
        Err(PuError::EmptyBatch(format!("{what} batch is empty")))
    } else {
        Ok(())
    }
}

/// Partial risks and their gradients on the given samples, one backward
/// pass per partial risk.
pub fn partial_gradients(
    model: &Model,
    loss: &LossSpec,
    p: &Matrix,
    u: Option<&Matrix>,
    n: Option<&Matrix>,
    pi_p: f64,
) -> Result<(RiskBreakdown, PartialGradients)> {
    nonempty(p, "positive")?;
    let p_pass = model.forward_pass(p)?;
    let u_pass = u
        .map(|u| nonempty(u, "unlabeled").and_then(|_| model.forward_pass(u)))
        .transpose()?;
    let n_pass = n
        .map(|n| nonempty(n, "negative").and_then(|_| model.forward_pass(n)))
        .transpose()?;
    let breakdown = RiskBreakdown::from_scores(
        loss,
        p_pass.scores(),
        u_pass.as_ref().map_or(&[], ForwardPass::scores),
        n_pass.as_ref().map(ForwardPass::scores),
        pi_p,
    )?;
    let grads = PartialGradients {
        p_plus: mean_loss_gradient(model, loss, &p_pass, 1.0)?,
        p_minus: mean_loss_gradient(model, loss, &p_pass, -1.0)?,
        u_minus: u_pass
            .as_ref()
            .map(|pass| mean_loss_gradient(model, loss, pass, -1.0))
            .transpose()?,
        n_minus: n_pass
            .as_ref()
            .map(|pass| mean_loss_gradient(model, loss, pass, -1.0))
            .transpose()?,
    };
    Ok((breakdown, grads))
}

fn expect_u(g: &PartialGradients) -> &GradientBuffer {
    g.u_minus.as_ref().expect("unlabeled gradient present")
}

/// `π_p ∇R̂p⁺ - π_p ∇R̂p⁻ + ∇R̂u⁻`
fn combine_upu(pi_p: f64, g: &PartialGradients) -> GradientBuffer {
    let mut out = g.p_plus.scaled(pi_p);
    out.add_scaled(-pi_p, &g.p_minus);
    out.add_scaled(1.0, expect_u(g));
    out
}

/// `π_p ∇R̂p⁻ - ∇R̂u⁻`
fn combine_defect(pi_p: f64, g: &PartialGradients) -> GradientBuffer {
    let mut out = g.p_minus.scaled(pi_p);
    out.add_scaled(-1.0, expect_u(g));
    out
}

/// Checks `0 <= β <= π_p · sup ℓ` (upper bound only for bounded losses)
/// and `0 <= γ <= 1`.
pub fn check_beta_gamma(loss: &LossSpec, pi_p: f64, beta: f64, gamma: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(PuError::Config(format!("beta {beta} must be finite and >= 0")));
    }
    if loss.is_bounded() && beta > pi_p * loss.sup_value {
        return Err(PuError::Config(format!(
            "beta {beta} exceeds pi_p * sup loss = {}",
            pi_p * loss.sup_value
        )));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(PuError::Config(format!("gamma {gamma} outside [0, 1]")));
    }
    Ok(())
}

/// One mini-batch of the non-negative PU update rule.
///
/// When `r = R̂u⁻ - π_p R̂p⁻ >= -β` the gradient of the uPU risk is returned
/// with discount 1; otherwise the gradient of `-r` with discount `γ`.
/// Weight decay is added in both branches.
pub fn risk_gradient(
    model: &Model,
    loss: &LossSpec,
    p_batch: &Matrix,
    u_batch: &Matrix,
    pi_p: f64,
    beta: f64,
    gamma: f64,
) -> Result<StepGradient> {
    check_prior(pi_p)?;
    check_beta_gamma(loss, pi_p, beta, gamma)?;
    let (breakdown, partials) = partial_gradients(model, loss, p_batch, Some(u_batch), None, pi_p)?;
    let r = breakdown.negative_part();
    let (mut gradient, branch, discount) = if r >= -beta {
        (combine_upu(pi_p, &partials), Branch::Normal, 1.0)
    } else {
        (combine_defect(pi_p, &partials), Branch::Defect, gamma)
    };
    model.add_weight_decay(&mut gradient);
    Ok(StepGradient {
        gradient,
        branch,
        discount,
        r,
        breakdown,
    })
}

/// Mini-batch gradient of the uPU risk, with no branching.
pub fn upu_gradient(
    model: &Model,
    loss: &LossSpec,
    p_batch: &Matrix,
    u_batch: &Matrix,
    pi_p: f64,
) -> Result<(RiskBreakdown, GradientBuffer)> {
    check_prior(pi_p)?;
    let (breakdown, partials) = partial_gradients(model, loss, p_batch, Some(u_batch), None, pi_p)?;
    let mut gradient = combine_upu(pi_p, &partials);
    model.add_weight_decay(&mut gradient);
    Ok((breakdown, gradient))
}

/// Mini-batch gradient of the PN risk.
pub fn pn_gradient(
    model: &Model,
    loss: &LossSpec,
    p_batch: &Matrix,
    n_batch: &Matrix,
    pi_p: f64,
) -> Result<(RiskBreakdown, GradientBuffer)> {
    check_prior(pi_p)?;
    let (breakdown, partials) = partial_gradients(model, loss, p_batch, None, Some(n_batch), pi_p)?;
    let mut gradient = partials.p_plus.scaled(pi_p);
    gradient.add_scaled(
        1.0 - pi_p,
        partials.n_minus.as_ref().expect("negative gradient present"),
    );
    model.add_weight_decay(&mut gradient);
    Ok((breakdown, gradient))
}

/// Value and gradient of a full-sample objective: the estimator plus the
/// model's weight penalty. For nnPU the clipped branch contributes no
/// gradient when the negative part is below zero.
pub fn estimator_gradient(
    model: &Model,
    loss: &LossSpec,
    estimator: Estimator,
    p: &Matrix,
    u: Option<&Matrix>,
    n: Option<&Matrix>,
    pi_p: f64,
) -> Result<(f64, GradientBuffer)> {
    check_prior(pi_p)?;
    let (b, g) = match estimator {
        Estimator::Pn => {
            let n = n.ok_or_else(|| PuError::Config("PN objective needs a negative sample".into()))?;
            partial_gradients(model, loss, p, None, Some(n), pi_p)?
        }
        Estimator::Upu | Estimator::Nnpu => {
            let u = u.ok_or_else(|| PuError::Config("PU objective needs an unlabeled sample".into()))?;
            partial_gradients(model, loss, p, Some(u), None, pi_p)?
        }
    };
    let value = estimator.value(&b)?;
    let mut grad = match estimator {
        Estimator::Pn => {
            let mut out = g.p_plus.scaled(pi_p);
            out.add_scaled(1.0 - pi_p, g.n_minus.as_ref().expect("negative gradient present"));
            out
        }
        Estimator::Upu => combine_upu(pi_p, &g),
        Estimator::Nnpu => {
            if b.negative_part() >= 0.0 {
                combine_upu(pi_p, &g)
            } else {
                g.p_plus.scaled(pi_p)
            }
        }
    };
    model.add_weight_decay(&mut grad);
    Ok((value + model.weight_penalty(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;
    use proptest::prelude::*;

    fn breakdown(r_p_plus: f64, r_p_minus: f64, r_u_minus: f64, r_n_minus: Option<f64>, pi_p: f64) -> RiskBreakdown {
        RiskBreakdown {
            r_p_plus,
            r_p_minus,
            r_u_minus,
            r_n_minus,
            pi_p,
            n_p: 1,
            n_u: 1,
            n_n: r_n_minus.map_or(0, |_| 1),
        }
    }

    #[test]
    fn pn_risk_examples() {
        assert_eq!(breakdown(0.0, 0.0, 0.0, Some(0.0), 0.5).pn_risk().unwrap(), 0.0);
        assert_eq!(breakdown(1.0, 0.0, 0.0, Some(1.0), 0.5).pn_risk().unwrap(), 1.0);
        let r = breakdown(0.25, 0.0, 0.0, Some(0.5), 0.4).pn_risk().unwrap();
        assert!((r - 0.4).abs() < 1e-15);
        assert!(breakdown(0.25, 0.0, 0.0, None, 0.4).pn_risk().is_err());
    }

    #[test]
    fn upu_goes_negative_and_nnpu_clips() {
        // one P point scored positive, one U point scored negative
        let zo = LossSpec::new(LossKind::ZeroOne);
        let b = RiskBreakdown::from_scores(&zo, &[1.0], &[-1.0], None, 0.5).unwrap();
        assert_eq!((b.r_p_plus, b.r_p_minus, b.r_u_minus), (0.0, 1.0, 0.0));
        assert_eq!(b.upu_risk(), -0.5);
        assert_eq!(b.nnpu_risk(), 0.0);
    }

    #[test]
    fn cancellation_and_inactive_max() {
        let b = breakdown(0.3, 0.3, 0.7, None, 0.25);
        assert!((b.upu_risk() - 0.7).abs() < 1e-15);
        let b = breakdown(0.2, 0.4, 0.6, None, 0.5);
        assert_eq!(b.nnpu_risk(), b.upu_risk());
        assert_eq!(breakdown(0.0, 0.0, 0.0, None, 0.5).nnpu_risk(), 0.0);
    }

    #[test]
    fn csv_row_matches_header() {
        let b = breakdown(0.5, 0.25, 0.125, None, 0.5);
        assert_eq!(b.csv_row(), "0.5,0.25,0.125,,0.5,1,1,0");
        assert_eq!(CSV_HEADER.split(',').count(), b.csv_row().split(',').count());
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let s = LossSpec::new(LossKind::Sigmoid);
        assert!(RiskBreakdown::from_scores(&s, &[], &[1.0], None, 0.5).is_err());
        assert!(RiskBreakdown::from_scores(&s, &[1.0], &[], None, 0.5).is_err());
        assert!(RiskBreakdown::from_scores(&s, &[1.0], &[1.0], None, 1.0).is_err());
        assert!(check_beta_gamma(&s, 0.5, 0.6, 1.0).is_err());
        assert!(check_beta_gamma(&s, 0.5, 0.5, 1.0).is_ok());
        assert!(check_beta_gamma(&s, 0.5, -0.1, 1.0).is_err());
        assert!(check_beta_gamma(&s, 0.5, 0.0, 1.5).is_err());
        assert!(check_beta_gamma(&LossSpec::new(LossKind::Logistic), 0.5, 100.0, 1.0).is_ok());
    }

    fn linear_setup() -> (Model, Matrix, Matrix) {
        let m = Model::linear(&[1.5, -0.5], 0.2).unwrap();
        let p = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0], vec![0.5, -1.0]]).unwrap();
        let u = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.3, 0.3], vec![-2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        (m, p, u)
    }

    #[test]
    fn maximal_beta_never_defects() {
        let s = LossSpec::new(LossKind::Sigmoid);
        let (m, p, _) = linear_setup();
        // U far on the negative side makes r strongly negative
        let u = Matrix::from_rows(&[vec![-30.0, 0.0]]).unwrap();
        let at_max = risk_gradient(&m, &s, &p, &u, 0.5, 0.5 * s.sup_value, 0.5).unwrap();
        assert!(at_max.r < 0.0);
        assert_eq!(at_max.branch, Branch::Normal);
        assert_eq!(at_max.discount, 1.0);
        let zero = risk_gradient(&m, &s, &p, &u, 0.5, 0.0, 0.5).unwrap();
        assert_eq!(zero.branch, Branch::Defect);
        assert_eq!(zero.discount, 0.5);
    }

    #[test]
    fn defect_gradient_is_negated_negative_part() {
        let s = LossSpec::new(LossKind::Sigmoid);
        let (m, p, _) = linear_setup();
        let u = Matrix::from_rows(&[vec![-30.0, 0.0], vec![-10.0, 2.0]]).unwrap();
        let step = risk_gradient(&m, &s, &p, &u, 0.4, 0.0, 1.0).unwrap();
        assert_eq!(step.branch, Branch::Defect);
        let (_, g) = partial_gradients(&m, &s, &p, Some(&u), None, 0.4).unwrap();
        // the normal gradient's component ∇(R̂u⁻ - π_p R̂p⁻)
        let mut component = g.u_minus.clone().unwrap();
        component.add_scaled(-0.4, &g.p_minus);
        for (a, b) in step.gradient.values.iter().zip(&component.values) {
            assert!((a + b).abs() <= 1e-12);
        }
    }

    #[test]
    fn ties_route_to_normal_branch() {
        // r = 0 exactly: zero-one-like setup via ramp with saturated scores
        let ramp = LossSpec::new(LossKind::Ramp);
        let m = Model::linear(&[1.0], 0.0).unwrap();
        let p = Matrix::column(vec![-5.0]);
        let u = Matrix::column(vec![-5.0]);
        // r_p_minus = ramp(5) = 0, r_u_minus = ramp(5) = 0
        let step = risk_gradient(&m, &ramp, &p, &u, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(step.r, 0.0);
        assert_eq!(step.branch, Branch::Normal);
    }

    #[test]
    fn upu_gradient_matches_normal_branch_bitwise() {
        let s = LossSpec::new(LossKind::Sigmoid);
        let (m, p, u) = linear_setup();
        let m = m.with_l2(0.01);
        let step = risk_gradient(&m, &s, &p, &u, 0.5, 0.5, 1.0).unwrap();
        let (_, direct) = upu_gradient(&m, &s, &p, &u, 0.5).unwrap();
        assert_eq!(step.gradient, direct);
    }

    #[test]
    fn zero_one_gradient_is_rejected() {
        let zo = LossSpec::new(LossKind::ZeroOne);
        let (m, p, u) = linear_setup();
        assert!(matches!(
            risk_gradient(&m, &zo, &p, &u, 0.5, 0.0, 1.0),
            Err(PuError::UnsupportedDerivative(_))
        ));
    }

    proptest! {
        #[test]
        fn nnpu_dominates_upu(
            a in 0.0f64..3.0, b in 0.0f64..3.0, c in 0.0f64..3.0, pi in 0.01f64..0.99
        ) {
            let br = breakdown(a, b, c, None, pi);
            prop_assert!(br.nnpu_risk() >= 0.0);
            prop_assert!(br.nnpu_risk() >= br.upu_risk());
            prop_assert_eq!(br.nnpu_risk() == br.upu_risk(), br.negative_part() >= 0.0);
        }

        #[test]
        fn symmetric_losses_reduce_upu(
            ps in proptest::collection::vec(-5.0f64..5.0, 1..20),
            us in proptest::collection::vec(-5.0f64..5.0, 1..20),
            pi in 0.05f64..0.95,
        ) {
            for kind in [LossKind::Sigmoid, LossKind::Ramp, LossKind::ZeroOne] {
                let b = RiskBreakdown::from_scores(&LossSpec::new(kind), &ps, &us, None, pi).unwrap();
                prop_assert!((b.r_p_plus + b.r_p_minus - 1.0).abs() <= 1e-12);
                let reduced = 2.0 * pi * b.r_p_plus + b.r_u_minus - pi;
                prop_assert!((b.upu_risk() - reduced).abs() <= 1e-12);
            }
        }
    }
}
