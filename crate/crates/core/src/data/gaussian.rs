//! Gaussian class-conditional tasks with exact risk oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use super::quadrature::Integrator;
use super::{LabeledSet, PuDataset};
use crate::error::{PuError, Result};
use crate::loss::{LossKind, LossSpec};
use crate::matrix::Matrix;
use crate::model::Model;
use crate::risk::check_prior;

/// `p(x) = π_p N(mean_p, σ²I) + π_n N(mean_n, σ²I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTask {
    pub mean_p: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub sigma: f64,
    pub pi_p: f64,
}

/// Half-width, in standard deviations, of the integration window.
const TAIL: f64 = 12.0;
pub const ORACLE_TOLERANCE: f64 = 1e-9;

impl GaussianTask {
    pub fn new(mean_p: Vec<f64>, mean_n: Vec<f64>, sigma: f64, pi_p: f64) -> Result<Self> {
        if mean_p.is_empty() || mean_p.len() != mean_n.len() {
            return Err(PuError::Config("class means must be non-empty and equally long".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(PuError::Config(format!("sigma {sigma} must be positive")));
        }
        check_prior(pi_p)?;
        Ok(Self {
            mean_p,
            mean_n,
            sigma,
            pi_p,
        })
    }

    /// One-dimensional task with means ±1, σ = 1, π_p = 0.5.
    pub fn symmetric_1d() -> Self {
        Self::new(vec![1.0], vec![-1.0], 1.0, 0.5).expect("valid defaults")
    }

    /// Two-dimensional task with means ±(√2, √2), σ = 1, π_p = 0.5; the
    /// means are 2σ from the decision boundary, so the Bayes error is Φ(-2).
    pub fn planar() -> Self {
        let s = std::f64::consts::SQRT_2;
        Self::new(vec![s, s], vec![-s, -s], 1.0, 0.5).expect("valid defaults")
    }

    pub fn dim(&self) -> usize {
        self.mean_p.len()
    }

    pub fn pi_n(&self) -> f64 {
        1.0 - self.pi_p
    }

    fn draw(&self, mean: &[f64], rng: &mut impl Rng, out: &mut Vec<f64>) {
        for &m in mean {
            let z: f64 = rng.sample(StandardNormal);
            out.push(m + self.sigma * z);
        }
    }

    fn draw_class(&self, positive: bool, n: usize, rng: &mut impl Rng) -> Matrix {
        let mean = if positive { &self.mean_p } else { &self.mean_n };
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            self.draw(mean, rng, &mut data);
        }
        Matrix::new(n, self.dim(), data).expect("sized buffer")
    }

    /// `n` draws from the mixture, with each point's component.
    fn draw_mixture(&self, n: usize, rng: &mut impl Rng) -> LabeledSet {
        let mut data = Vec::with_capacity(n * self.dim());
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let positive = rng.random::<f64>() < self.pi_p;
            let mean = if positive { &self.mean_p } else { &self.mean_n };
            self.draw(mean, rng, &mut data);
            labels.push(if positive { 1 } else { -1 });
        }
        LabeledSet {
            points: Matrix::new(n, self.dim(), data).expect("sized buffer"),
            labels,
        }
    }

    /// Independent P and U samples plus a labeled test set (omitted when
    /// `n_test == 0`). Deterministic in `seed`.
    pub fn sample(&self, n_p: usize, n_u: usize, n_test: usize, seed: u64) -> Result<PuDataset> {
        if n_p == 0 || n_u == 0 {
            return Err(PuError::Config("n_p and n_u must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p_points = self.draw_class(true, n_p, &mut rng);
        let u_points = self.draw_mixture(n_u, &mut rng).points;
        let test = (n_test > 0).then(|| self.draw_mixture(n_test, &mut rng));
        Ok(PuDataset {
            p_points,
            u_points,
            pi_p_true: self.pi_p,
            pi_p_given: self.pi_p,
            test,
            n_points: None,
        })
    }

    /// Only P and U, for replication studies.
    pub fn sample_pu(&self, n_p: usize, n_u: usize, seed: u64) -> Result<(Matrix, Matrix)> {
        let ds = self.sample(n_p, n_u, 0, seed)?;
        Ok((ds.p_points, ds.u_points))
    }

    /// Mixture draws with their true components.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw_mixture(n, &mut rng)
    }

    /// Draws from the negative class only.
    pub fn sample_negatives(&self, n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw_class(false, n, &mut rng)
    }

    /// Distribution of a linear score `w·x + b` under class `positive`:
    /// normal with this mean and standard deviation.
    fn score_law(&self, w: &[f64], b: f64, positive: bool) -> (f64, f64) {
        let mean = if positive { &self.mean_p } else { &self.mean_n };
        let m = w.iter().zip(mean).map(|(a, c)| a * c).sum::<f64>() + b;
        let s = self.sigma * w.iter().map(|a| a * a).sum::<f64>().sqrt();
        (m, s)
    }

    /// `E[ℓ(label · g(X))]` for `X` from one class.
    pub fn class_conditional_risk(&self, g: &Model, loss: &LossSpec, positive: bool, label: f64) -> Result<f64> {
        let (w, b) = g
            .linear_parts()
            .ok_or_else(|| PuError::OracleUndefined("the oracle needs a linear model".into()))?;
        if w.len() != self.dim() {
            return Err(PuError::Shape(format!(
                "model dimension {} does not match task dimension {}",
                w.len(),
                self.dim()
            )));
        }
        let (m, s) = self.score_law(w, b, positive);
        if s == 0.0 {
            return Ok(loss.value(label * m));
        }
        if loss.kind == LossKind::ZeroOne {
            // P(label · g < 0); the tie g = 0 has probability zero
            return Ok(0.5 * erfc(label * m / (s * std::f64::consts::SQRT_2)));
        }
        let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let integrand = |t: f64| loss.value(label * (m + s * t)) * density(t);
        let breaks: Vec<f64> = loss.kind.kinks().iter().map(|k| (label * k - m) / s).collect();
        Integrator::default().integrate_with_breaks(integrand, -TAIL, TAIL, &breaks, ORACLE_TOLERANCE / 4.0)
    }

    /// `R(g) = π_p E_p[ℓ(g(X))] + π_n E_n[ℓ(-g(X))]` for a linear `g`.
    pub fn oracle_risk(&self, g: &Model, loss: &LossSpec) -> Result<f64> {
        let rp = self.class_conditional_risk(g, loss, true, 1.0)?;
        let rn = self.class_conditional_risk(g, loss, false, -1.0)?;
        Ok(self.pi_p * rp + self.pi_n() * rn)
    }

    /// `R_n⁻(g) = E_n[ℓ(-g(X))]`.
    pub fn negative_class_risk(&self, g: &Model, loss: &LossSpec) -> Result<f64> {
        self.class_conditional_risk(g, loss, false, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn zero_one_oracle_for_identity_score() {
        let task = GaussianTask::symmetric_1d();
        let g = Model::linear(&[1.0], 0.0).unwrap();
        let r = task.oracle_risk(&g, &LossSpec::new(LossKind::ZeroOne)).unwrap();
        let phi = Normal::standard().cdf(-1.0);
        assert!((r - phi).abs() < 1e-12);
        assert!((r - 0.158655).abs() < 1e-6);
    }

    #[test]
    fn constant_score_zero_one_is_half() {
        let task = GaussianTask::symmetric_1d();
        let g = Model::linear(&[0.0], 0.0).unwrap();
        assert_eq!(task.oracle_risk(&g, &LossSpec::new(LossKind::ZeroOne)).unwrap(), 0.5);
    }

    #[test]
    fn symmetric_task_classes_agree() {
        let task = GaussianTask::symmetric_1d();
        let g = Model::linear(&[1.0], 0.0).unwrap();
        let sig = LossSpec::new(LossKind::Sigmoid);
        let ep = task.class_conditional_risk(&g, &sig, true, 1.0).unwrap();
        let en = task.class_conditional_risk(&g, &sig, false, -1.0).unwrap();
        assert!((ep - en).abs() < 1e-9);
    }

    #[test]
    fn squared_loss_has_closed_form() {
        // E[(g - 1)²]/4 with g ~ N(m, s²) is ((m - 1)² + s²)/4
        let task = GaussianTask::new(vec![0.5, -1.0], vec![0.0, 0.0], 0.7, 0.3).unwrap();
        let g = Model::linear(&[2.0, 1.0], 0.25).unwrap();
        let sq = LossSpec::new(LossKind::Squared);
        let m = 2.0 * 0.5 - 1.0 + 0.25;
        let s2 = 0.49 * 5.0;
        let exact = ((m - 1.0) * (m - 1.0) + s2) / 4.0;
        let got = task.class_conditional_risk(&g, &sq, true, 1.0).unwrap();
        assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
    }

    #[test]
    fn hinge_oracle_has_closed_form() {
        // E[max(0, 1 - Z)] for Z ~ N(m, s²) = (1-m)Φ((1-m)/s) + s φ((1-m)/s)
        let task = GaussianTask::symmetric_1d();
        let g = Model::linear(&[1.3], -0.2).unwrap();
        let hinge = LossSpec::new(LossKind::Hinge);
        let (m, s) = (1.3 - 0.2, 1.3);
        let n = Normal::standard();
        let a = (1.0 - m) / s;
        let exact = (1.0 - m) * n.cdf(a) + s * (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let got = task.class_conditional_risk(&g, &hinge, true, 1.0).unwrap();
        assert!((got - exact).abs() < 1e-9);
    }

    #[test]
    fn nonlinear_model_has_no_oracle() {
        let task = GaussianTask::symmetric_1d();
        let arch = crate::model::Architecture::mlp(1, &[2], crate::model::Activation::Relu).unwrap();
        let g = Model::init(arch, 0);
        assert!(matches!(
            task.oracle_risk(&g, &LossSpec::new(LossKind::Sigmoid)),
            Err(PuError::OracleUndefined(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let task = GaussianTask::planar();
        let a = task.sample(5, 20, 10, 3).unwrap();
        let b = task.sample(5, 20, 10, 3).unwrap();
        assert_eq!(a.p_points, b.p_points);
        assert_eq!(a.u_points, b.u_points);
        assert_eq!(a.test.unwrap().labels, b.test.unwrap().labels);
        let c = task.sample(5, 20, 10, 4).unwrap();
        assert_ne!(a.p_points, c.p_points);
    }
}
