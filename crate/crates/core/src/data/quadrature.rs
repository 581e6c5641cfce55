//! Adaptive Gauss–Legendre quadrature.

use crate::error::{PuError, Result};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on [-1, 1],
/// found by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive integrator: an interval is accepted when the fixed-order rule
/// and the sum over its two halves agree within the local tolerance.
pub struct Integrator {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    max_depth: u32,
}

impl Default for Integrator {
    fn default() -> Self {
        Self::new(20, 40)
    }
}

impl Integrator {
    pub fn new(order: usize, max_depth: u32) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self {
            nodes,
            weights,
            max_depth,
        }
    }

    fn rule(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// `∫_a^b f` to absolute tolerance `tol`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
        let whole = self.rule(&f, a, b);
        self.refine(&f, a, b, whole, tol, 0)
    }

    /// Integrates piecewise over sorted breakpoints inside `[a, b]`, so that
    /// kinks of the integrand fall on interval ends.
    pub fn integrate_with_breaks(
        &self,
        f: impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        breaks: &[f64],
        tol: f64,
    ) -> Result<f64> {
        let mut points = vec![a];
        let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        points.extend(inner);
        points.push(b);
        let pieces = (points.len() - 1) as f64;
        let mut total = 0.0;
        for w in points.windows(2) {
            total += self.integrate(&f, w[0], w[1], tol / pieces)?;
        }
        Ok(total)
    }

    fn refine(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let mid = 0.5 * (a + b);
        let left = self.rule(f, a, mid);
        let right = self.rule(f, mid, b);
        let split = left + right;
        if (split - whole).abs() <= tol {
            return Ok(split);
        }
        if depth >= self.max_depth {
            return Err(PuError::Quadrature {
                lo: a,
                hi: b,
                tolerance: tol,
            });
        }
        Ok(
            self.refine(f, a, mid, left, 0.5 * tol, depth + 1)?
                + self.refine(f, mid, b, right, 0.5 * tol, depth + 1)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_two() {
        for n in [1, 2, 5, 20] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn exact_for_polynomials() {
        // an n-point rule integrates degree 2n-1 exactly
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = Integrator::default().integrate(phi, -12.0, 12.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand_with_breakpoints() {
        let v = Integrator::default()
            .integrate_with_breaks(|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1e-12)
            .unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let integ = Integrator::new(2, 3);
        let r = integ.integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1e-14);
        assert!(matches!(r, Err(PuError::Quadrature { .. })));
    }
}
