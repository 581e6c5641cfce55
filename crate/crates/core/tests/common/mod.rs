#![allow(dead_code)]

use pulearn::{Matrix, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Central differences of `f` around the model's parameters.
pub fn finite_difference(model: &Model, h: f64, f: impl Fn(&Model) -> f64) -> Vec<f64> {
    let mut probe = model.clone();
    (0..model.parameters.len())
        .map(|i| {
            let orig = probe.parameters[i];
            probe.parameters[i] = orig + h;
            let up = f(&probe);
            probe.parameters[i] = orig - h;
            let down = f(&probe);
            probe.parameters[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
