mod common;

use common::{finite_difference, random_matrix, relative_error, rng};
use pulearn::risk::{estimator_gradient, partial_gradients};
use pulearn::{Activation, Architecture, Estimator, LossKind, LossSpec, Matrix, Model};
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn architectures() -> Vec<Architecture> {
    let mut out = vec![Architecture::linear(3).unwrap()];
    for act in [Activation::Relu, Activation::Softsign] {
        out.push(Architecture::mlp(3, &[7], act).unwrap());
        out.push(Architecture::mlp(3, &[6, 5, 4, 3], act).unwrap());
    }
    out
}

/// A model and batches whose relu pre-activations all sit at least 1e-4
/// away from zero.
fn draw(arch: &Architecture, seed: u64, batches: usize) -> (Model, Vec<Matrix>) {
    let mut r = rng(seed);
    loop {
        let mut model = Model::init(arch.clone(), r.random());
        for p in model.parameters.iter_mut() {
            *p += r.random_range(-0.3..0.3);
        }
        let xs: Vec<Matrix> = (0..batches)
            .map(|_| {
                let n = r.random_range(2..9);
                random_matrix(&mut r, n, arch.input_dim(), 2.0)
            })
            .collect();
        let clear = xs
            .iter()
            .all(|x| model.hidden_preactivations(x).unwrap().iter().all(|a| a.abs() >= 1e-4));
        if clear {
            return (model, xs);
        }
    }
}

#[test]
fn backward_matches_finite_differences() {
    for arch in architectures() {
        for draw_idx in 0..10 {
            let (model, xs) = draw(&arch, 100 + draw_idx, 1);
            let model = model.with_l2(0.01);
            let x = &xs[0];
            let mut r = rng(draw_idx);
            let upstream: Vec<f64> = (0..x.rows()).map(|_| r.random_range(-1.0..1.0)).collect();
            let analytic = model.backward(x, &upstream).unwrap();
            let objective = |m: &Model| {
                let s = m.forward(x).unwrap();
                s.iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>() + m.weight_penalty()
            };
            let fd = finite_difference(&model, H, objective);
            let err = relative_error(&analytic.values, &fd);
            assert!(err <= TOL, "{arch}: relative error {err:e}");
            assert!(analytic.is_finite());
        }
    }
}

#[test]
fn backward_is_linear_in_upstream() {
    let arch = Architecture::mlp(3, &[5, 4], Activation::Relu).unwrap();
    let (model, xs) = draw(&arch, 9, 1);
    let x = &xs[0];
    let u: Vec<f64> = (0..x.rows()).map(|i| i as f64 - 1.5).collect();
    let alpha = -2.75;
    let scaled: Vec<f64> = u.iter().map(|v| alpha * v).collect();
    let a = model.backward(x, &scaled).unwrap();
    let b = model.backward(x, &u).unwrap().scaled(alpha);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn forward_is_bitwise_deterministic() {
    let arch = Architecture::mlp(3, &[20, 20], Activation::Softsign).unwrap();
    let (model, xs) = draw(&arch, 4, 1);
    assert_eq!(model.forward(&xs[0]).unwrap(), model.forward(&xs[0]).unwrap());
    let pass = model.forward_pass(&xs[0]).unwrap();
    assert_eq!(pass.scores(), model.forward(&xs[0]).unwrap().as_slice());
}

fn check_estimator(estimator: Estimator, loss: LossSpec) {
    let pi_p = 0.4;
    let mut checked = 0;
    let mut seed = 0;
    while checked < 10 {
        seed += 1;
        let arch = architectures()[(seed as usize) % 5].clone();
        let (model, xs) = draw(&arch, 1000 + seed, 3);
        let (p, u, n) = (&xs[0], &xs[1], &xs[2]);
        let (b, _) = partial_gradients(&model, &loss, p, Some(u), None, pi_p).unwrap();
        if estimator == Estimator::Nnpu && b.negative_part().abs() <= 1e-3 {
            continue;
        }
        let (value, grad) = estimator_gradient(&model, &loss, estimator, p, Some(u), Some(n), pi_p).unwrap();
        let objective = |m: &Model| {
            estimator_gradient(m, &loss, estimator, p, Some(u), Some(n), pi_p)
                .unwrap()
                .0
        };
        assert_eq!(value, objective(&model));
        let fd = finite_difference(&model, H, objective);
        let err = relative_error(&grad.values, &fd);
        assert!(err <= TOL, "{estimator} on {arch}: relative error {err:e}");
        checked += 1;
    }
}

#[test]
fn estimator_gradients_match_finite_differences() {
    for est in [Estimator::Pn, Estimator::Upu, Estimator::Nnpu] {
        check_estimator(est, LossSpec::new(LossKind::Sigmoid));
        check_estimator(est, LossSpec::new(LossKind::Logistic));
        check_estimator(est, LossSpec::new(LossKind::Squared));
    }
}

#[test]
fn nnpu_gradient_covers_both_sides_of_the_clip() {
    // scoring P above U drives the negative part below zero
    let loss = LossSpec::new(LossKind::Sigmoid);
    let p = Matrix::column(vec![1.0, 1.5, 2.0]);
    let u = Matrix::column(vec![-2.0, -1.5, -1.0, -0.5]);
    let mut signs = Vec::new();
    for w in [-3.0, 3.0] {
        let model = Model::linear(&[w], 0.1).unwrap();
        let (b, _) = partial_gradients(&model, &loss, &p, Some(&u), None, 0.5).unwrap();
        signs.push(b.negative_part() > 0.0);
        let objective = |m: &Model| {
            estimator_gradient(m, &loss, Estimator::Nnpu, &p, Some(&u), None, 0.5)
                .unwrap()
                .0
        };
        let (_, g) = estimator_gradient(&model, &loss, Estimator::Nnpu, &p, Some(&u), None, 0.5).unwrap();
        let fd = finite_difference(&model, H, objective);
        assert!(relative_error(&g.values, &fd) <= TOL);
    }
    assert_eq!(signs, vec![true, false]);
}
