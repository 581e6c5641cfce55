//! Datasets for PU learning: synthetic Gaussian tasks, MNIST IDX files and
//! construction of PU samples from fully labeled data.

pub mod gaussian;
pub mod idx;
pub mod quadrature;

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use gaussian::GaussianTask;
pub use idx::load_mnist_idx;

use crate::error::{PuError, Result};
use crate::matrix::Matrix;
use crate::risk::check_prior;

/// Points with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub points: Matrix,
    pub labels: Vec<i8>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    fn indices_with(&self, label: i8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn positives(&self) -> Matrix {
        self.points.select_rows(&self.indices_with(1))
    }

    pub fn negatives(&self) -> Matrix {
        self.points.select_rows(&self.indices_with(-1))
    }

    /// Fraction of positive labels.
    pub fn positive_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.len() as f64
    }

    /// Writes `x1..xd,label`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{},label", feature_header(self.dim()))?;
        for (row, label) in self.points.iter_rows().zip(&self.labels) {
            writeln!(w, "{},{label}", join(row))?;
        }
        Ok(())
    }
}

fn feature_header(d: usize) -> String {
    (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
}

fn join(row: &[f64]) -> String {
    row.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Writes an unlabeled sample as `x1..xd`.
pub fn write_unlabeled_csv(points: &Matrix, mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", feature_header(points.cols()))?;
    for row in points.iter_rows() {
        writeln!(w, "{}", join(row))?;
    }
    Ok(())
}

/// Training data for PU (and optionally PN) learning.
#[derive(Debug, Clone, PartialEq)]
pub struct PuDataset {
    pub p_points: Matrix,
    pub u_points: Matrix,
    /// Prior that generated the data.
    pub pi_p_true: f64,
    /// Prior handed to learners; differs from `pi_p_true` when misspecified.
    pub pi_p_given: f64,
    pub test: Option<LabeledSet>,
    /// Negative sample for PN baselines.
    pub n_points: Option<Matrix>,
}

impl PuDataset {
    pub fn dim(&self) -> usize {
        self.p_points.cols()
    }

    pub fn with_pi_given(mut self, pi_p_given: f64) -> Result<Self> {
        check_prior(pi_p_given)?;
        self.pi_p_given = pi_p_given;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_prior(self.pi_p_true)?;
        check_prior(self.pi_p_given)?;
        let d = self.dim();
        let mut dims = vec![self.u_points.cols()];
        dims.extend(self.test.as_ref().map(LabeledSet::dim));
        dims.extend(self.n_points.as_ref().map(Matrix::cols));
        if dims.iter().any(|&c| c != d) {
            return Err(PuError::Shape("dataset parts disagree on dimension".into()));
        }
        Ok(())
    }
}

/// `sample_task(task, n_p, n_u, n_test, seed)`.
pub fn sample_task(task: &GaussianTask, n_p: usize, n_u: usize, n_test: usize, seed: u64) -> Result<PuDataset> {
    task.sample(n_p, n_u, n_test, seed)
}

/// Size of the N sample for PN baselines: `(π_n / (2 π_p))² · n_p`,
/// rounded, at least 1.
pub fn default_negative_count(pi_p: f64, n_p: usize) -> usize {
    let ratio = (1.0 - pi_p) / (2.0 * pi_p);
    ((ratio * ratio * n_p as f64).round() as usize).max(1)
}

/// `n` rows drawn without replacement, kept in their original order.
pub fn sample_rows(points: &Matrix, n: usize, seed: u64) -> Result<Matrix> {
    if n > points.rows() {
        return Err(PuError::InsufficientData(format!(
            "{n} rows requested, {} available",
            points.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, points.rows(), n).into_vec();
    idx.sort_unstable();
    Ok(points.select_rows(&idx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnlabeledSize {
    /// Every available training point.
    AllTrain,
    Count(usize),
}

/// Builds a PU sample from labeled data.
///
/// P is `n_p` points drawn without replacement from the positives. When
/// `dependent`, U is drawn from the whole set (all of it for
/// [`UnlabeledSize::AllTrain`]) and may overlap P; otherwise U is drawn from
/// the points not chosen for P.
pub fn make_pu_from_labeled(
    labeled: &LabeledSet,
    n_p: usize,
    n_u: UnlabeledSize,
    dependent: bool,
    pi_p_given: f64,
    seed: u64,
) -> Result<PuDataset> {
    check_prior(pi_p_given)?;
    if n_p == 0 {
        return Err(PuError::Config("n_p must be at least 1".into()));
    }
    let positives = labeled.indices_with(1);
    if positives.len() < n_p {
        return Err(PuError::InsufficientData(format!(
            "{n_p} positives requested, {} available",
            positives.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p_idx: Vec<usize> = sample(&mut rng, positives.len(), n_p)
        .into_iter()
        .map(|i| positives[i])
        .collect();
    p_idx.sort_unstable();
    let pool: Vec<usize> = if dependent {
        (0..labeled.len()).collect()
    } else {
        let mut taken = vec![false; labeled.len()];
        for &i in &p_idx {
            taken[i] = true;
        }
        (0..labeled.len()).filter(|&i| !taken[i]).collect()
    };
    let u_idx: Vec<usize> = match n_u {
        UnlabeledSize::AllTrain => pool,
        UnlabeledSize::Count(n) => {
            if n == 0 || n > pool.len() {
                return Err(PuError::InsufficientData(format!(
                    "{n} unlabeled points requested from a pool of {}",
                    pool.len()
                )));
            }
            let mut idx: Vec<usize> = sample(&mut rng, pool.len(), n).into_iter().map(|i| pool[i]).collect();
            idx.sort_unstable();
            idx
        }
    };
    if u_idx.is_empty() {
        return Err(PuError::InsufficientData("unlabeled sample is empty".into()));
    }
    Ok(PuDataset {
        p_points: labeled.points.select_rows(&p_idx),
        u_points: labeled.points.select_rows(&u_idx),
        pi_p_true: labeled.positive_fraction(),
        pi_p_given,
        test: None,
        n_points: None,
    })
}
