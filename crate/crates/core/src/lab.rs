//! Replicated sampling studies of the uPU and nnPU estimators at a fixed
//! linear classifier.
//!
//! Replication `r` draws a fresh `(P, U)` pair with seed `base_seed + r`,
//! evaluates both estimators on the same partial risks and records the
//! outcome. Replications run in parallel; results are collected in index
//! order and reduced sequentially, so every statistic is reproducible.

use rayon::prelude::*;

use crate::csv::{CsvTable, Metadata};
use crate::data::GaussianTask;
use crate::error::{PuError, Result};
use crate::loss::LossSpec;
use crate::model::Model;
use crate::risk::RiskBreakdown;

pub const MIN_REPLICATIONS: usize = 100;

/// One sampled dataset's estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub upu: f64,
    pub nnpu: f64,
    /// `R̂u⁻ - π_p R̂p⁻`; negative exactly on the D⁻ event.
    pub negative_part: f64,
    pub r_p_plus: f64,
}

impl Replication {
    pub fn in_d_minus(&self) -> bool {
        self.negative_part < 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStats {
    pub replications: usize,
    pub n_p: usize,
    pub n_u: usize,
    pub oracle_risk: f64,
    pub mean_upu: f64,
    pub mean_nnpu: f64,
    pub bias_upu: f64,
    pub bias_nnpu: f64,
    pub mse_upu: f64,
    pub mse_nnpu: f64,
    pub pr_d_minus: f64,
    pub stderr_upu: f64,
    pub stderr_nnpu: f64,
    /// Mean of `R̃pu - R̂pu` over replications.
    pub mean_excess: f64,
    pub stderr_excess: f64,
    /// Replications that fell in D⁻.
    pub d_minus_events: usize,
    /// Replications where the estimators differ.
    pub differing: usize,
}

pub const STATS_CSV_HEADER: &str = "n_p,n_u,replications,oracle_risk,mean_upu,mean_nnpu,bias_upu,bias_nnpu,\
mse_upu,mse_nnpu,pr_d_minus,stderr_upu,stderr_nnpu,mean_excess,stderr_excess,d_minus_events,differing";

impl EstimatorStats {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_p,
            self.n_u,
            self.replications,
            self.oracle_risk,
            self.mean_upu,
            self.mean_nnpu,
            self.bias_upu,
            self.bias_nnpu,
            self.mse_upu,
            self.mse_nnpu,
            self.pr_d_minus,
            self.stderr_upu,
            self.stderr_nnpu,
            self.mean_excess,
            self.stderr_excess,
            self.d_minus_events,
            self.differing
        )
    }

    /// Wilson score interval for `pr_d_minus` at normal quantile `z`.
    pub fn pr_d_minus_interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.d_minus_events, self.replications, z)
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Sample mean and standard error of the mean.
fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_replications(replications: usize) -> Result<()> {
    if replications < MIN_REPLICATIONS {
        return Err(PuError::Config(format!(
            "at least {MIN_REPLICATIONS} replications required, got {replications}"
        )));
    }
    Ok(())
}

/// Raw per-replication estimates.
pub fn replicate_records(
    task: &GaussianTask,
    g: &Model,
    loss: &LossSpec,
    n_p: usize,
    n_u: usize,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<Replication>> {
    check_replications(replications)?;
    if g.linear_parts().is_none() {
        return Err(PuError::OracleUndefined("studies need a linear classifier".into()));
    }
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let (p, u) = task.sample_pu(n_p, n_u, base_seed.wrapping_add(r as u64))?;
            let b = RiskBreakdown::evaluate(g, loss, &p, &u, None, task.pi_p)?;
            Ok(Replication {
                upu: b.upu_risk(),
                nnpu: b.nnpu_risk(),
                negative_part: b.negative_part(),
                r_p_plus: b.r_p_plus,
            })
        })
        .collect()
}

/// Aggregates replications against a known oracle risk.
pub fn summarize(records: &[Replication], oracle_risk: f64, n_p: usize, n_u: usize) -> EstimatorStats {
    let reps = records.len();
    let n = reps as f64;
    let (mean_upu, stderr_upu) = mean_and_stderr(records.iter().map(|r| r.upu));
    let (mean_nnpu, stderr_nnpu) = mean_and_stderr(records.iter().map(|r| r.nnpu));
    let (mean_excess, stderr_excess) = mean_and_stderr(records.iter().map(|r| r.nnpu - r.upu));
    let mse = |f: fn(&Replication) -> f64| records.iter().map(|r| (f(r) - oracle_risk).powi(2)).sum::<f64>() / n;
    let d_minus = records.iter().filter(|r| r.in_d_minus()).count();
    EstimatorStats {
        replications: reps,
        n_p,
        n_u,
        oracle_risk,
        mean_upu,
        mean_nnpu,
        bias_upu: mean_upu - oracle_risk,
        bias_nnpu: mean_nnpu - oracle_risk,
        mse_upu: mse(|r| r.upu),
        mse_nnpu: mse(|r| r.nnpu),
        pr_d_minus: d_minus as f64 / n,
        stderr_upu,
        stderr_nnpu,
        mean_excess,
        stderr_excess,
        d_minus_events: d_minus,
        differing: records.iter().filter(|r| r.nnpu != r.upu).count(),
    }
}

/// Bias, MSE and `Pr(D⁻)` of both estimators at fixed `g`.
pub fn replicate(
    task: &GaussianTask,
    g: &Model,
    loss: &LossSpec,
    n_p: usize,
    n_u: usize,
    replications: usize,
    base_seed: u64,
) -> Result<EstimatorStats> {
    let oracle = task.oracle_risk(g, loss)?;
    let records = replicate_records(task, g, loss, n_p, n_u, replications, base_seed)?;
    Ok(summarize(&records, oracle, n_p, n_u))
}

/// One row of the MSE lower-bound check `MSE(uPU) - MSE(nnPU) >= 3β² Pr{R̃ - R̂ > β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCheck {
    pub beta: f64,
    pub exceed_prob: f64,
    pub lower_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub stats: EstimatorStats,
    /// `MSE(R̂pu) - MSE(R̃pu)`.
    pub mse_diff: f64,
    /// Standard error of `mse_diff` from the paired per-replication differences.
    pub mse_diff_stderr: f64,
    pub beta_checks: Vec<BetaCheck>,
    pub symmetric_loss: bool,
    /// `n_u / n_p`.
    pub u_to_p_ratio: f64,
}

impl MseReport {
    /// Fails when no replication fell in D⁻, since the comparison is then
    /// vacuous.
    pub fn require_defect_events(&self) -> Result<&Self> {
        if self.stats.d_minus_events == 0 {
            return Err(PuError::NoDefectEvents {
                replications: self.stats.replications,
            });
        }
        Ok(self)
    }

    /// `mse_diff` in units of its paired standard error.
    pub fn z_score(&self) -> f64 {
        if self.mse_diff_stderr == 0.0 {
            0.0
        } else {
            self.mse_diff / self.mse_diff_stderr
        }
    }
}

pub const BETA_CSV_HEADER: &str = "beta,exceed_prob,lower_bound,mse_diff,holds";

/// Paired MSE comparison of the two estimators plus the `β`-grid lower
/// bound check. Reports rather than fails when D⁻ never occurred; see
/// [`MseReport::require_defect_events`].
#[allow(clippy::too_many_arguments)]
pub fn mse_comparison(
    task: &GaussianTask,
    g: &Model,
    loss: &LossSpec,
    n_p: usize,
    n_u: usize,
    replications: usize,
    base_seed: u64,
    betas: &[f64],
) -> Result<MseReport> {
    let oracle = task.oracle_risk(g, loss)?;
    let records = replicate_records(task, g, loss, n_p, n_u, replications, base_seed)?;
    let stats = summarize(&records, oracle, n_p, n_u);
    let (mse_diff, mse_diff_stderr) = mean_and_stderr(
        records
            .iter()
            .map(|r| (r.upu - oracle).powi(2) - (r.nnpu - oracle).powi(2)),
    );
    let n = records.len() as f64;
    let beta_checks = betas
        .iter()
        .map(|&beta| {
            let exceed = records.iter().filter(|r| r.nnpu - r.upu > beta).count() as f64 / n;
            let lower_bound = 3.0 * beta * beta * exceed;
            BetaCheck {
                beta,
                exceed_prob: exceed,
                lower_bound,
                holds: mse_diff >= lower_bound,
            }
        })
        .collect();
    Ok(MseReport {
        stats,
        mse_diff,
        mse_diff_stderr,
        beta_checks,
        symmetric_loss: loss.is_symmetric,
        u_to_p_ratio: n_u as f64 / n_p as f64,
    })
}

/// One [`EstimatorStats`] row per `(n_p, n_u)`; each grid point uses the same
/// base seed.
pub fn consistency_sweep(
    task: &GaussianTask,
    g: &Model,
    loss: &LossSpec,
    size_grid: &[(usize, usize)],
    replications: usize,
    base_seed: u64,
) -> Result<Vec<EstimatorStats>> {
    if size_grid
        .windows(2)
        .any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1 || w[0] == w[1])
    {
        return Err(PuError::Config("size grid must be increasing".into()));
    }
    let oracle = task.oracle_risk(g, loss)?;
    size_grid
        .iter()
        .map(|&(n_p, n_u)| {
            let records = replicate_records(task, g, loss, n_p, n_u, replications, base_seed)?;
            Ok(summarize(&records, oracle, n_p, n_u))
        })
        .collect()
}

/// Stats rows as CSV text.
pub fn stats_csv(rows: &[EstimatorStats], meta: &Metadata) -> String {
    let mut t = CsvTable::new(STATS_CSV_HEADER);
    for r in rows {
        t.push_row(r.csv_row());
    }
    t.render(meta)
}
