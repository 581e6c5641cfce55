use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use pulearn::csv::CsvTable;
use pulearn::lab::{self, wilson_interval, EstimatorStats, MseReport, BETA_CSV_HEADER};
use pulearn::{LossSpec, Model};

use super::{gaussian_task, out_dir, write, TASK_KEYS};
use crate::config::RunConfig;
use crate::note;

/// Pass/fail threshold, in standard errors, for Monte Carlo means.
pub const Z_MEAN: f64 = 4.0;
/// Tolerance, in standard errors, for trends across a size grid.
pub const Z_TREND: f64 = 2.0;

pub fn schema() -> Vec<(&'static str, &'static str)> {
    let mut keys = vec![
        ("task", "synthetic1d"),
        ("g_weights", "1"),
        ("g_bias", "0"),
        ("loss", "sigmoid"),
        ("n_p", "50"),
        ("n_u", "500"),
        ("reps", "10000"),
        ("seed", "0"),
        ("check", "unbiasedness"),
        ("sweep", "none"),
        ("size_grid", "1:100,10:1000,100:10000"),
        ("beta_multiples", "0,0.05,0.1,0.2"),
        ("out_dir", "out"),
    ];
    keys.extend_from_slice(TASK_KEYS);
    keys
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    /// `|bias_upu| <= 4 se`.
    Unbiasedness,
    /// Negative-risk events occur and nnPU's bias is positive.
    PositiveBias,
    /// No negative-risk events and `|bias_nnpu| <= 4 se`.
    VanishingBias,
    /// nnPU has the smaller MSE and the β lower bounds hold.
    Mse,
    /// Bias and `Pr(D⁻)` shrink along the size grid.
    Consistency,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Unbiasedness => "unbiasedness",
            Check::PositiveBias => "positive-bias",
            Check::VanishingBias => "vanishing-bias",
            Check::Mse => "mse",
            Check::Consistency => "consistency",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Check::Unbiasedness,
            Check::PositiveBias,
            Check::VanishingBias,
            Check::Mse,
            Check::Consistency,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown check `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

fn result(check: Check, passed: bool, detail: String) -> CheckResult {
    CheckResult { check, passed, detail }
}

pub fn unbiasedness(s: &EstimatorStats) -> CheckResult {
    result(
        Check::Unbiasedness,
        s.bias_upu.abs() <= Z_MEAN * s.stderr_upu,
        format!("bias_upu={} stderr_upu={}", s.bias_upu, s.stderr_upu),
    )
}

pub fn positive_bias(s: &EstimatorStats) -> CheckResult {
    result(
        Check::PositiveBias,
        s.pr_d_minus > 0.0 && s.bias_nnpu >= -Z_MEAN * s.stderr_nnpu && s.mean_excess > 0.0,
        format!(
            "pr_d_minus={} bias_nnpu={} stderr_nnpu={} mean_excess={}",
            s.pr_d_minus, s.bias_nnpu, s.stderr_nnpu, s.mean_excess
        ),
    )
}

pub fn vanishing_bias(s: &EstimatorStats) -> CheckResult {
    result(
        Check::VanishingBias,
        s.pr_d_minus == 0.0 && s.bias_nnpu.abs() <= Z_MEAN * s.stderr_nnpu,
        format!(
            "pr_d_minus={} bias_nnpu={} stderr_nnpu={}",
            s.pr_d_minus, s.bias_nnpu, s.stderr_nnpu
        ),
    )
}

pub fn mse(r: &MseReport) -> CheckResult {
    let bounds_hold = r.beta_checks.iter().all(|b| b.holds);
    result(
        Check::Mse,
        r.stats.d_minus_events > 0 && r.z_score() >= Z_MEAN && bounds_hold,
        format!(
            "mse_diff={} stderr={} z={} d_minus_events={} beta_bounds_hold={bounds_hold}",
            r.mse_diff,
            r.mse_diff_stderr,
            r.z_score(),
            r.stats.d_minus_events
        ),
    )
}

/// Every point unbiased for uPU, and both nnPU's bias and `Pr(D⁻)` non-increasing
/// up to sampling noise.
pub fn consistency(rows: &[EstimatorStats]) -> CheckResult {
    let mut failures = Vec::new();
    for r in rows {
        if r.bias_upu.abs() > Z_MEAN * r.stderr_upu {
            failures.push(format!("upu biased at n_p={}", r.n_p));
        }
    }
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let slack = Z_TREND * (a.stderr_nnpu.powi(2) + b.stderr_nnpu.powi(2)).sqrt();
        if b.bias_nnpu > a.bias_nnpu + slack {
            failures.push(format!("bias_nnpu rises from n_p={} to n_p={}", a.n_p, b.n_p));
        }
        let (_, a_hi) = wilson_interval(a.d_minus_events, a.replications, Z_TREND);
        let (b_lo, _) = wilson_interval(b.d_minus_events, b.replications, Z_TREND);
        if b_lo > a_hi {
            failures.push(format!("pr_d_minus rises from n_p={} to n_p={}", a.n_p, b.n_p));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} grid points", rows.len())
    } else {
        failures.join("; ")
    };
    result(Check::Consistency, failures.is_empty(), detail)
}

pub fn parse_grid(raw: &str) -> Result<Vec<(usize, usize)>> {
    raw.split(',')
        .map(|pair| {
            let (p, u) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| anyhow!("size_grid entries look like n_p:n_u, got `{pair}`"))?;
            Ok((p.trim().parse()?, u.trim().parse()?))
        })
        .collect()
}

fn classifier(cfg: &RunConfig, dim: usize) -> Result<Model> {
    let w: Vec<f64> = cfg.list("g_weights")?;
    let w = if w.len() == 1 && dim > 1 { vec![w[0]; dim] } else { w };
    if w.len() != dim {
        bail!("g_weights has {} entries for a {dim}-dimensional task", w.len());
    }
    Ok(Model::linear(&w, cfg.get("g_bias")?)?)
}

pub fn run(cfg: &RunConfig) -> Result<bool> {
    let checks: Vec<Check> = match cfg.raw("check") {
        "none" => Vec::new(),
        _ => cfg.list("check")?,
    };
    let sweep = match cfg.raw("sweep") {
        "none" => false,
        "sizes" => true,
        other => bail!("sweep must be none or sizes, got `{other}`"),
    };
    let task = gaussian_task(cfg, cfg.raw("task"))?;
    let g = classifier(cfg, task.dim())?;
    let loss: LossSpec = cfg.get("loss")?;
    let (n_p, n_u, reps, seed) = (cfg.get("n_p")?, cfg.get("n_u")?, cfg.get("reps")?, cfg.get("seed")?);
    let dir = out_dir(cfg)?;
    let mut meta = cfg.metadata();
    meta.push("oracle_risk", task.oracle_risk(&g, &loss)?);

    let mut results = Vec::new();
    let stats = if checks.contains(&Check::Mse) {
        if !loss.is_symmetric {
            bail!("the mse check needs a symmetric loss, got {}", loss.kind);
        }
        let betas: Vec<f64> = cfg
            .list::<f64>("beta_multiples")?
            .into_iter()
            .map(|m| m * task.pi_p)
            .collect();
        let report = lab::mse_comparison(&task, &g, &loss, n_p, n_u, reps, seed, &betas)?;
        let mut m = meta.clone();
        m.push("mse_diff", report.mse_diff)
            .push("mse_diff_stderr", report.mse_diff_stderr)
            .push("z_score", report.z_score())
            .push("u_to_p_ratio", report.u_to_p_ratio)
            .push("symmetric_loss", report.symmetric_loss);
        let mut t = CsvTable::new(BETA_CSV_HEADER);
        for b in &report.beta_checks {
            t.push_row(format!(
                "{},{},{},{},{}",
                b.beta, b.exceed_prob, b.lower_bound, report.mse_diff, b.holds
            ));
        }
        write(&dir.join("study_mse.csv"), &t.render(&m))?;
        results.push(mse(&report));
        report.stats
    } else {
        lab::replicate(&task, &g, &loss, n_p, n_u, reps, seed)?
    };
    write(
        &dir.join("study_stats.csv"),
        &lab::stats_csv(std::slice::from_ref(&stats), &meta),
    )?;

    for &c in &checks {
        match c {
            Check::Unbiasedness => results.push(unbiasedness(&stats)),
            Check::PositiveBias => results.push(positive_bias(&stats)),
            Check::VanishingBias => results.push(vanishing_bias(&stats)),
            Check::Mse | Check::Consistency => {}
        }
    }
    if sweep || checks.contains(&Check::Consistency) {
        let grid = parse_grid(cfg.raw("size_grid"))?;
        let rows = lab::consistency_sweep(&task, &g, &loss, &grid, reps, seed)?;
        write(&dir.join("study_sizes.csv"), &lab::stats_csv(&rows, &meta))?;
        if checks.contains(&Check::Consistency) {
            results.push(consistency(&rows));
        }
    }

    let mut t = CsvTable::new("check,passed,detail");
    for r in &results {
        note!(
            "check {}: {} ({})",
            r.check,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        t.push_row(format!("{},{},{}", r.check, r.passed, r.detail));
    }
    if !results.is_empty() {
        write(&dir.join("study_checks.csv"), &t.render(&meta))?;
    }
    Ok(results.iter().all(|r| r.passed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_parse() {
        assert_eq!("mse".parse::<Check>().unwrap(), Check::Mse);
        assert_eq!("positive-bias".parse::<Check>().unwrap(), Check::PositiveBias);
        assert!("bogus".parse::<Check>().is_err());
    }

    #[test]
    fn grid_parses() {
        assert_eq!(parse_grid("1:100, 10:1000").unwrap(), vec![(1, 100), (10, 1000)]);
        assert!(parse_grid("1-100").is_err());
    }
}
