use anyhow::{bail, Result};
use pulearn::csv::CsvTable;
use pulearn::trainer::EPOCH_CSV_HEADER;
use pulearn::Method;

use super::train::{prepare, train_one, TRAINING_KEYS};
use super::{out_dir, write, TASK_KEYS};
use crate::config::RunConfig;
use crate::note;
use crate::svg::{line_chart, Series};

pub const SUMMARY_HEADER: &str = "scale,pi_given,best_test_eval,best_epoch,final_test_eval,final_train_surrogate";

pub fn schema() -> Vec<(&'static str, &'static str)> {
    let mut keys = vec![("grid", "0.8,0.9,1,1.1,1.2")];
    keys.extend(TRAINING_KEYS.iter().filter(|(k, _)| *k != "pi_given_scale"));
    keys.extend_from_slice(TASK_KEYS);
    keys
}

/// Best test risk over epochs and the first epoch reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub scale: f64,
    pub pi_given: f64,
    pub best_test_eval: f64,
    pub best_epoch: usize,
    pub final_test_eval: f64,
    pub final_train_surrogate: f64,
}

impl SweepPoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.scale,
            self.pi_given,
            self.best_test_eval,
            self.best_epoch,
            self.final_test_eval,
            self.final_train_surrogate
        )
    }
}

/// Parses a summary CSV back into points, skipping metadata lines.
pub fn parse_summary(text: &str) -> Result<Vec<SweepPoint>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some(SUMMARY_HEADER) {
        bail!("not a sweep summary");
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                bail!("malformed summary row `{l}`");
            }
            Ok(SweepPoint {
                scale: f[0].parse()?,
                pi_given: f[1].parse()?,
                best_test_eval: f[2].parse()?,
                best_epoch: f[3].parse()?,
                final_test_eval: f[4].parse()?,
                final_train_surrogate: f[5].parse()?,
            })
        })
        .collect()
}

pub fn run(cfg: &RunConfig) -> Result<bool> {
    let grid: Vec<f64> = cfg.list("grid")?;
    if grid.is_empty() {
        bail!("grid is empty");
    }
    let prepared = prepare(cfg, false, 1.0)?;
    if prepared.data.test.is_none() {
        bail!("sweep-prior needs a labeled test set");
    }
    let dir = out_dir(cfg)?;
    let pi_true = prepared.data.pi_p_true;

    let mut summary = CsvTable::new(SUMMARY_HEADER);
    let mut epochs = CsvTable::new(&format!("scale,{EPOCH_CSV_HEADER}"));
    let mut series = Vec::new();
    let mut points = Vec::new();
    for (i, &scale) in grid.iter().enumerate() {
        let data = prepared.data.clone().with_pi_given(scale * pi_true)?;
        let (_, outcome) = train_one(cfg, &data, Method::Nnpu)?;
        let tests: Vec<f64> = outcome
            .logs
            .iter()
            .map(|l| l.test_eval.expect("test set present"))
            .collect();
        let (best_idx, best) = tests
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, t)| if t < acc.1 { (j, t) } else { acc });
        let last = outcome.logs.last().expect("at least one epoch");
        let point = SweepPoint {
            scale,
            pi_given: data.pi_p_given,
            best_test_eval: best,
            best_epoch: outcome.logs[best_idx].epoch,
            final_test_eval: tests[tests.len() - 1],
            final_train_surrogate: last.train_surrogate,
        };
        note!(
            "pi' = {scale} pi: best test_eval {} at epoch {}",
            point.best_test_eval,
            point.best_epoch
        );
        summary.push_row(point.csv_row());
        for log in &outcome.logs {
            epochs.push_row(format!("{scale},{}", log.csv_row()));
        }
        series.push(Series {
            label: format!("pi' = {scale} pi"),
            points: outcome
                .logs
                .iter()
                .zip(&tests)
                .map(|(l, &t)| (l.epoch as f64, t))
                .collect(),
            dashed: false,
            colour: i,
        });
        points.push(point);
    }

    let mut meta = cfg.metadata();
    meta.extend(&prepared.derived);
    meta.push("method", Method::Nnpu);
    write(&dir.join("sweep_prior.csv"), &summary.render(&meta))?;
    write(&dir.join("sweep_prior_epochs.csv"), &epochs.render(&meta))?;
    if cfg.get_bool("svg")? {
        write(
            &dir.join("sweep_prior.svg"),
            &line_chart("Test risk under a misspecified prior", "epoch", "test risk", &series),
        )?;
    }
    report_misspecification(&points);
    Ok(true)
}

/// Compares 1.1·π against the correct prior, when both were run.
fn report_misspecification(points: &[SweepPoint]) {
    let at = |s: f64| points.iter().find(|p| (p.scale - s).abs() < 1e-12);
    if let (Some(exact), Some(over)) = (at(1.0), at(1.1)) {
        note!(
            "over-specified prior (1.1 pi): best test_eval {} vs {} with the true prior (difference {})",
            over.best_test_eval,
            exact.best_test_eval,
            over.best_test_eval - exact.best_test_eval
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pulearn::csv::Metadata;

    #[test]
    fn summary_round_trip() {
        let p = SweepPoint {
            scale: 1.1,
            pi_given: 0.55,
            best_test_eval: 0.03,
            best_epoch: 17,
            final_test_eval: 0.04,
            final_train_surrogate: 0.1,
        };
        let mut t = CsvTable::new(SUMMARY_HEADER);
        t.push_row(p.csv_row());
        let mut meta = Metadata::new();
        meta.push("seed", 0);
        assert_eq!(parse_summary(&t.render(&meta)).unwrap(), vec![p]);
    }
}
