pub mod mnist;
pub mod study;
pub mod sweep;
pub mod train;

use std::f64::consts::SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pulearn::GaussianTask;

use crate::config::RunConfig;
use crate::note;

/// Keys describing a synthetic Gaussian task, shared by every subcommand
/// that samples one.
pub const TASK_KEYS: &[(&str, &str)] = &[
    ("pi_p", "0.5"),
    // per-coordinate distance of the class means from the origin
    ("mean_offset", "auto"),
    ("sigma", "1"),
];

/// `synthetic1d` has means ±offset (default 1); `synthetic2d` has means
/// ±(offset, offset) (default √2, a distance of 2 from the origin).
pub fn gaussian_task(cfg: &RunConfig, kind: &str) -> Result<GaussianTask> {
    let dim = match kind {
        "synthetic1d" => 1,
        "synthetic2d" => 2,
        other => bail!("unknown synthetic task `{other}` (expected synthetic1d or synthetic2d)"),
    };
    let offset = cfg
        .get_auto::<f64>("mean_offset")?
        .unwrap_or(if dim == 1 { 1.0 } else { SQRT_2 });
    let task = GaussianTask::new(
        vec![offset; dim],
        vec![-offset; dim],
        cfg.get("sigma")?,
        cfg.get("pi_p")?,
    )?;
    Ok(task)
}

pub fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.raw("out_dir"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    note!("wrote {}", path.display());
    Ok(())
}
