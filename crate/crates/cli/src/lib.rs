//! Command-line driver: `train`, `study`, `sweep-prior` and `mnist-prep`.
//!
//! Every subcommand resolves a flat configuration (defaults, then
//! `--config FILE`, then `--set KEY=VALUE` and the named flags) and echoes
//! it as `#` lines at the top of each CSV it writes.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{parse_assignment, RunConfig};

static QUIET: AtomicBool = AtomicBool::new(false);

/// Progress output on stdout, suppressed by `--quiet`.
macro_rules! note {
    ($($arg:tt)*) => {
        if !$crate::quiet() {
            println!($($arg)*);
        }
    };
}
pub(crate) use note;

pub(crate) fn quiet() -> bool {
    QUIET.load(Ordering::Relaxed)
}

#[derive(Debug, Parser)]
#[command(name = "pulearn", version, about = "PU learning with uPU and nnPU risk estimators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` config file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Directory for output files.
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    /// Suppress progress output.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train PN, uPU and/or nnPU classifiers and log risks per epoch.
    Train {
        #[command(flatten)]
        common: Common,
        /// synthetic1d, synthetic2d or mnist.
        #[arg(long)]
        dataset: Option<String>,
        /// Comma-separated subset of pn,upu,nnpu.
        #[arg(long)]
        methods: Option<String>,
        /// Number of labeled positives.
        #[arg(long = "np")]
        n_p: Option<usize>,
        /// Number of unlabeled points (`auto` for the dataset default).
        #[arg(long = "nu")]
        n_u: Option<String>,
        /// Training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Seed for sampling and initialization.
        #[arg(long)]
        seed: Option<u64>,
        /// Multiply the true class prior handed to the learners.
        #[arg(long)]
        pi_given_scale: Option<f64>,
    },
    /// Monte Carlo study of the estimators at a fixed linear classifier.
    Study {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: unbiasedness, positive-bias, vanishing-bias, mse, consistency.
        #[arg(long)]
        check: Option<String>,
        /// Monte Carlo replications.
        #[arg(long)]
        reps: Option<usize>,
        /// Surrogate loss, e.g. sigmoid.
        #[arg(long)]
        loss: Option<String>,
        /// `sizes` to add a table over the size grid.
        #[arg(long)]
        sweep: Option<String>,
        /// Number of labeled positives.
        #[arg(long = "np")]
        n_p: Option<usize>,
        /// Number of unlabeled points.
        #[arg(long = "nu")]
        n_u: Option<usize>,
        /// Seed for sampling and initialization.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train nnPU under a grid of misspecified class priors.
    SweepPrior {
        #[command(flatten)]
        common: Common,
        /// Comma-separated multiples of the true prior.
        #[arg(long)]
        grid: Option<String>,
        /// synthetic1d, synthetic2d or mnist.
        #[arg(long)]
        dataset: Option<String>,
        /// Number of labeled positives.
        #[arg(long = "np")]
        n_p: Option<usize>,
        /// Number of unlabeled points (`auto` for the dataset default).
        #[arg(long = "nu")]
        n_u: Option<String>,
        /// Training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Seed for sampling and initialization.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate MNIST IDX files and summarize the even/odd split.
    MnistPrep {
        #[command(flatten)]
        common: Common,
        /// Training images IDX file.
        #[arg(long)]
        images: Option<String>,
        /// Training labels IDX file.
        #[arg(long)]
        labels: Option<String>,
        /// Test images IDX file.
        #[arg(long)]
        test_images: Option<String>,
        /// Test labels IDX file.
        #[arg(long)]
        test_labels: Option<String>,
    },
}

fn resolve(name: &'static str, schema: &[(&'static str, &'static str)], common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(name, schema);
    if let Some(path) = &common.config {
        cfg.merge_file(path)?;
    }
    for s in &common.set {
        let (k, v) = parse_assignment(s)?;
        cfg.set(&k, v)?;
    }
    cfg.set_opt("out_dir", common.out_dir.as_ref())?;
    Ok(cfg)
}

/// Resolves the configuration for a parsed command line.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.command {
        Command::Train {
            common,
            dataset,
            methods,
            n_p,
            n_u,
            epochs,
            seed,
            pi_given_scale,
        } => {
            let mut cfg = resolve("train", &commands::train::schema(), common)?;
            cfg.set_opt("dataset", dataset.as_ref())?;
            cfg.set_opt("methods", methods.as_ref())?;
            cfg.set_opt("n_p", *n_p)?;
            cfg.set_opt("n_u", n_u.as_ref())?;
            cfg.set_opt("epochs", *epochs)?;
            cfg.set_opt("seed", *seed)?;
            cfg.set_opt("pi_given_scale", *pi_given_scale)?;
            Ok(cfg)
        }
        Command::Study {
            common,
            check,
            reps,
            loss,
            sweep,
            n_p,
            n_u,
            seed,
        } => {
            let mut cfg = resolve("study", &commands::study::schema(), common)?;
            cfg.set_opt("check", check.as_ref())?;
            cfg.set_opt("reps", *reps)?;
            cfg.set_opt("loss", loss.as_ref())?;
            cfg.set_opt("sweep", sweep.as_ref())?;
            cfg.set_opt("n_p", *n_p)?;
            cfg.set_opt("n_u", *n_u)?;
            cfg.set_opt("seed", *seed)?;
            Ok(cfg)
        }
        Command::SweepPrior {
            common,
            grid,
            dataset,
            n_p,
            n_u,
            epochs,
            seed,
        } => {
            let mut cfg = resolve("sweep-prior", &commands::sweep::schema(), common)?;
            cfg.set_opt("grid", grid.as_ref())?;
            cfg.set_opt("dataset", dataset.as_ref())?;
            cfg.set_opt("n_p", *n_p)?;
            cfg.set_opt("n_u", n_u.as_ref())?;
            cfg.set_opt("epochs", *epochs)?;
            cfg.set_opt("seed", *seed)?;
            Ok(cfg)
        }
        Command::MnistPrep {
            common,
            images,
            labels,
            test_images,
            test_labels,
        } => {
            let mut cfg = resolve("mnist-prep", &commands::mnist::schema(), common)?;
            cfg.set_opt("images", images.as_ref())?;
            cfg.set_opt("labels", labels.as_ref())?;
            cfg.set_opt("test_images", test_images.as_ref())?;
            cfg.set_opt("test_labels", test_labels.as_ref())?;
            Ok(cfg)
        }
    }
}

fn common(cli: &Cli) -> &Common {
    match &cli.command {
        Command::Train { common, .. }
        | Command::Study { common, .. }
        | Command::SweepPrior { common, .. }
        | Command::MnistPrep { common, .. } => common,
    }
}

/// Runs a parsed command line. `Ok(false)` means the work completed but an
/// enabled check failed.
pub fn execute(cli: &Cli) -> Result<bool> {
    let cfg = resolve_config(cli)?;
    QUIET.store(common(cli).quiet, Ordering::Relaxed);
    if common(cli).print_config {
        print!("{}", cfg.render());
        return Ok(true);
    }
    match &cli.command {
        Command::Train { .. } => commands::train::run(&cfg),
        Command::Study { .. } => commands::study::run(&cfg),
        Command::SweepPrior { .. } => commands::sweep::run(&cfg),
        Command::MnistPrep { .. } => commands::mnist::run(&cfg),
    }
}

/// Parses `args` (program name first) and runs the command. Help and
/// usage errors are returned as clap errors.
pub fn run<I, T>(args: I) -> Result<bool>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(&cli)
}
