use anyhow::{bail, Context, Result};
use pulearn::csv::{opt, CsvTable, Metadata};
use pulearn::data::idx::load_mnist_idx;
use pulearn::data::{default_negative_count, make_pu_from_labeled, sample_rows, UnlabeledSize};
use pulearn::trainer::{self, TrainOutcome, EPOCH_CSV_HEADER};
use pulearn::{LossSpec, Method, OptimizerConfig, OptimizerKind, PuDataset, TrainConfig};

use super::{gaussian_task, out_dir, write, TASK_KEYS};
use crate::config::RunConfig;
use crate::note;
use crate::svg::{line_chart, Series};

/// Keys shared by `train` and `sweep-prior`.
pub const TRAINING_KEYS: &[(&str, &str)] = &[
    ("dataset", "synthetic2d"),
    ("n_p", "100"),
    ("n_u", "auto"),
    ("n_test", "10000"),
    ("n_n", "auto"),
    ("pi_given_scale", "1"),
    ("data_seed", "auto"),
    ("mnist_images", ""),
    ("mnist_labels", ""),
    ("mnist_test_images", ""),
    ("mnist_test_labels", ""),
    ("dependent", "true"),
    ("loss", "sigmoid"),
    ("eval_loss", "zero_one"),
    ("beta", "0"),
    ("gamma", "1"),
    ("epochs", "100"),
    ("batches_per_epoch", "1"),
    ("optimizer", "adam"),
    ("step_size", "auto"),
    ("adam_beta1", "0.9"),
    ("adam_beta2", "0.999"),
    ("adam_eps", "1e-8"),
    ("adagrad_eps", "1e-8"),
    ("architecture", "d-100-1:relu"),
    ("l2", "0.005"),
    ("seed", "0"),
    ("out_dir", "out"),
    ("svg", "true"),
];

const SYNTHETIC_N_U: usize = 50_000;

pub fn schema() -> Vec<(&'static str, &'static str)> {
    let mut keys = vec![("methods", "upu,nnpu")];
    keys.extend_from_slice(TRAINING_KEYS);
    keys.extend_from_slice(TASK_KEYS);
    keys
}

/// Training data plus the values derived while building it.
pub struct Prepared {
    pub data: PuDataset,
    pub derived: Metadata,
}

fn data_seed(cfg: &RunConfig) -> Result<u64> {
    Ok(match cfg.get_auto("data_seed")? {
        Some(s) => s,
        None => cfg.get("seed")?,
    })
}

/// Builds the dataset described by `cfg`, handing the learners
/// `scale` times the true prior. A negative sample is attached when
/// `with_negatives` is set.
pub fn prepare(cfg: &RunConfig, with_negatives: bool, scale: f64) -> Result<Prepared> {
    let n_p: usize = cfg.get("n_p")?;
    let seed = data_seed(cfg)?;
    let mut derived = Metadata::new();
    let dataset = cfg.raw("dataset");
    let (mut data, negatives) = if dataset == "mnist" {
        let (Some(images), Some(labels)) = (cfg.path("mnist_images"), cfg.path("mnist_labels")) else {
            bail!("dataset = mnist needs mnist_images and mnist_labels");
        };
        let labeled = load_mnist_idx(images, labels).with_context(|| format!("loading {}", images.display()))?;
        let pi_true = labeled.positive_fraction();
        let n_u = match cfg.get_auto::<usize>("n_u")? {
            None => UnlabeledSize::AllTrain,
            Some(n) => UnlabeledSize::Count(n),
        };
        let mut data = make_pu_from_labeled(&labeled, n_p, n_u, cfg.get_bool("dependent")?, pi_true, seed)?;
        data.test = match (cfg.path("mnist_test_images"), cfg.path("mnist_test_labels")) {
            (Some(i), Some(l)) => Some(load_mnist_idx(i, l).with_context(|| format!("loading {}", i.display()))?),
            (None, None) => None,
            _ => bail!("mnist_test_images and mnist_test_labels must be given together"),
        };
        let negatives = if with_negatives {
            let n_n = cfg
                .get_auto("n_n")?
                .unwrap_or_else(|| default_negative_count(pi_true, n_p));
            Some(sample_rows(&labeled.negatives(), n_n, !seed)?)
        } else {
            None
        };
        (data, negatives)
    } else {
        let task = gaussian_task(cfg, dataset)?;
        let n_u = cfg.get_auto("n_u")?.unwrap_or(SYNTHETIC_N_U);
        let n_test: usize = cfg.get("n_test")?;
        let data = task.sample(n_p, n_u, n_test, seed)?;
        let negatives = if with_negatives {
            let n_n = cfg
                .get_auto("n_n")?
                .unwrap_or_else(|| default_negative_count(task.pi_p, n_p));
            Some(task.sample_negatives(n_n, !seed))
        } else {
            None
        };
        (data, negatives)
    };
    data.n_points = negatives;
    let pi_given = scale * data.pi_p_true;
    let data = data
        .with_pi_given(pi_given)
        .with_context(|| format!("pi_given_scale = {scale} gives an invalid prior"))?;
    derived
        .push("dim", data.dim())
        .push("n_u_used", data.u_points.rows())
        .push("n_n_used", data.n_points.as_ref().map_or(0, |m| m.rows()))
        .push("n_test_used", data.test.as_ref().map_or(0, |t| t.len()))
        .push("pi_p_true", data.pi_p_true)
        .push("pi_p_given", data.pi_p_given)
        .push("data_seed_used", seed);
    Ok(Prepared { data, derived })
}

pub fn train_config(cfg: &RunConfig, method: Method) -> Result<TrainConfig> {
    let kind: OptimizerKind = cfg.get("optimizer")?;
    let mut optimizer = OptimizerConfig::new(kind);
    if let Some(step) = cfg.get_auto("step_size")? {
        optimizer = optimizer.with_step_size(step);
    }
    optimizer.beta1 = cfg.get("adam_beta1")?;
    optimizer.beta2 = cfg.get("adam_beta2")?;
    optimizer.adam_eps = cfg.get("adam_eps")?;
    optimizer.adagrad_eps = cfg.get("adagrad_eps")?;
    let tc = TrainConfig {
        method,
        beta: cfg.get("beta")?,
        gamma: cfg.get("gamma")?,
        epochs: cfg.get("epochs")?,
        batches_per_epoch: cfg.get("batches_per_epoch")?,
        loss: cfg.get::<LossSpec>("loss")?,
        eval_loss: cfg.get::<LossSpec>("eval_loss")?,
        optimizer,
        seed: cfg.get("seed")?,
        architecture: cfg.raw("architecture").to_string(),
        l2: cfg.get("l2")?,
    };
    tc.validate()?;
    Ok(tc)
}

/// Trains one method, labelling any failure with the method name.
pub fn train_one(cfg: &RunConfig, data: &PuDataset, method: Method) -> Result<(TrainConfig, TrainOutcome)> {
    let tc = train_config(cfg, method)?;
    let outcome = trainer::train(data, &tc).with_context(|| format!("training {method}"))?;
    Ok((tc, outcome))
}

pub fn epoch_csv(outcome: &TrainOutcome, meta: &Metadata) -> String {
    let mut t = CsvTable::new(EPOCH_CSV_HEADER);
    for log in &outcome.logs {
        t.push_row(log.csv_row());
    }
    t.render(meta)
}

fn header(cfg: &RunConfig, derived: &Metadata, tc: Option<&TrainConfig>, pi_p: f64) -> Result<Metadata> {
    let mut meta = cfg.metadata();
    meta.extend(derived);
    if let Some(tc) = tc {
        meta.push("method", tc.method)
            .push("step_size_used", tc.optimizer.step_size)
            .push("gradient_rule", format!("{:?}", tc.gradient_rule(pi_p)?));
    }
    Ok(meta)
}

pub fn run(cfg: &RunConfig) -> Result<bool> {
    let methods: Vec<Method> = cfg.list("methods")?;
    if methods.is_empty() {
        bail!("methods is empty");
    }
    let prepared = prepare(cfg, methods.contains(&Method::Pn), cfg.get("pi_given_scale")?)?;
    let data = &prepared.data;
    let dir = out_dir(cfg)?;

    let mut runs = Vec::new();
    for &method in &methods {
        let (tc, outcome) = train_one(cfg, data, method)?;
        let meta = header(cfg, &prepared.derived, Some(&tc), data.pi_p_given)?;
        write(&dir.join(format!("train_{method}.csv")), &epoch_csv(&outcome, &meta))?;
        let last = outcome.logs.last().expect("at least one epoch");
        note!(
            "{method}: final train_surrogate={} train_eval={} test_eval={}",
            last.train_surrogate,
            last.train_eval,
            opt(last.test_eval)
        );
        runs.push((method, outcome));
    }

    let mut table = CsvTable::new(&format!("method,{EPOCH_CSV_HEADER}"));
    for (method, outcome) in &runs {
        for log in &outcome.logs {
            table.push_row(format!("{method},{}", log.csv_row()));
        }
    }
    let meta = header(cfg, &prepared.derived, None, data.pi_p_given)?;
    write(&dir.join("comparison.csv"), &table.render(&meta))?;

    if cfg.get_bool("svg")? {
        write(&dir.join("risk_curves.svg"), &risk_chart(&runs))?;
    }
    Ok(true)
}

/// Test risk (solid) and training estimator (dashed) per method.
fn risk_chart(runs: &[(Method, TrainOutcome)]) -> String {
    let mut series = Vec::new();
    for (i, (method, outcome)) in runs.iter().enumerate() {
        let test: Vec<(f64, f64)> = outcome
            .logs
            .iter()
            .filter_map(|l| l.test_eval.map(|t| (l.epoch as f64, t)))
            .collect();
        if !test.is_empty() {
            series.push(Series {
                label: format!("{method} test"),
                points: test,
                dashed: false,
                colour: i,
            });
        }
        series.push(Series {
            label: format!("{method} train"),
            points: outcome
                .logs
                .iter()
                .map(|l| (l.epoch as f64, l.train_surrogate))
                .collect(),
            dashed: true,
            colour: i,
        });
    }
    line_chart("Risk per epoch", "epoch", "risk", &series)
}
