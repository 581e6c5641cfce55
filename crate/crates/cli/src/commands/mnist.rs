use anyhow::{bail, Context, Result};
use pulearn::csv::CsvTable;
use pulearn::data::idx::load_mnist_idx;
use pulearn::LabeledSet;

use super::{out_dir, write};
use crate::config::RunConfig;

pub fn schema() -> Vec<(&'static str, &'static str)> {
    vec![
        ("images", ""),
        ("labels", ""),
        ("test_images", ""),
        ("test_labels", ""),
        ("out_dir", "out"),
    ]
}

fn load(cfg: &RunConfig, images: &str, labels: &str) -> Result<Option<LabeledSet>> {
    match (cfg.path(images), cfg.path(labels)) {
        (Some(i), Some(l)) => {
            Ok(Some(load_mnist_idx(i, l).with_context(|| {
                format!("loading {} / {}", i.display(), l.display())
            })?))
        }
        (None, None) => Ok(None),
        _ => bail!("{images} and {labels} must be given together"),
    }
}

fn row(split: &str, count: usize, dim: usize, positives: usize) -> String {
    format!("{split},{count},{dim},{positives},{}", positives as f64 / count as f64)
}

/// Validates the IDX files, reports the even-digit prior for the training
/// split (and the union with the test split when given), and writes a config
/// fragment pointing `train` at them.
pub fn run(cfg: &RunConfig) -> Result<bool> {
    let Some(train) = load(cfg, "images", "labels")? else {
        bail!("mnist-prep needs --images and --labels");
    };
    let test = load(cfg, "test_images", "test_labels")?;
    let dir = out_dir(cfg)?;
    let positives = |s: &LabeledSet| s.labels.iter().filter(|&&l| l == 1).count();

    let mut t = CsvTable::new("split,count,features,positives,pi_p");
    t.push_row(row("train", train.len(), train.dim(), positives(&train)));
    if let Some(test) = &test {
        if test.dim() != train.dim() {
            bail!("train and test images differ in size");
        }
        t.push_row(row("test", test.len(), test.dim(), positives(test)));
        t.push_row(row(
            "train+test",
            train.len() + test.len(),
            train.dim(),
            positives(&train) + positives(test),
        ));
    }
    let summary = t.render(&cfg.metadata());
    print!(
        "{}",
        summary
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
    write(&dir.join("mnist_summary.csv"), &summary)?;

    let mut fragment = String::from("# generated by mnist-prep\ndataset = mnist\n");
    fragment.push_str(&format!(
        "mnist_images = {}\nmnist_labels = {}\n",
        cfg.raw("images"),
        cfg.raw("labels")
    ));
    if test.is_some() {
        fragment.push_str(&format!(
            "mnist_test_images = {}\nmnist_test_labels = {}\n",
            cfg.raw("test_images"),
            cfg.raw("test_labels")
        ));
    }
    write(&dir.join("mnist.cfg"), &fragment)?;
    Ok(true)
}
