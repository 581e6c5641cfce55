use std::fs;
use std::path::Path;
use std::process::Command;

use pulearn::data::idx::{write_images, write_labels, IdxImages};
use pulearn_cli::commands::sweep::parse_summary;

fn run(args: &[&str]) -> bool {
    let mut argv = vec!["pulearn"];
    argv.extend_from_slice(args);
    pulearn_cli::run(argv).unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn metadata(path: &Path, key: &str) -> Option<String> {
    let prefix = format!("# {key} = ");
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

const SMALL_TRAIN: &[&str] = &[
    "--dataset",
    "synthetic1d",
    "--np",
    "20",
    "--nu",
    "200",
    "--epochs",
    "3",
    "--set",
    "n_test=200",
    "--set",
    "batches_per_epoch=2",
    "-q",
];

#[test]
fn train_writes_per_method_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--out-dir", out, "--methods", "pn,upu,nnpu"];
    args.extend_from_slice(SMALL_TRAIN);
    assert!(run(&args));
    for method in ["pn", "upu", "nnpu"] {
        let path = dir.path().join(format!("train_{method}.csv"));
        let rows = data_rows(&path);
        assert_eq!(rows.len(), 3, "{method}");
        assert_eq!(metadata(&path, "method").as_deref(), Some(method));
        assert!(metadata(&path, "step_size_used").is_some());
        // (π_n / 2π_p)² · n_p negatives
        assert_eq!(metadata(&path, "n_n_used").as_deref(), Some("5"));
    }
    assert_eq!(data_rows(&dir.path().join("comparison.csv")).len(), 9);
    assert!(fs::read_to_string(dir.path().join("risk_curves.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn misspecified_prior_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec![
        "train",
        "--out-dir",
        out,
        "--methods",
        "nnpu",
        "--pi-given-scale",
        "1.2",
    ];
    args.extend_from_slice(SMALL_TRAIN);
    assert!(run(&args));
    let path = dir.path().join("train_nnpu.csv");
    assert_eq!(metadata(&path, "pi_p_true").as_deref(), Some("0.5"));
    assert_eq!(metadata(&path, "pi_p_given").as_deref(), Some("0.6"));
}

#[test]
fn sweep_prior_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["sweep-prior", "--out-dir", out, "--grid", "0.9,1.1"];
    args.extend_from_slice(SMALL_TRAIN);
    assert!(run(&args));
    let points = parse_summary(&fs::read_to_string(dir.path().join("sweep_prior.csv")).unwrap()).unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0].scale, 0.9);
    assert!((points[1].pi_given - 0.55).abs() < 1e-12);
    for p in &points {
        assert!((0.0..=1.0).contains(&p.best_test_eval));
        assert!((1..=3).contains(&p.best_epoch));
        assert!(p.best_test_eval <= p.final_test_eval);
    }
    assert_eq!(data_rows(&dir.path().join("sweep_prior_epochs.csv")).len(), 6);
}

#[test]
fn study_writes_stats_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let passed = run(&[
        "study",
        "-q",
        "--out-dir",
        out,
        "--reps",
        "500",
        "--check",
        "unbiasedness,consistency",
        "--set",
        "size_grid=5:50,20:200",
    ]);
    let checks = data_rows(&dir.path().join("study_checks.csv"));
    assert_eq!(checks.len(), 2);
    assert_eq!(passed, checks.iter().all(|c| c.contains(",true,")));
    assert_eq!(data_rows(&dir.path().join("study_stats.csv")).len(), 1);
    assert_eq!(data_rows(&dir.path().join("study_sizes.csv")).len(), 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small study\nreps = 150\nn_p = 7 # trailing comment\n").unwrap();
    let out = dir.path().join("out");
    let (cfg_s, out_s) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    run(&[
        "study",
        "-q",
        "--config",
        cfg_s,
        "--out-dir",
        out_s,
        "--np",
        "9",
        "--check",
        "none",
    ]);
    let stats = out.join("study_stats.csv");
    assert_eq!(metadata(&stats, "reps").as_deref(), Some("150"));
    assert_eq!(metadata(&stats, "n_p").as_deref(), Some("9"));
    assert!(!out.join("study_checks.csv").exists());
}

fn write_idx(dir: &Path, name: &str, count: usize) -> (String, String) {
    let images = IdxImages {
        count,
        rows: 3,
        cols: 3,
        pixels: (0..count * 9).map(|i| (i * 53 % 256) as u8).collect(),
    };
    let labels: Vec<u8> = (0..count).map(|i| (i * 7 % 10) as u8).collect();
    let (ip, lp) = (dir.join(format!("{name}-images")), dir.join(format!("{name}-labels")));
    write_images(&ip, &images).unwrap();
    write_labels(&lp, &labels).unwrap();
    (ip.display().to_string(), lp.display().to_string())
}

#[test]
fn mnist_prep_feeds_train() {
    let dir = tempfile::tempdir().unwrap();
    let (ti, tl) = write_idx(dir.path(), "train", 200);
    let (si, sl) = write_idx(dir.path(), "test", 50);
    let prep = dir.path().join("prep");
    let prep_s = prep.to_str().unwrap();
    assert!(run(&[
        "mnist-prep",
        "-q",
        "--out-dir",
        prep_s,
        "--images",
        &ti,
        "--labels",
        &tl,
        "--test-images",
        &si,
        "--test-labels",
        &sl,
    ]));
    let summary = data_rows(&prep.join("mnist_summary.csv"));
    assert_eq!(summary.len(), 3);
    assert!(summary[0].starts_with("train,200,9,100,"));

    let cfg = prep.join("mnist.cfg");
    let out = dir.path().join("train");
    assert!(run(&[
        "train",
        "-q",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--np",
        "10",
        "--epochs",
        "2",
        "--methods",
        "nnpu",
    ]));
    let path = out.join("train_nnpu.csv");
    assert_eq!(metadata(&path, "dataset").as_deref(), Some("mnist"));
    assert_eq!(metadata(&path, "n_u_used").as_deref(), Some("200"));
    assert_eq!(metadata(&path, "n_test_used").as_deref(), Some("50"));
    assert_eq!(data_rows(&path).len(), 2);
}

fn binary(args: &[&str], out: &Path) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_pulearn"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
}

#[test]
fn exit_codes_distinguish_errors_from_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(
        binary(&["study", "-q", "--reps", "200", "--check", "none"], out),
        Some(0)
    );
    assert_eq!(binary(&["study", "-q", "--set", "bogus=1"], out), Some(2));
    assert_eq!(binary(&["study", "-q", "--check", "bogus"], out), Some(2));
    // a steep g with tiny samples has plenty of negative-risk events
    let failing = [
        "study",
        "-q",
        "--np",
        "2",
        "--nu",
        "20",
        "--reps",
        "2000",
        "--check",
        "vanishing-bias",
        "--set",
        "g_weights=3",
    ];
    assert_eq!(binary(&failing, out), Some(1));
}

#[test]
fn print_config_lists_resolved_values() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_pulearn"))
        .args(["train", "--print-config", "--epochs", "7", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.lines().any(|l| l.replace(' ', "") == "epochs=7"), "{text}");
    assert!(!dir.path().join("train_upu.csv").exists());
}
