//! End-to-end subcommand tests driving the compiled binary against small
//! fixtures in temp directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use divrec::factorization::{FactorModel, TrainConfig};
use divrec::nalgebra::DMatrix;
use tempfile::TempDir;

fn divrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divrec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = divrec(dir, args);
    assert!(
        out.status.success(),
        "divrec {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(dir: &Path, args: &[&str]) -> String {
    let out = divrec(dir, args);
    assert!(!out.status.success(), "divrec {args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Fully rated 6x8 grid with a deterministic value pattern; enough signal to
/// train on and split without emptying any row or column.
fn grid_ratings(dir: &Path) -> PathBuf {
    let mut text = String::new();
    for user in 1..=6u32 {
        for item in 1..=8u32 {
            let value = 1 + (user * 3 + item * 5) % 5;
            text.push_str(&format!("{user}\t{item}\t{value}\t0\n"));
        }
    }
    let path = dir.join("grid.tsv");
    fs::write(&path, text).unwrap();
    path
}

/// One user who rated four items, plus a handcrafted 2-d model: the first
/// latent axis carries the predicted score, the second spreads item 3 far
/// from the rest, so diversification has one obviously best swap available
/// once the floor has been discounted below that item's score.
fn scored_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("ratings.tsv");
    fs::write(&data, "1\t1\t5\t0\n1\t2\t4\t0\n1\t3\t3\t0\n1\t4\t2\t0\n").unwrap();
    let q = DMatrix::from_vec(2, 1, vec![1.0, 0.0]);
    let p = DMatrix::from_vec(
        2,
        4,
        vec![5.0, 0.2, 4.9, 0.0, 4.8, 0.0, 4.0, -6.0],
    );
    let model = FactorModel::from_factors(q, p, TrainConfig::new(2)).unwrap();
    let path = dir.join("model.bin");
    model.save(&path).unwrap();
    (data, path)
}

/// Same single-user data with a 1-d model whose negated axis puts the two
/// closest items at the top of the ranking: top-2 is {0,1} at distance 1,
/// while the widest pair sits at distance 7.
fn trace_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("ratings.tsv");
    fs::write(&data, "1\t1\t5\t0\n1\t2\t4\t0\n1\t3\t3\t0\n1\t4\t2\t0\n").unwrap();
    let q = DMatrix::from_vec(1, 1, vec![-1.0]);
    let p = DMatrix::from_vec(1, 4, vec![0.0, 1.0, 1.1, 7.0]);
    let model = FactorModel::from_factors(q, p, TrainConfig::new(1)).unwrap();
    let path = dir.join("model.bin");
    model.save(&path).unwrap();
    (data, path)
}

fn outcome_fields(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("user,status,iterations,swaps,final_floor,final_nilld")
    );
    let row = lines.next().expect("one outcome row");
    row.split(',').map(str::to_owned).collect()
}

#[test]
fn train_writes_model_and_monotone_log() {
    let dir = TempDir::new().unwrap();
    let data = grid_ratings(dir.path());
    run_ok(
        dir.path(),
        &[
            "train", "--data", data.to_str().unwrap(), "--test-fraction", "0.2",
            "--split-seed", "1", "--d", "3", "--lambda", "0.1", "--iters", "12",
            "--seed", "3", "--out", "model.bin",
        ],
    );

    assert!(dir.path().join("model.bin").exists());
    let log = fs::read_to_string(dir.path().join("model.log.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("iter,loss,train_rmse"));
    let losses: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!losses.is_empty());
    for pair in losses.windows(2) {
        assert!(
            pair[1] <= pair[0] * (1.0 + 1e-9),
            "loss rose from {} to {}",
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn train_is_byte_reproducible() {
    let train_in = |dir: &TempDir| {
        let data = grid_ratings(dir.path());
        run_ok(
            dir.path(),
            &[
                "train", "--data", data.to_str().unwrap(), "--d", "3", "--lambda",
                "0.1", "--iters", "8", "--seed", "3", "--out", "model.bin",
            ],
        );
    };
    let read = |dir: &TempDir, name: &str| fs::read(dir.path().join(name)).unwrap();

    let a = TempDir::new().unwrap();
    train_in(&a);
    let b = TempDir::new().unwrap();
    train_in(&b);

    assert_eq!(read(&a, "model.bin"), read(&b, "model.bin"));
    assert_eq!(read(&a, "model.log.csv"), read(&b, "model.log.csv"));
}

#[test]
fn missing_data_flag_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let stderr = run_err(dir.path(), &["train", "--d", "3", "--out", "m.bin"]);
    assert!(stderr.contains("--data"), "stderr was: {stderr}");
}

#[test]
fn zero_latent_dimension_names_the_flag() {
    let dir = TempDir::new().unwrap();
    let data = grid_ratings(dir.path());
    let stderr = run_err(
        dir.path(),
        &["train", "--data", data.to_str().unwrap(), "--d", "0", "--out", "m.bin"],
    );
    assert!(stderr.contains("--d"), "stderr was: {stderr}");
}

#[test]
fn evaluate_reports_trace_diversity_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let (data, model) = trace_fixture(dir.path());
    let args = [
        "evaluate", "--data", data.to_str().unwrap(), "--model", model.to_str().unwrap(),
        "--k", "2", "--test-fraction", "0.2", "--split-seed", "1",
        "--include-observed", "--out", "baseline.csv",
    ];
    run_ok(dir.path(), &args);

    let report = fs::read_to_string(dir.path().join("baseline.csv")).unwrap();
    let row = report.lines().nth(1).expect("one data row");
    let overall_nilld: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!(
        (overall_nilld - 1.0 / 7.0).abs() < 1e-9,
        "overall nILLD {overall_nilld} should be 1/7"
    );

    let first = fs::read(dir.path().join("baseline.csv")).unwrap();
    run_ok(dir.path(), &args);
    assert_eq!(first, fs::read(dir.path().join("baseline.csv")).unwrap());
}

#[test]
fn evaluate_rejects_oversized_k() {
    let dir = TempDir::new().unwrap();
    let (data, model) = trace_fixture(dir.path());
    let stderr = run_err(
        dir.path(),
        &[
            "evaluate", "--data", data.to_str().unwrap(), "--model",
            model.to_str().unwrap(), "--k", "9", "--include-observed",
        ],
    );
    assert!(stderr.contains('k'), "stderr was: {stderr}");
}

#[test]
fn evaluate_rejects_foreign_model_files() {
    let dir = TempDir::new().unwrap();
    let (data, _) = trace_fixture(dir.path());
    fs::write(dir.path().join("junk.bin"), b"not a model artifact").unwrap();
    let stderr = run_err(
        dir.path(),
        &[
            "evaluate", "--data", data.to_str().unwrap(), "--model", "junk.bin", "--k", "2",
        ],
    );
    assert!(
        stderr.contains("cannot load model") && stderr.contains("magic"),
        "stderr was: {stderr}"
    );
}

#[test]
fn diversify_reproduces_the_documented_trace() {
    let dir = TempDir::new().unwrap();
    let (data, model) = scored_fixture(dir.path());
    run_ok(
        dir.path(),
        &[
            "diversify", "--data", data.to_str().unwrap(), "--model",
            model.to_str().unwrap(), "--k", "2", "--alpha", "0.5",
            "--discount", "0.9", "--include-observed", "--out", "outcomes.csv",
        ],
    );

    let fields = outcome_fields(&dir.path().join("outcomes.csv"));
    assert_eq!(fields[0], "0");
    assert_eq!(fields[1], "satisfied");
    assert_eq!(fields[2], "3", "iterations");
    assert_eq!(fields[3], "1", "swaps");
    let floor: f64 = fields[4].parse().unwrap();
    assert!((floor - 4.9 * 0.9 * 0.9).abs() < 1e-9, "floor {floor}");
    let nilld: f64 = fields[5].parse().unwrap();
    // final list {1,3}: distance sqrt(0.9^2 + 6^2) against the widest pair
    // {0,3} at sqrt(1 + 6.2^2)
    let expected = (36.81f64).sqrt() / (39.44f64).sqrt();
    assert!((nilld - expected).abs() < 1e-9, "nilld {nilld} vs {expected}");
}

#[test]
fn diversify_alpha_zero_is_already_satisfied() {
    let dir = TempDir::new().unwrap();
    let (data, model) = scored_fixture(dir.path());
    run_ok(
        dir.path(),
        &[
            "diversify", "--data", data.to_str().unwrap(), "--model",
            model.to_str().unwrap(), "--k", "2", "--alpha", "0",
            "--include-observed", "--out", "outcomes.csv",
        ],
    );
    let fields = outcome_fields(&dir.path().join("outcomes.csv"));
    assert_eq!(fields[1], "already_satisfied");
    assert_eq!(fields[2], "0");
    assert_eq!(fields[3], "0");
}

#[test]
fn diversify_rejects_unit_discount() {
    let dir = TempDir::new().unwrap();
    let (data, model) = scored_fixture(dir.path());
    let stderr = run_err(
        dir.path(),
        &[
            "diversify", "--data", data.to_str().unwrap(), "--model",
            model.to_str().unwrap(), "--k", "2", "--alpha", "0.5", "--discount", "1.0",
        ],
    );
    assert!(stderr.contains("--discount"), "stderr was: {stderr}");
}

#[test]
fn sweep_sorts_unsorted_alphas_and_notes_it() {
    let dir = TempDir::new().unwrap();
    let (data, model) = scored_fixture(dir.path());
    let out = run_ok(
        dir.path(),
        &[
            "sweep", "--data", data.to_str().unwrap(), "--model", model.to_str().unwrap(),
            "--k", "2", "--test-fraction", "0.2", "--split-seed", "1",
            "--alphas", "0.9,0.1,0.5", "--include-observed", "--out-dir", "out",
        ],
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sorted"), "stderr was: {stderr}");

    let report = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let alphas: Vec<f64> = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(alphas, vec![0.1, 0.5, 0.9]);

    let exposure = fs::read_to_string(dir.path().join("out/exposure.csv")).unwrap();
    assert_eq!(exposure.lines().next(), Some("item,baseline_count,postprocessed_count"));
    assert_eq!(exposure.lines().count(), 5, "header plus one row per item");
}

#[test]
fn sorted_alphas_run_without_a_note() {
    let dir = TempDir::new().unwrap();
    let (data, model) = scored_fixture(dir.path());
    let out = run_ok(
        dir.path(),
        &[
            "sweep", "--data", data.to_str().unwrap(), "--model", model.to_str().unwrap(),
            "--k", "2", "--test-fraction", "0.2", "--split-seed", "1",
            "--alphas", "0.1,0.5,0.9", "--include-observed", "--out-dir", "out",
        ],
    );
    assert!(out.stderr.is_empty(), "unexpected stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let (data, model) = scored_fixture(dir.path());
    fs::write(
        dir.path().join("run.toml"),
        format!(
            "data = {:?}\nmodel = {:?}\nk = 2\nalpha = 0.9\ninclude_observed = true\n",
            data.to_str().unwrap(),
            model.to_str().unwrap(),
        ),
    )
    .unwrap();

    // alpha 0.9 from the file would not satisfy; the flag's 0.5 must win,
    // while data, model, k, and the observed policy all come from the file.
    run_ok(
        dir.path(),
        &["diversify", "--config", "run.toml", "--alpha", "0.5", "--out", "outcomes.csv"],
    );
    let fields = outcome_fields(&dir.path().join("outcomes.csv"));
    assert_eq!(fields[1], "satisfied");
    assert_eq!(fields[2], "3");
    assert_eq!(fields[3], "1");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.toml"), "dataa = \"x\"\n").unwrap();
    let stderr = run_err(dir.path(), &["train", "--config", "run.toml", "--d", "3"]);
    assert!(stderr.contains("run.toml"), "stderr was: {stderr}");
}
