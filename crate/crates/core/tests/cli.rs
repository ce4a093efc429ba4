use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use semrank::bpnn::{BpNetwork, LayerSizes};

fn semrank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semrank"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run semrank")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn synth_small(dir: &Path) {
    let out = semrank(
        dir,
        &["synth", "--seed", "4", "--books", "120", "--events", "600"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_three_files_and_prints_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = semrank(
        dir.path(),
        &[
            "synth",
            "--books",
            "100",
            "--events",
            "500",
            "--out-dir",
            "data",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed 0"));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "wrote 100 books, 500 events, 2 users"
    );
    let log = fs::read_to_string(dir.path().join("data/log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 500);
    for f in ["catalog.json", "ground_truth.json"] {
        assert!(dir.path().join("data").join(f).exists());
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = semrank(
        dir.path(),
        &[
            "synth",
            "--books",
            "10",
            "--events",
            "10",
            "--out-dir",
            "blocker/sub",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_catalog_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&semrank(dir.path(), &["train"])), 2);
}

#[test]
fn corrupt_model_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    assert_eq!(code(&semrank(dir.path(), &["train", "--epochs", "5"])), 0);
    fs::write(dir.path().join("model.json"), "{\"sizes\": ").unwrap();
    assert_eq!(code(&semrank(dir.path(), &["rank", "anything"])), 2);
}

#[test]
fn empty_log_cannot_train() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = semrank(dir.path(), &["train", "--log", "empty.jsonl"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("training set is empty"));
}

#[test]
fn too_few_sessions_for_folds() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    let log = fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    let first: String = log.lines().take(1).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("tiny.jsonl"), first).unwrap();
    let out = semrank(dir.path(), &["eval", "--log", "tiny.jsonl", "--folds", "5"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn bad_arguments_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    assert_eq!(code(&semrank(dir.path(), &["bogus"])), 4);
    assert_eq!(code(&semrank(dir.path(), &["train", "--lr", "-1"])), 4);
    assert_eq!(code(&semrank(dir.path(), &["train", "--hidden", "0"])), 4);
    assert_eq!(code(&semrank(dir.path(), &["eval", "--folds", "1"])), 4);
    assert_eq!(code(&semrank(dir.path(), &["eval", "--lengths", "2,x"])), 4);
    assert_eq!(
        code(&semrank(
            dir.path(),
            &["train", "--output-activation", "relu"]
        )),
        4
    );
    assert_eq!(
        code(&semrank(dir.path(), &["train", "--epochs", "many"])),
        4
    );
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&semrank(dir.path(), &["--help"])), 0);
}

#[test]
fn punctuation_query_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    assert_eq!(code(&semrank(dir.path(), &["train", "--epochs", "5"])), 0);
    let out = semrank(dir.path(), &["rank", "!!!"]);
    assert_eq!(code(&out), 4);
    assert!(out.stdout.is_empty());
}

#[test]
fn train_then_rank_lists_descending_scores() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    let out = semrank(dir.path(), &["train", "--epochs", "30"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("epochs 30"));
    BpNetwork::load(&dir.path().join("model.json")).unwrap();

    let catalog: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("catalog.json")).unwrap())
            .unwrap();
    let title = catalog[0]["title"].as_str().unwrap();
    let out = semrank(dir.path(), &["rank", title, "--top-n", "5"]);
    assert_eq!(code(&out), 0);
    let listing = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = listing.lines().map(|l| l.split('\t').collect()).collect();
    assert!(!rows.is_empty() && rows.len() <= 5);
    let scores: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(rows[0][0], "1");
}

#[test]
fn zero_epochs_saves_the_seeded_init() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    let out = semrank(
        dir.path(),
        &["train", "--epochs", "0", "--seed", "17", "--hidden", "6"],
    );
    assert_eq!(code(&out), 0);
    let saved = BpNetwork::load(&dir.path().join("model.json")).unwrap();
    assert_eq!(
        saved,
        BpNetwork::init(17, LayerSizes::new(5, 6, 1)).unwrap()
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    fs::write(
        dir.path().join("run.conf"),
        "# small run\nepochs = 0\nseed = 5\nhidden = 3\nmodel = from_config.json\n",
    )
    .unwrap();
    let out = semrank(
        dir.path(),
        &["train", "--config", "run.conf", "--seed", "6"],
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed 6"));
    let saved = BpNetwork::load(&dir.path().join("from_config.json")).unwrap();
    assert_eq!(saved, BpNetwork::init(6, LayerSizes::new(5, 3, 1)).unwrap());

    fs::write(dir.path().join("bad.conf"), "colour = blue\n").unwrap();
    assert_eq!(
        code(&semrank(dir.path(), &["train", "--config", "bad.conf"])),
        4
    );
}

#[test]
fn eval_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    let out = semrank(
        dir.path(),
        &[
            "eval",
            "--epochs",
            "10",
            "--folds",
            "3",
            "--lengths",
            "2,4",
            "--report",
            "r.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("fold  seq_len"));
    let report: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report.len(), 3 * 3);
    for row in &report {
        for key in ["fold", "seq_len", "precision", "recall", "n_users", "top_n"] {
            assert!(row.get(key).is_some(), "missing {key}");
        }
    }
    assert_eq!(report[1]["seq_len"], 2);
    assert!(report[0]["seq_len"].is_null());
}
