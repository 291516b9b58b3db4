//! End-to-end tests driving the `nbes` binary: exit codes, output files and
//! the reproducibility contract (reruns are byte-identical up to timing
//! fields).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_nbes")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawning nbes")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A uniform_theta config small enough that training takes well under a
/// second.
fn tiny_config() -> &'static str {
    r#"{
  "model": {"id": "uniform_theta"},
  "architecture": {"q": 4, "psi_hidden": [8], "phi_hidden": [8], "expert": {"kind": "none"}},
  "training": {
    "train_draws": 48, "val_draws": 24, "sets_per_draw": 1, "batch_size": 24,
    "learning_rate": 0.01, "patience": 2, "max_epochs": 3,
    "replicates": {"kind": "fixed", "m": 3}
  },
  "seed": 7
}"#
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

/// Drops the trailing seconds column so risk and run CSVs can be compared
/// across reruns.
fn strip_seconds(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    for out_dir in ["a", "b"] {
        let out = run_in(
            tmp.path(),
            &[
                "simulate", "--config", "config.json", "--out", out_dir, "--from-prior", "--m", "6",
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("n=1 m=6 seed=7"), "{text}");
    }
    let a = fs::read(tmp.path().join("a/data.bin")).unwrap();
    let b = fs::read(tmp.path().join("b/data.bin")).unwrap();
    assert_eq!(a, b);
    let ea = fs::read(tmp.path().join("a/effective_config.json")).unwrap();
    let eb = fs::read(tmp.path().join("b/effective_config.json")).unwrap();
    assert_eq!(ea, eb);
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    for (out_dir, seed) in [("a", "7"), ("b", "8")] {
        let out = run_in(
            tmp.path(),
            &[
                "simulate", "--config", "config.json", "--out", out_dir, "--seed", seed,
                "--from-prior", "--m", "6",
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = fs::read(tmp.path().join("a/data.bin")).unwrap();
    let b = fs::read(tmp.path().join("b/data.bin")).unwrap();
    assert_ne!(a, b, "different seeds simulated identical data");
    let echoed = fs::read_to_string(tmp.path().join("b/effective_config.json")).unwrap();
    assert!(echoed.contains("\"seed\": 8"), "{echoed}");
}

#[test]
fn simulate_error_paths_use_the_documented_exit_codes() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    let base = ["simulate", "--config", "config.json", "--out", "x"];

    // Flag validation failures are config failures.
    let cases: &[(&[&str], i32)] = &[
        (&["--theta", "1.0", "--m", "0"], 2),
        (&["--theta", "1.0,2.0", "--m", "3"], 2),
        (&["--theta", "abc", "--m", "3"], 2),
        (&["--m", "3"], 2),
        // Inside the model's domain checks: a simulation failure.
        (&["--theta", "-1.0", "--m", "3"], 3),
    ];
    for (extra, expected) in cases {
        let args: Vec<&str> = base.iter().chain(extra.iter()).copied().collect();
        let out = run_in(tmp.path(), &args);
        assert_eq!(code(&out), *expected, "args {extra:?}: {}", stderr(&out));
    }

    let out = run_in(tmp.path(), &["simulate", "--from-prior", "--m", "3"]);
    assert_eq!(code(&out), 2, "missing --config must be a config failure");
}

#[test]
fn invalid_config_corpus_is_rejected_before_compute() {
    let corpus: &[(&str, &str)] = &[
        ("not_json", "{]"),
        ("unknown_top_field", r#"{"model": {"id": "uniform_theta"}, "bogus": 1}"#),
        ("unknown_model_field", r#"{"model": {"id": "uniform_theta", "shape": 2}}"#),
        ("unknown_model_id", r#"{"model": {"id": "nope"}}"#),
        ("inapplicable_model_field", r#"{"model": {"id": "uniform_theta", "nu": 1.0}}"#),
        ("empty_prior", r#"{"model": {"id": "uniform_theta"}, "prior": []}"#),
        (
            "uniform_lo_not_below_hi",
            r#"{"model": {"id": "uniform_theta"}, "prior": [{"kind": "uniform", "lo": 2.0, "hi": 2.0}]}"#,
        ),
        (
            "pareto_bad_shape",
            r#"{"model": {"id": "uniform_theta"}, "prior": [{"kind": "pareto", "shape": 0.0, "scale": 1.0}]}"#,
        ),
        (
            "prior_dimension_mismatch",
            r#"{"model": {"id": "gp"}, "prior": [{"kind": "uniform", "lo": 0.1, "hi": 1.0}]}"#,
        ),
        (
            "prior_on_fixed_prior_model",
            r#"{"model": {"id": "linear_regression"}, "prior": [{"kind": "std_normal"}, {"kind": "std_normal"}]}"#,
        ),
        ("zero_summary_dim", r#"{"model": {"id": "uniform_theta"}, "architecture": {"q": 0}}"#),
        (
            "zero_hidden_width",
            r#"{"model": {"id": "uniform_theta"}, "architecture": {"psi_hidden": [0]}}"#,
        ),
        (
            "empty_quantile_probs",
            r#"{"model": {"id": "uniform_theta"}, "architecture": {"expert": {"kind": "quantiles", "probs": []}}}"#,
        ),
        (
            "quantile_prob_out_of_range",
            r#"{"model": {"id": "uniform_theta"}, "architecture": {"expert": {"kind": "quantiles", "probs": [1.5]}}}"#,
        ),
        ("zero_train_draws", r#"{"model": {"id": "uniform_theta"}, "training": {"train_draws": 0}}"#),
        (
            "zero_learning_rate",
            r#"{"model": {"id": "uniform_theta"}, "training": {"learning_rate": 0.0}}"#,
        ),
        ("zero_batch", r#"{"model": {"id": "uniform_theta"}, "training": {"batch_size": 0}}"#),
        (
            "non_differentiable_training_loss",
            r#"{"model": {"id": "uniform_theta"}, "training": {"loss": {"kind": "zero_one"}}}"#,
        ),
        (
            "replicate_range_reversed",
            r#"{"model": {"id": "uniform_theta"}, "training": {"replicates": {"kind": "uniform", "lo": 5, "hi": 2}}}"#,
        ),
        (
            "empty_piecewise",
            r#"{"model": {"id": "uniform_theta"}, "piecewise": {"sizes": [], "changepoints": []}}"#,
        ),
        (
            "changepoint_count_mismatch",
            r#"{"model": {"id": "uniform_theta"}, "piecewise": {"sizes": [1, 10], "changepoints": []}}"#,
        ),
        (
            "non_monotone_changepoints",
            r#"{"model": {"id": "uniform_theta"}, "piecewise": {"sizes": [1, 10, 30], "changepoints": [20, 5]}}"#,
        ),
        ("zero_grid", r#"{"model": {"id": "gp", "grid": [0, 8]}}"#),
        ("negative_seed", r#"{"model": {"id": "uniform_theta"}, "seed": -1}"#),
        ("empty_path", r#"{"model": {"id": "uniform_theta"}, "paths": {"data": ""}}"#),
    ];
    assert!(corpus.len() >= 20, "corpus holds {} configs", corpus.len());

    let tmp = TempDir::new().unwrap();
    for (name, text) in corpus {
        let path = tmp.path().join(format!("{name}.json"));
        fs::write(&path, text).unwrap();
        let out = run_in(
            tmp.path(),
            &[
                "simulate", "--config", path.to_str().unwrap(), "--out", "x", "--theta", "1.0",
                "--m", "1",
            ],
        );
        assert_eq!(code(&out), 2, "config {name} must exit 2: {}", stderr(&out));
        assert!(stderr(&out).contains("error"), "config {name}: {}", stderr(&out));
    }
}

#[test]
fn train_writes_checkpoint_and_reproducible_csv() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    for out_dir in ["a", "b"] {
        let out = run_in(tmp.path(), &["train", "--config", "config.json", "--out", out_dir]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("best validation risk"), "{text}");
        assert!(tmp.path().join(out_dir).join("checkpoint/manifest.json").is_file());
    }
    let a = fs::read_to_string(tmp.path().join("a/reports/train_run.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/reports/train_run.csv")).unwrap();
    assert!(a.starts_with("epoch,train_risk,val_risk,seconds\n"), "{a}");
    assert_eq!(strip_seconds(&a), strip_seconds(&b));

    // A different seed must change the recorded risks.
    let out = run_in(
        tmp.path(),
        &["train", "--config", "config.json", "--out", "c", "--seed", "8"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let c = fs::read_to_string(tmp.path().join("c/reports/train_run.csv")).unwrap();
    assert_ne!(strip_seconds(&a), strip_seconds(&c));
}

#[test]
fn train_resumes_from_an_initial_checkpoint() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    let out = run_in(tmp.path(), &["train", "--config", "config.json", "--out", "a"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = run_in(
        tmp.path(),
        &[
            "train", "--config", "config.json", "--out", "b", "--init-checkpoint",
            "../a/checkpoint",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("resuming from"), "{}", stdout(&out));
    let a = fs::read_to_string(tmp.path().join("a/reports/train_run.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/reports/train_run.csv")).unwrap();
    assert_ne!(
        strip_seconds(&a),
        strip_seconds(&b),
        "warm start must train a different trajectory"
    );

    // A checkpoint from another shape is an artifact mismatch.
    let gp_cfg = r#"{"model": {"id": "gp"}, "architecture": {"q": 4, "psi_hidden": [8], "phi_hidden": [8], "expert": {"kind": "none"}}}"#;
    let path = tmp.path().join("gp.json");
    fs::write(&path, gp_cfg).unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "train", "--config", "gp.json", "--out", "g", "--init-checkpoint", "../a/checkpoint",
        ],
    );
    assert_eq!(code(&out), 5, "{}", stderr(&out));
}

#[test]
fn piecewise_training_writes_one_csv_per_stage() {
    let tmp = TempDir::new().unwrap();
    let config = r#"{
  "model": {"id": "uniform_theta"},
  "architecture": {"q": 4, "psi_hidden": [8], "phi_hidden": [8], "expert": {"kind": "none"}},
  "training": {
    "train_draws": 48, "val_draws": 24, "sets_per_draw": 1, "batch_size": 24,
    "learning_rate": 0.01, "patience": 2, "max_epochs": 2,
    "replicates": {"kind": "fixed", "m": 3}
  },
  "piecewise": {"sizes": [1, 4], "changepoints": [2]},
  "seed": 7
}"#;
    write_config(tmp.path(), config);
    let out = run_in(tmp.path(), &["train", "--config", "config.json", "--out", "a"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("a/reports/train_stage_001.csv").is_file());
    assert!(tmp.path().join("a/reports/train_stage_002.csv").is_file());
    assert!(tmp.path().join("a/checkpoint/sub_001.bin").is_file());
}

#[test]
fn assess_reports_every_loss_and_shared_data_makes_twins_identical() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    let out = run_in(tmp.path(), &["train", "--config", "config.json", "--out", "a"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = run_in(
        tmp.path(),
        &[
            "assess", "--config", "config.json", "--out", "a", "checkpoint", "checkpoint",
            "--baseline", "oracle", "--m-grid", "1,5", "--losses", "absolute,zero_one",
            "--k-test", "40",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("a/reports/risk.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    // 3 estimators (checkpoint, its twin, oracle) over 2 sizes and 2 losses.
    assert_eq!(rows.len(), 12, "{csv}");
    for loss in ["absolute", "zero_one"] {
        assert!(rows.iter().any(|r| r.contains(loss)), "{csv}");
    }

    // The duplicate checkpoint saw the same data: identical risk and se.
    for row in rows.iter().filter(|r| r.starts_with("checkpoint,")) {
        let twin = row.replacen("checkpoint,", "checkpoint#2,", 1);
        let twin_stripped = strip_seconds(&twin);
        assert!(
            rows.iter().map(|r| strip_seconds(r)).any(|r| r == twin_stripped),
            "missing twin row for {row}: {csv}"
        );
    }
    assert!(rows.iter().any(|r| r.starts_with("oracle,")), "{csv}");
}

#[test]
fn assess_rejects_bad_flags_and_foreign_checkpoints() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    let out = run_in(tmp.path(), &["train", "--config", "config.json", "--out", "a"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let base = ["assess", "--config", "config.json", "--out", "a", "checkpoint", "--k-test", "5"];
    for (extra, expected) in [
        (vec!["--losses", "hinge"], 2),
        (vec!["--baseline", "map"], 2),
        (vec!["--m-grid", "1,0"], 2),
    ] {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        let out = run_in(tmp.path(), &args);
        assert_eq!(code(&out), expected, "args {extra:?}: {}", stderr(&out));
    }

    // A checkpoint directory that does not exist is an artifact failure.
    let out = run_in(
        tmp.path(),
        &["assess", "--config", "config.json", "--out", "a", "missing", "--k-test", "5"],
    );
    assert_eq!(code(&out), 5, "{}", stderr(&out));
}

#[test]
fn estimate_writes_one_row_per_parameter() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    for (cmd, extra) in [
        ("train", vec![]),
        ("simulate", vec!["--theta", "1.4", "--m", "5"]),
    ] {
        let mut args = vec![cmd, "--config", "config.json", "--out", "a"];
        args.extend(extra);
        let out = run_in(tmp.path(), &args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }

    for run_dir in ["a", "b"] {
        let out = run_in(
            tmp.path(),
            &[
                "estimate", "--config", "config.json", "--out", run_dir, "../a/checkpoint",
                "../a/data.bin",
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("wall time"), "{}", stdout(&out));
    }
    let a = fs::read_to_string(tmp.path().join("a/reports/estimates.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/reports/estimates.csv")).unwrap();
    assert_eq!(a, b, "estimates must not depend on the output directory");
    assert_eq!(a.lines().count(), 2, "{a}");
    assert!(a.starts_with("param,estimate\ntheta,"), "{a}");
}

#[test]
fn estimate_rejects_mismatched_artifacts() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    let out = run_in(tmp.path(), &["train", "--config", "config.json", "--out", "a"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // Data simulated under a different model id with the same replicate
    // dimension: the container records the difference.
    let nv_cfg = r#"{"model": {"id": "normal_variance"}}"#;
    fs::write(tmp.path().join("nv.json"), nv_cfg).unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "simulate", "--config", "nv.json", "--out", "nv", "--theta", "1.0", "--m", "5",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run_in(
        tmp.path(),
        &[
            "estimate", "--config", "config.json", "--out", "a", "checkpoint", "../nv/data.bin",
        ],
    );
    assert_eq!(code(&out), 5, "{}", stderr(&out));

    // Replicate dimension mismatch: spatial data against a scalar checkpoint.
    let gp_cfg = r#"{"model": {"id": "gp", "grid": [3, 3]}}"#;
    fs::write(tmp.path().join("gp.json"), gp_cfg).unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "simulate", "--config", "gp.json", "--out", "gp", "--theta", "0.5,5.0,1.0", "--m",
            "2",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run_in(
        tmp.path(),
        &[
            "estimate", "--config", "config.json", "--out", "a", "checkpoint", "../gp/data.bin",
        ],
    );
    assert_eq!(code(&out), 5, "{}", stderr(&out));
}

#[test]
fn bootstrap_handles_degenerate_blocks_and_tiny_b() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), tiny_config());
    for (cmd, extra) in [
        ("train", vec![]),
        ("simulate", vec!["--theta", "1.4", "--m", "6"]),
    ] {
        let mut args = vec![cmd, "--config", "config.json", "--out", "a"];
        args.extend(extra);
        let out = run_in(tmp.path(), &args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }

    // One block: every pseudo-set equals the original, so the interval has
    // zero width at the point estimate.
    fs::write(tmp.path().join("one_block.txt"), "3\n3\n3\n3\n3\n3\n").unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "bootstrap", "--config", "config.json", "--out", "a", "checkpoint", "data.bin",
            "--blocks", "../one_block.txt", "--B", "20",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("a/reports/bootstrap.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "theta");
    assert_eq!(fields[2], fields[3], "one block must give a zero-width interval: {csv}");
    assert_eq!(fields[1], fields[2], "the interval must sit at the point estimate: {csv}");

    // B=2 interpolates between the two resampled estimates.
    let out = run_in(
        tmp.path(),
        &[
            "bootstrap", "--config", "config.json", "--out", "a", "checkpoint", "data.bin",
            "--B", "2",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("for 2 resamples"), "{text}");

    // Label count must match the data.
    fs::write(tmp.path().join("short.txt"), "1\n2\n").unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "bootstrap", "--config", "config.json", "--out", "a", "checkpoint", "data.bin",
            "--blocks", "../short.txt", "--B", "20",
        ],
    );
    assert_eq!(code(&out), 5, "{}", stderr(&out));

    // Nonsense levels are config failures.
    let out = run_in(
        tmp.path(),
        &[
            "bootstrap", "--config", "config.json", "--out", "a", "checkpoint", "data.bin",
            "--B", "20", "--levels", "0.9,0.1",
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}
