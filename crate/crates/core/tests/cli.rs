//! End-to-end tests of the `deferlab` binary: exit codes, artifact
//! layout, byte-determinism, and manifest re-execution.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn deferlab(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_deferlab"));
    cmd.args(args);
    cmd
}

fn run_ok(args: &[&str]) -> Output {
    let out = deferlab(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const TINY_DRIVING: &[&str] = &[
    "--repetitions",
    "2",
    "--seed",
    "7",
    "--set",
    "driving.num_drivers=3",
    "--set",
    "driving.trips_per_driver=8",
    "--set",
    "driving.num_unlabeled=10",
    "--set",
    "train.epochs=2",
    "--set",
    "regimes=[\"none\",\"finetune\"]",
    "--set",
    "save_models=none",
];

#[test]
fn missing_config_file_exits_2() {
    let out = deferlab(&["run", "--config", "/nonexistent/deferlab.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/deferlab.json"), "{stderr}");
}

#[test]
fn unknown_config_key_exits_2() {
    let out = deferlab(&["run", "--set", "trian.epochs=3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_driving_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let mut args_a: Vec<&str> = vec!["run", "--experiment", "driving"];
    args_a.extend_from_slice(TINY_DRIVING);
    let mut args_b = args_a.clone();
    args_a.extend_from_slice(&["--out", out_a.to_str().unwrap()]);
    args_b.extend_from_slice(&["--out", out_b.to_str().unwrap()]);
    run_ok(&args_a);
    run_ok(&args_b);
    let a = fs::read(out_a.join("driving_results.csv")).unwrap();
    let b = fs::read(out_b.join("driving_results.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resolved_config_reexecutes_the_run() {
    // The emitted resolved config alone reproduces the results.
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let mut args: Vec<&str> = vec!["run-driving"];
    args.extend_from_slice(TINY_DRIVING);
    args.extend_from_slice(&["--out", out_a.to_str().unwrap()]);
    run_ok(&args);

    let resolved = out_a.join("resolved_config.json");
    run_ok(&[
        "run",
        "--config",
        resolved.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    let a = fs::read(out_a.join("driving_results.csv")).unwrap();
    let b = fs::read(out_b.join("driving_results.csv")).unwrap();
    assert_eq!(a, b);

    // The manifest embeds the same config and names the artifacts.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["experiment"], "driving");
    assert_eq!(manifest["artifacts"]["results_csv"], "driving_results.csv");
}

#[test]
fn bound_subcommand_prints_table_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&[
        "bound",
        "--seed",
        "3",
        "--set",
        "bound.trials=10000",
        "--set",
        "bound.probs=[0.3,0.7]",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("p_h,p_m,epsilon,noise_kind,bound,empirical,ci_halfwidth,status"));
    assert!(stdout.contains("pass"));
    let csv = fs::read_to_string(dir.path().join("bound_results.csv")).unwrap();
    // 2 ordered pairs x 3 epsilons x 3 noise kinds, plus the header.
    assert_eq!(csv.lines().count(), 1 + 18);
}

#[test]
fn classification_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "run-classification",
        "--seed",
        "5",
        "--set",
        "classification.per_class=40",
        "--set",
        "classification.aggregate_size=100",
        "--set",
        "classification.specific_size=40",
        "--set",
        "classification.expert_ks=[0,10]",
        "--set",
        "classification.hidden=[8]",
        "--set",
        "train.epochs=2",
        "--set",
        "save_models=summary",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(dir.path().join("classification_results.csv")).unwrap();
    // 2 expert values x 3 regimes, plus the header.
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.starts_with(
        "run_id,regime,expert_k,alpha,seed,system_accuracy,deference_rate,deferred_accuracy,human_model_accuracy"
    ));
    // Summary persistence: one human model + rejector per regime.
    let models: Vec<_> = fs::read_dir(dir.path().join("models")).unwrap().collect();
    assert_eq!(models.len(), 6);
}

#[test]
fn gen_driving_writes_parseable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "gen-driving",
        "--seed",
        "9",
        "--set",
        "driving.num_drivers=4",
        "--set",
        "driving.trips_per_driver=6",
        "--set",
        "driving.num_unlabeled=5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let body: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("driving_dataset.json")).unwrap())
            .unwrap();
    assert_eq!(body["schema_version"], 1);
    assert_eq!(body["dataset"]["drivers"].as_array().unwrap().len(), 4);
    assert_eq!(
        body["dataset"]["aggregate"].as_array().unwrap().len(),
        3 * 6
    );
    assert_eq!(body["dataset"]["unlabeled"].as_array().unwrap().len(), 5);
}

#[test]
fn out_dir_falls_back_to_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from-env");
    let mut cmd = deferlab(&[
        "bound",
        "--set",
        "bound.trials=10000",
        "--set",
        "bound.probs=[0.2,0.6]",
    ]);
    cmd.env("DEFERLAB_OUT", &env_out);
    let out = cmd.output().unwrap();
    assert!(out.status.success());
    assert!(env_out.join("bound_results.csv").exists());
}

#[test]
fn grad_check_passes() {
    let out = run_ok(&["grad-check", "--samples", "20", "--seed", "2"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("pass").count(), 3, "{stdout}");
}

#[test]
fn dedicated_flags_override_set_entries() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "run-driving",
        "--set",
        "repetitions=5",
        "--repetitions",
        "2",
        "--seed",
        "1",
        "--set",
        "driving.num_drivers=2",
        "--set",
        "driving.trips_per_driver=6",
        "--set",
        "driving.num_unlabeled=5",
        "--set",
        "train.epochs=1",
        "--set",
        "regimes=[\"none\"]",
        "--set",
        "save_models=none",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("resolved_config.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["repetitions"], 2);
    assert_eq!(resolved["seeds"], serde_json::json!([1]));
}

#[test]
fn model_files_are_loadable() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "run-driving",
        "--repetitions",
        "2",
        "--seed",
        "7",
        "--set",
        "driving.num_drivers=3",
        "--set",
        "driving.trips_per_driver=8",
        "--set",
        "driving.num_unlabeled=10",
        "--set",
        "train.epochs=2",
        "--set",
        "regimes=[\"none\",\"finetune\"]",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let models = dir.path().join("models");
    let mut count = 0;
    for entry in fs::read_dir(&models).unwrap() {
        let path = entry.unwrap().path();
        deferlab::cli::load_model(&path).expect("saved model loads");
        count += 1;
    }
    // Policy and time model per regime.
    assert_eq!(count, 4);
    assert!(Path::new(&models).join("driving_none_policy.json").exists());
}
