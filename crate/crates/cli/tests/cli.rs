//! CLI surface checks: flags override config, errors name their field,
//! per-command outputs exist where documented.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicrank"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("spawn topicrank")
}

fn run_ok(args: &[&str]) -> Output {
    let output = run(args);
    assert!(
        output.status.success(),
        "`topicrank {}` failed:\n{}\n{}",
        args.join(" "),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    output
}

fn small_synth(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "synth",
        "--dir",
        dir.to_str().unwrap(),
        "--seed",
        "7",
        "--users",
        "6",
        "--topics",
        "3",
        "--vocab-size",
        "300",
        "--docs",
        "300",
        "--sessions-per-user",
        "3",
        "--entries-per-session",
        "3",
    ];
    args.extend_from_slice(extra);
    run_ok(&args);
}

fn small_train(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "train",
        "--dir",
        dir.to_str().unwrap(),
        "--k",
        "3",
        "--lda-iterations",
        "60",
        "--infer-iterations",
        "30",
        "--infer-burn-in",
        "10",
        "--epochs-per-phase",
        "10",
        "--eta",
        "0.02",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    run_ok(&args);
}

#[test]
fn synth_is_deterministic_and_creates_missing_dirs() {
    let root = TempDir::new().unwrap();
    let a = root.path().join("deeply/nested/a");
    let b = root.path().join("deeply/nested/b");
    small_synth(&a, &[]);
    small_synth(&b, &[]);
    for name in ["corpus.jsonl", "log.jsonl", "ground_truth.json"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs across identically seeded synth runs"
        );
    }
}

#[test]
fn invalid_synth_config_exits_nonzero_and_names_the_field() {
    let dir = TempDir::new().unwrap();
    let output = run(&[
        "synth",
        "--dir",
        dir.path().to_str().unwrap(),
        "--click-noise",
        "1.5",
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("click_noise"),
        "error should name the offending field: {stderr}"
    );
}

#[test]
fn prepare_emits_positive_stats_and_honors_the_gap_flag() {
    let dir = TempDir::new().unwrap();
    small_synth(dir.path(), &[]);
    run_ok(&["prepare", "--dir", dir.path().to_str().unwrap()]);

    let stats = std::fs::read_to_string(dir.path().join("stats.txt")).unwrap();
    let counts: Vec<i64> = stats
        .lines()
        .nth(1)
        .unwrap()
        .split('|')
        .map(|v| v.trim().parse().unwrap())
        .collect();
    assert_eq!(counts.len(), 6);
    // users, distinct queries, SAT clicks, sessions, distinct documents
    for count in &counts[1..] {
        assert!(*count > 0, "stats row has a zero count: {stats}");
    }
    let sessions_default = counts[4];

    // A 60-second gap splits every entry into its own session.
    run_ok(&[
        "prepare",
        "--dir",
        dir.path().to_str().unwrap(),
        "--session-gap",
        "60",
    ]);
    let stats60 = std::fs::read_to_string(dir.path().join("stats.txt")).unwrap();
    let sessions_60: i64 = stats60
        .lines()
        .nth(1)
        .unwrap()
        .split('|')
        .nth(4)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(
        sessions_60 > sessions_default,
        "gap 60 should create more sessions ({sessions_60} vs {sessions_default})"
    );
}

#[test]
fn prepare_reruns_byte_identically() {
    let dir = TempDir::new().unwrap();
    small_synth(dir.path(), &[]);
    run_ok(&["prepare", "--dir", dir.path().to_str().unwrap()]);
    let first: Vec<Vec<u8>> = ["train.jsonl", "validation.jsonl", "test.jsonl", "stats.txt"]
        .iter()
        .map(|n| std::fs::read(dir.path().join(n)).unwrap())
        .collect();
    run_ok(&["prepare", "--dir", dir.path().to_str().unwrap()]);
    for (name, before) in ["train.jsonl", "validation.jsonl", "test.jsonl", "stats.txt"]
        .iter()
        .zip(first)
    {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            before,
            "{name} changed across reruns"
        );
    }
}

#[test]
fn default_flags_match_tuned_hyperparameters() {
    let dir = TempDir::new().unwrap();
    small_synth(dir.path(), &[]);
    let resolved = std::fs::read_to_string(dir.path().join("resolved_config.toml")).unwrap();
    for expected in [
        "k = 200",
        "delta = 0.8",
        "norm = \"l1\"",
        "eta = 0.005",
        "gamma = 5.0",
        "epochs_per_phase = 200",
    ] {
        assert!(
            resolved.contains(expected),
            "resolved config missing {expected:?}:\n{resolved}"
        );
    }
}

#[test]
fn ablation_flag_freezes_matrices_at_identity() {
    let dir = TempDir::new().unwrap();
    small_synth(dir.path(), &[]);
    run_ok(&["prepare", "--dir", dir.path().to_str().unwrap()]);
    small_train(dir.path(), &["--ablation-identity-w"]);

    let (profiles, _) =
        topicrank::profile::load_profiles(dir.path().join("profiles_ablation.json")).unwrap();
    assert!(!profiles.is_empty());
    for profile in profiles.values() {
        assert!(profile.w1.is_identity() && profile.w2.is_identity());
    }
}

#[test]
fn grid_flag_selects_by_validation_mrr() {
    let dir = TempDir::new().unwrap();
    small_synth(dir.path(), &[]);
    run_ok(&["prepare", "--dir", dir.path().to_str().unwrap()]);
    let output = run_ok(&[
        "train",
        "--dir",
        dir.path().to_str().unwrap(),
        "--lda-iterations",
        "60",
        "--infer-iterations",
        "30",
        "--infer-burn-in",
        "10",
        "--epochs-per-phase",
        "10",
        "--seed",
        "5",
        "--grid-k",
        "3,4",
        "--grid-eta",
        "0.01,0.02",
    ]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    let combos = stdout
        .lines()
        .filter(|l| l.starts_with("grid:"))
        .count();
    assert_eq!(combos, 4, "expected 4 grid combos:\n{stdout}");
    assert!(
        stdout.contains("selected k="),
        "grid search should report its selection:\n{stdout}"
    );
    assert!(dir.path().join("profiles.json").exists());
}

#[test]
fn evaluate_reports_exactly_the_requested_methods() {
    let dir = TempDir::new().unwrap();
    small_synth(dir.path(), &[]);
    run_ok(&["prepare", "--dir", dir.path().to_str().unwrap()]);
    small_train(dir.path(), &[]);
    run_ok(&[
        "evaluate",
        "--dir",
        dir.path().to_str().unwrap(),
        "--methods",
        "se,ci",
    ]);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let methods: Vec<&String> = report.as_object().unwrap().keys().collect();
    assert_eq!(methods, ["CI", "SE"]);
    assert!(dir.path().join("rankings_se.jsonl").exists());
    assert!(dir.path().join("rankings_ci.jsonl").exists());
    assert!(!dir.path().join("per_query.json").exists());

    // Unknown method names are rejected.
    let bad = run(&[
        "evaluate",
        "--dir",
        dir.path().to_str().unwrap(),
        "--methods",
        "pagerank",
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("pagerank"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    let config_path = dir.path().join("pipeline.toml");
    std::fs::write(
        &config_path,
        "[synth]\nn_users = 6\nn_topics_true = 3\nvocab_size = 300\nn_docs = 300\n\
         n_sessions_per_user = 3\nentries_per_session = 3\nseed = 7\n",
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    run_ok(&[
        "--config",
        config_path.to_str().unwrap(),
        "--threads",
        "1",
        "synth",
        "--dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    let resolved = std::fs::read_to_string(out_dir.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("n_users = 6"), "{resolved}");
    assert!(resolved.contains("seed = 9"), "flag must beat file: {resolved}");

    // Unknown config keys are rejected with the key named.
    std::fs::write(&config_path, "[synth]\nn_userz = 6\n").unwrap();
    let bad = run(&[
        "--config",
        config_path.to_str().unwrap(),
        "synth",
        "--dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("n_userz"));
}

#[test]
fn evaluate_emits_per_query_arrays_when_asked() {
    let dir = TempDir::new().unwrap();
    small_synth(dir.path(), &[]);
    run_ok(&["prepare", "--dir", dir.path().to_str().unwrap()]);
    small_train(dir.path(), &[]);
    run_ok(&[
        "evaluate",
        "--dir",
        dir.path().to_str().unwrap(),
        "--methods",
        "se,ours",
        "--per-query",
    ]);
    let per_query: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("per_query.json")).unwrap())
            .unwrap();
    let arrays = per_query.as_object().unwrap();
    assert!(arrays.contains_key("SE") && arrays.contains_key("Ours"));
    assert!(!arrays["SE"].as_array().unwrap().is_empty());
}
