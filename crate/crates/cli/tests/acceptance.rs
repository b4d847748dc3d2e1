//! Criterion 9: two full pipeline runs (synth -> prepare -> train ->
//! evaluate) with identical seeds produce byte-identical reports. Runs the
//! real binary end to end.

use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicrank"))
}

fn run_ok(args: &[&str]) {
    let output = binary().args(args).output().expect("spawn topicrank");
    assert!(
        output.status.success(),
        "`topicrank {}` failed:\n{}\n{}",
        args.join(" "),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
}

fn full_pipeline(dir: &Path) {
    let dir = dir.to_str().unwrap();
    run_ok(&[
        "synth",
        "--dir",
        dir,
        "--seed",
        "11",
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
    ]);
    run_ok(&["prepare", "--dir", dir, "--split-seed", "11"]);
    run_ok(&[
        "train",
        "--dir",
        dir,
        "--k",
        "3",
        "--lda-iterations",
        "80",
        "--infer-iterations",
        "40",
        "--infer-burn-in",
        "20",
        "--epochs-per-phase",
        "15",
        "--eta",
        "0.02",
        "--seed",
        "5",
    ]);
    run_ok(&[
        "evaluate",
        "--dir",
        dir,
        "--methods",
        "se,ci,ours",
        "--per-query",
    ]);
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn criterion_09_end_to_end_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_pipeline(a.path());
    full_pipeline(b.path());

    for name in [
        "corpus.jsonl",
        "log.jsonl",
        "ground_truth.json",
        "stats.txt",
        "train.jsonl",
        "validation.jsonl",
        "test.jsonl",
        "model.json",
        "embeddings.json",
        "profiles.json",
        "report.txt",
        "report.json",
        "per_query.json",
    ] {
        assert_eq!(
            read(a.path(), name),
            read(b.path(), name),
            "{name} differs between identically seeded runs"
        );
    }
    let report = String::from_utf8(read(a.path(), "report.txt")).unwrap();
    println!("PASS criterion 9: byte-identical pipeline outputs\n{report}");
}
