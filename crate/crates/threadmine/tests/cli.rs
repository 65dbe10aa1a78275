//! Smoke tests driving the command-line binary end to end: every
//! subcommand runs against the bundled fixtures and produces the promised
//! files or stdout shapes.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use threadmine::corpus::parse_corpus;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_threadmine"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn succeed(output: Output) -> String {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("stdout is text")
}

#[test]
fn stats_prints_machine_counts() {
    let stdout = succeed(
        bin().arg("stats").arg("--corpus").arg(fixture("mini_corpus.txt")).output().unwrap(),
    );
    assert!(stdout.contains("corpus.threads = 10"), "{stdout}");
    assert!(stdout.contains("corpus.posts = 30"), "{stdout}");
    assert!(stdout.contains("corpus.candidates.intra = "), "{stdout}");
}

#[test]
fn split_partitions_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    let test = dir.path().join("test.txt");
    let split = |train: &PathBuf, test: &PathBuf| {
        succeed(
            bin()
                .arg("split")
                .arg("--corpus")
                .arg(fixture("mini_corpus.txt"))
                .args(["--test-fraction", "0.2", "--seed", "3"])
                .arg("--train-out")
                .arg(train)
                .arg("--test-out")
                .arg(test)
                .output()
                .unwrap(),
        )
    };
    split(&train, &test);

    let train_threads = parse_corpus(&fs::read_to_string(&train).unwrap()).unwrap();
    let test_threads = parse_corpus(&fs::read_to_string(&test).unwrap()).unwrap();
    assert_eq!(train_threads.len(), 8);
    assert_eq!(test_threads.len(), 2);
    let mut ids: Vec<&str> = train_threads.iter().chain(&test_threads).map(|t| t.id.as_str()).collect();
    ids.sort_unstable();
    let expected: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
    assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());

    let train2 = dir.path().join("train2.txt");
    let test2 = dir.path().join("test2.txt");
    split(&train2, &test2);
    assert_eq!(fs::read(&train).unwrap(), fs::read(&train2).unwrap());
    assert_eq!(fs::read(&test).unwrap(), fs::read(&test2).unwrap());
}

#[test]
fn sweep_window_prints_rows() {
    let stdout = succeed(
        bin()
            .arg("sweep-window")
            .arg("--corpus")
            .arg(fixture("mini_corpus.txt"))
            .args(["--max-distance", "3"])
            .output()
            .unwrap(),
    );
    assert!(stdout.contains("sweep.[0,+1]."), "{stdout}");
    assert!(stdout.contains("sweep.[0,+3]."), "{stdout}");
    assert!(!stdout.contains("sweep.[0,+4]."), "{stdout}");
}

#[test]
fn build_distant_reproduces_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qr.ndjson");
    succeed(
        bin()
            .arg("build-distant")
            .args(["--kind", "qr"])
            .arg("--in")
            .arg(fixture("dump25.ndjson"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap(),
    );
    assert_eq!(fs::read(&out).unwrap(), fs::read(fixture("qr25.golden.ndjson")).unwrap());
    let sidecar = dir.path().join("qr.ndjson.report");
    assert_eq!(
        fs::read_to_string(&sidecar).unwrap(),
        fs::read_to_string(fixture("qr25.golden.ndjson.report")).unwrap()
    );
}

#[test]
fn predict_emits_reports_that_validate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(&config, "# within-post run\ntask = intra\nscorer = internal-linear\nwindow = 0,+5\n").unwrap();
    let report = dir.path().join("report.txt");
    let human = dir.path().join("summary.txt");
    succeed(
        bin()
            .arg("predict")
            .arg("--corpus")
            .arg(fixture("mini_corpus.txt"))
            .arg("--config")
            .arg(&config)
            .args(["--set", "seed=1", "--set", "component-source=predicted"])
            .arg("--out")
            .arg(&report)
            .arg("--human-out")
            .arg(&human)
            .output()
            .unwrap(),
    );
    let machine = fs::read_to_string(&report).unwrap();
    assert!(machine.contains("config.task = intra"), "{machine}");
    assert!(machine.contains("config.seed = 1"), "--set must override the file");
    assert!(machine.contains("pairs.removed.window = "), "{machine}");
    assert!(fs::read_to_string(&human).unwrap().contains("wall clock:"));

    let stdout = succeed(bin().arg("evaluate").arg("--report").arg(&report).output().unwrap());
    assert!(stdout.contains("report ok"), "{stdout}");
}

#[test]
fn evaluate_prints_the_all_relations_row() {
    let stdout = succeed(
        bin()
            .arg("evaluate")
            .arg("--corpus")
            .arg(fixture("mini_corpus.txt"))
            .args(["--task", "inter"])
            .output()
            .unwrap(),
    );
    assert!(stdout.contains("all-relations.inter.recall = 100"), "{stdout}");
    assert!(stdout.contains("all-relations.inter.f1 = "), "{stdout}");
}

#[test]
fn trained_artifacts_feed_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let components = dir.path().join("components.json");
    let stdout = succeed(
        bin()
            .arg("train-components")
            .arg("--corpus")
            .arg(fixture("mini_corpus.txt"))
            .arg("--out")
            .arg(&components)
            .args(["--seed", "0"])
            .output()
            .unwrap(),
    );
    assert!(stdout.contains("component classifier over "), "{stdout}");

    let report = dir.path().join("report.txt");
    succeed(
        bin()
            .arg("predict")
            .arg("--corpus")
            .arg(fixture("mini_corpus.txt"))
            .args(["--set", "task=components", "--set", "component-source=predicted"])
            .arg("--components")
            .arg(&components)
            .arg("--out")
            .arg(&report)
            .output()
            .unwrap(),
    );
    assert!(fs::read_to_string(&report).unwrap().contains("components.accuracy = "));
}
