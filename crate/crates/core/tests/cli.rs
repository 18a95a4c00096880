use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let fixtures = dir.join("data");
    let out = bench(&[
        "fixtures",
        "--out",
        fixtures.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = format!(
        r#"
seed = 1
repeats = 2

[[datasets]]
id = "sleep_study"
path = "data/sleep_study.csv"

[[datasets]]
id = "sleep_deprivation"
path = "data/sleep_deprivation.csv"

[[datasets]]
id = "sleep_cycle"
path = "data/sleep_cycle.csv"

[[classifiers]]
id = "lr"

[[classifiers]]
id = "knn10"

[[classifiers]]
id = "conv1d_2"
cnn = {{ epochs = 10 }}
{extra}"#
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn fixtures_writes_three_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(&[
        "fixtures",
        "--out",
        dir.path().to_str().unwrap(),
        "--noise",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["sleep_study", "sleep_deprivation", "sleep_cycle"] {
        let text = fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        assert!(text.lines().count() > 10, "{name}");
    }
}

#[test]
fn run_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = bench(&["run", "--config", &config]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("bench-out");
    for name in [
        "table1.md",
        "table2.csv",
        "table2.json",
        "cells.json",
        "cells/sleep_cycle__knn10.json",
    ] {
        assert!(res.join(name).is_file(), "{name}");
    }
    assert!(res.join("loss/sleep_study__conv1d_2__r1.csv").is_file());
    let t2 = fs::read_to_string(res.join("table2.md")).unwrap();
    assert!(t2.contains("| kNN (k=10) |") && t2.contains("**"));

    let cells = res.join("cells.json");
    for (format, marker) in [
        ("markdown", "| Metric |"),
        ("csv", "metric,"),
        ("json", "\"cells\""),
    ] {
        let out = bench(&[
            "report",
            "--cells",
            cells.to_str().unwrap(),
            "--format",
            format,
        ]);
        assert_eq!(out.status.code(), Some(0), "{format}");
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(
            stdout.to_lowercase().contains(&marker.to_lowercase()),
            "{format}: {stdout}"
        );
    }
}

#[test]
fn partial_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "\n[[classifiers]]\nid = \"dt\"\nname = \"dt_broken\"\ntrain = { max_depth = 0 }\n",
    );
    let out = bench(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt_broken"));
    // the healthy cells and both tables are still written
    let res = dir.path().join("bench-out");
    assert!(res.join("table1.md").is_file() && res.join("cells/sleep_study__lr.json").is_file());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    for text in [
        "datasets = []\nclassifiers = [{ id = \"lr\" }]\n",
        "repeats = 0\ndatasets = [{ id = \"sleep_cycle\" }]\nclassifiers = [{ id = \"lr\" }]\n",
        "datasets = [{ id = \"sleep_cycle\" }]\nclassifiers = [{ id = \"perceptron\" }]\n",
        "datasets = [{ id = \"sleep_cycle\" }]\nclassifiers = [{ id = \"lr\" }]\nbogus = 1\n",
        "not toml at all [",
    ] {
        fs::write(&bad, text).unwrap();
        let out = bench(&["run", "--config", bad.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{text}");
    }
    assert_eq!(
        bench(&["run", "--config", "/nonexistent.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        bench(&["report", "--cells", "x.json", "--format", "pdf"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bench(&["frobnicate"]).status.code(), Some(1));
}
