use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn reclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reclab")).args(args).output().unwrap()
}

fn strip_timestamp(json: &str) -> String {
    json.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let out = reclab(&[
            "simulate", "--seed", "5", "--trials", "6", "--horizon", "1000,4000", "--workers", workers, "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["results.csv", "plot.dat", "summary.json"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let (ja, jb) = (read(&a, "results.json"), read(&b, "results.json"));
    // worker count and output dir are echoed in the config, so compare everything else
    let echo = |s: &str| {
        strip_timestamp(s)
            .lines()
            .filter(|l| !l.contains("\"workers\"") && !l.contains("\"dir\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(echo(&ja), echo(&jb));
    let csv = read(&a, "results.csv");
    assert!(csv.starts_with("trial,n,hits,normalizer,ratio\n"));
}

#[test]
fn config_round_trips_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let out = reclab(&["bounds", "--seed", "9", "--print-config"]);
    assert!(out.status.success());
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, &out.stdout).unwrap();
    let again = reclab(&["bounds", "--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn validation_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"experiment": "simulate", "map": {"kind": "gauss"}, "horizons": [], "trials": 0}"#).unwrap();
    let out = reclab(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("horizons") && err.contains("trials"), "{err}");

    let out = reclab(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = reclab(&["entropy", "--format", "xml", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("np.json");
    // a reducible chain has no unique stationary vector
    fs::write(
        &cfg,
        r#"{"experiment": "classify",
            "map": {"kind": "markov_linear", "matrix": [["1", "0"], ["0", "1"]]},
            "target": {"kind": "periodic", "word": [0]},
            "schedule": {"kind": "depth_const", "t": 1}}"#,
    )
    .unwrap();
    let out = reclab(&["classify", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_rewrites_from_results() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let out = reclab(&["gridprobe", "--out", run.to_str().unwrap()]);
    assert!(out.status.success());
    let again = tmp.path().join("again");
    let out = reclab(&["report", run.join("results.json").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.json", "results.csv", "table.txt", "plot.dat"] {
        assert_eq!(read(&run, f), read(&again, f), "{f}");
    }
}

#[test]
fn entropy_example_is_close() {
    let tmp = tempfile::tempdir().unwrap();
    let out = reclab(&["entropy", "--seed", "7", "--out", tmp.path().to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&read(tmp.path(), "summary.json")).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.373138).abs() < 0.05);
}
