use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_strack-sim");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sim(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("STRACK_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn run_writes_every_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("minimal.toml");
    let o = sim(&["run", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("o");
    for f in [
        "fct.csv",
        "cct.csv",
        "qdelay.csv",
        "tput.csv",
        "events.csv",
        "summary.csv",
        "run.csv",
        "config.toml",
        "trace.txt",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let fct = csv_rows(&out.join("fct.csv"));
    assert_eq!(fct.len(), 2);
    assert!(fct.iter().all(|r| &r[0] == "1"));
    // Header survives an empty table.
    let q = fs::read_to_string(out.join("qdelay.csv")).unwrap();
    assert!(q.starts_with("schema_version,"));
}

#[test]
fn effective_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("trace_example.toml");
    assert!(sim(&["run", cfg.to_str().unwrap(), "--out", "a"], tmp.path())
        .status
        .success());
    let o = sim(&["run", "a/config.toml", "--out", "b"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for e in fs::read_dir(tmp.path().join("a")).unwrap() {
        let name = e.unwrap().file_name();
        let a = fs::read(tmp.path().join("a").join(&name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn bad_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("minimal.toml")).unwrap();
    fs::write(
        tmp.path().join("bad.toml"),
        text.replace("spines = 1", "spines = 1\noversub = 3"),
    )
    .unwrap();
    let o = sim(&["run", "bad.toml"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("topology.oversub"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());

    fs::write(
        tmp.path().join("typo.toml"),
        text.replace("[topology]", "[topology]\nhostz = 4"),
    )
    .unwrap();
    let o = sim(&["validate", "typo.toml"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("hostz"), "{}", stderr(&o));
}

#[test]
fn sweep_keeps_good_points_and_reports_bad_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("minimal.toml");
    let o = sim(
        &[
            "sweep",
            cfg.to_str().unwrap(),
            "--axis",
            "transport=strack,rocev2,bogus",
            "--axis",
            "workload.size=4KB,64KB",
            "--out",
            "sw",
            "--jobs",
            "3",
        ],
        tmp.path(),
    );
    assert!(!o.status.success());
    let root = tmp.path().join("sw");
    let rows = csv_rows(&root.join("sweep.csv"));
    assert_eq!(rows.len(), 6);
    let status: Vec<&str> = rows.iter().map(|r| &r[2]).collect();
    assert_eq!(status, ["ok", "ok", "ok", "ok", "failed", "failed"]);
    assert!(rows[4][3].contains("transport"));
    assert!(root.join("transport=rocev2,workload.size=64KB/fct.csv").is_file());
    // Two sizes, one bucket each, for the four good points.
    assert_eq!(csv_rows(&root.join("sweep_summary.csv")).len(), 4);
}

#[test]
fn out_dir_env_roots_default_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("minimal.toml");
    let o = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("STRACK_OUT_DIR", tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("root/out/minimal/fct.csv").is_file());
}

#[test]
fn summarize_matches_run_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("trace_example.toml");
    assert!(sim(&["run", cfg.to_str().unwrap(), "--out", "a"], tmp.path())
        .status
        .success());
    let o = sim(
        &["summarize", "a/fct.csv", "--transport", "rocev2", "--out", "s"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(tmp.path().join("a/summary.csv")).unwrap(),
        fs::read(tmp.path().join("s/summary.csv")).unwrap()
    );
}
