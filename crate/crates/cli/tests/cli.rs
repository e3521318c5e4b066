use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqreuse")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn gen_crt0() {
    let out = run(&["gen", "crt0", "--p", "3", "--q", "5", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["sequences"].as_array().map(Vec::len), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 sequences, period 15"));
}

#[test]
fn gen_tdma_and_rs_cpc() {
    let out = run(&["gen", "tdma", "--G", "4", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("4 sequences, period 4"));

    let out = run(&["gen", "rs-cpc", "--n", "5", "--p", "11", "--k", "3", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("11 sequences, period 55"));
}

#[test]
fn gen_rejects_missing_flags() {
    assert_eq!(code(&run(&["gen", "crt0", "--p", "3", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["gen", "crt0", "--p", "4", "--q", "6", "--seed", "1"])), 2);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["verify", "ui", "--p", "3", "--q", "5", "--seed", "1"])), 0);
    assert_eq!(code(&run(&["verify", "window", "--p", "3", "--seed", "1"])), 0);

    let dup = dir.path().join("dup.txt");
    fs::write(&dup, "11000\n11000\n").unwrap();
    let out = run(&["verify", "xcorr", "--input", dup.to_str().unwrap(), "--bound", "1", "--seed", "1"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["verdict"], "violated");
}

#[test]
fn verify_reports_oversized_state_space() {
    let out = run(&["verify", "ui", "--p", "7", "--q", "13", "--cap", "1000", "--seed", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("random"));
    let out = run(&["verify", "ui", "--p", "7", "--q", "13", "random", "--samples", "200", "--seed", "1"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn alloc_cluster_and_cells() {
    let r = 3f64.sqrt().to_string();
    let out = run(&["alloc", "--R", &r, "--h", "1", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["G"], 4);
    assert_eq!((v["b1"].as_u64(), v["b2"].as_u64()), (Some(2), Some(0)));

    let index = |cell: &str| json(&run(&["alloc", "--R", &r, "--h", "1", "--cell", cell, "--seed", "1"]))["index"].clone();
    assert_eq!(index("2,0"), index("0,0"));
    assert_ne!(index("1,0"), index("0,0"));
    assert_eq!(index("-2,0"), index("0,0"));
}

#[test]
fn params_and_compare() {
    let v = json(&run(&["params", "prop2", "--M", "3", "--G", "7", "--seed", "1"]));
    assert_eq!((v["n"].as_u64(), v["p"].as_u64(), v["k"].as_u64(), v["L"].as_u64()), (Some(6), Some(7), Some(3), Some(84)));
    let v = json(&run(&["params", "prop1", "--M", "3", "--G", "7", "--seed", "1"]));
    assert_eq!(v["L"], 42);

    let out = run(&["compare", "--M", "3", "--G", "7", "--format", "csv", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("tdma,7,")));
    assert!(text.lines().any(|l| l.starts_with("prop2,84,")));
}

fn sim_config(dir: &Path, shared: bool) -> String {
    let second = if shared { 0 } else { 1 };
    let offsets = if shared { r#", "offset_s": 0"# } else { "" };
    let cfg = format!(
        r#"{{"tau_s": 1e-3, "F": 4, "delta_c_slots": 1, "R_m": 500, "h_m": 100, "M": 3,
            "users": [{{"id": 1, "x": 0, "y": 0, "sequence": 0{offsets}}},
                      {{"id": 2, "x": 100, "y": 0, "sequence": {second}{offsets}}}],
            "sequences": {{"construction": "crt0", "p": 3, "q": 5, "pad": "auto"}},
            "plan": "none"}}"#
    );
    let path = dir.join(if shared { "shared.json" } else { "padded.json" });
    fs::write(&path, cfg).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn sim_outcomes_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run.json");
    let out = run(&["sim", "--config", &sim_config(dir.path(), false), "--seed", "3", "--out", prefix.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&prefix).unwrap()).unwrap();
    assert_eq!(report["block_free"]["verdict"], "holds");
    assert_eq!(report["frame_offset_ok"], true);
    assert_eq!(report["manifest"], "run.manifest.json");
    assert_eq!(report["log"], "run.log.csv");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["seed_generated"], false);
    assert!(fs::read_to_string(dir.path().join("run.log.csv")).unwrap().starts_with("tx,rx,"));

    let out = run(&["sim", "--config", &sim_config(dir.path(), true), "--seed", "3"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn generated_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set.json");
    let out = run(&["gen", "crt0", "--p", "3", "--q", "5", "--out", set.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let printed: u64 = stderr.lines().find_map(|l| l.strip_prefix("seed: ")).unwrap().parse().unwrap();
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("set.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], printed);
    assert_eq!(manifest["seed_generated"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sim_config(dir.path(), false);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let sub = dir.path().join(name);
        fs::create_dir(&sub).unwrap();
        let prefix = sub.join("run.json");
        let out = run(&["sim", "--config", &cfg, "--seed", "11", "--out", prefix.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        reports.push((fs::read(&prefix).unwrap(), fs::read(sub.join("run.log.csv")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}
