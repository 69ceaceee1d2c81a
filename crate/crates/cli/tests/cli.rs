use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dew_cli::{run_from_args, ScenarioConfig};
use tempfile::TempDir;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &str, config: Option<&Path>, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["dew".to_string(), cmd.to_string(), "--out".into(), out.display().to_string()];
    if let Some(c) = config {
        args.push("--config".into());
        args.push(c.display().to_string());
    }
    args.extend(extra.iter().map(|s| s.to_string()));
    run_from_args(args)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const SMALL: &str = r#"
seed = 99

[simulate]
k_values = [3]
rounds = 20000
repeats = 2

[[simulate.distributions]]
kind = "ring"
radius = 1.0
width = 0.3
momentum_std = 0.5

[[simulate.distributions]]
kind = "point_mass"
point = [1.0, 0.0, 1.0, 0.0]

[certify]
n_max = 2
theta = [0.0, 0.7853981633974483]
scores = [0.5]
truncation = [2]

[compare]
states = []

[witness]
parents = [2, 4]
radii = [0.0, 1.0]
probe_n_max = 20
"#;

#[test]
fn bundled_configs_parse() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        seen += 1;
    }
    assert!(seen >= 3);
    let desk = ScenarioConfig::load(&configs_dir().join("desk.toml")).unwrap();
    assert_eq!(desk, ScenarioConfig::default());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cases = [
        "sead = 3\n",
        "[bounds]\nkvalues = [3]\n",
        "[certify]\ntheta = { start = 0.0, stop = 1.0, count = 3, step = 0.1 }\n",
        "[[simulate.distributions]]\nkind = \"gaussian\"\nmean = [0.0, 0.0, 0.0, 0.0]\nstd = [1.0, 1.0, 1.0, 1.0]\ncolour = 1\n",
        "[simulate.oscillators]\nm1 = 1.0\nm2 = 1.0\nomega1 = 1.0\nomega2 = 1.0\ng = 0.1\nmass = 2.0\n",
        "[compare]\n[[compare.states]]\nkind = \"psi\"\nlabel = \"a\"\npsi = [0.6, 0.8]\nsupport = \"direct\"\nextra = true\n",
        "[plotting]\nenabled = true\n",
    ];
    for text in cases {
        let path = write_config(&dir, text);
        assert!(ScenarioConfig::load(&path).is_err(), "accepted: {text}");
        assert_eq!(run("bounds", Some(&path), &dir.path().join("out"), &[]), 2, "{text}");
    }
}

#[test]
fn invalid_values_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run("bounds", None, &out, &["--tol", "-1"]), 2);
    assert_eq!(run("bounds", None, &out, &["--threads", "0"]), 2);
    assert_eq!(run("bounds", Some(&dir.path().join("missing.toml")), &out, &[]), 2);
    let cases = [
        ("bounds", "[bounds]\nk_values = [0]\n"),
        ("simulate", "[simulate.oscillators]\nm1 = 1.0\nm2 = 1.0\nomega1 = 1.0\nomega2 = 1.0\ng = 5.0\n"),
        ("compare", "[compare]\n[[compare.states]]\nkind = \"psi\"\nlabel = \"bad\"\npsi = [0.6, 0.6]\nsupport = \"direct\"\n"),
        ("witness", "[witness]\nk = 4\n"),
        ("certify", "[certify]\ntheta = []\n"),
    ];
    for (cmd, text) in cases {
        let path = write_config(&dir, text);
        assert_eq!(run(cmd, Some(&path), &out, &[]), 2, "{cmd}: {text}");
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    assert_eq!(run("bounds", None, &blocker.join("out"), &[]), 1);
}

#[test]
fn every_command_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    for cmd in ["bounds", "simulate", "certify", "compare", "witness"] {
        let (a, b) = (dir.path().join(format!("{cmd}-a")), dir.path().join(format!("{cmd}-b")));
        assert_eq!(run(cmd, Some(&cfg), &a, &[]), 0, "{cmd}");
        assert_eq!(run(cmd, Some(&cfg), &b, &["--threads", "1"]), 0, "{cmd}");
        let (fa, fb) = (read_dir_bytes(&a), read_dir_bytes(&b));
        assert!(fa.len() >= 2, "{cmd}: {:?}", fa.iter().map(|f| &f.0).collect::<Vec<_>>());
        assert_eq!(fa, fb, "{cmd} outputs differ");
    }
}

#[test]
fn manifest_records_the_resolved_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    let out = dir.path().join("out");
    assert_eq!(run("simulate", Some(&cfg), &out, &["--seed", "5", "--tol", "1e-6"]), 0);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["tol"], 1e-6);
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["config"]["simulate"]["rounds"], 20000);
    assert_eq!(manifest["outputs"][0], "records.jsonl");

    // The embedded config reproduces the run on its own.
    let embedded: ScenarioConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    let replay = dir.path().join("replay.toml");
    fs::write(&replay, toml::to_string(&embedded).unwrap()).unwrap();
    let out2 = dir.path().join("out2");
    assert_eq!(run("simulate", Some(&replay), &out2, &[]), 0);
    assert_eq!(fs::read(out.join("records.jsonl")).unwrap(), fs::read(out2.join("records.jsonl")).unwrap());

    let out3 = dir.path().join("out3");
    assert_eq!(run("simulate", Some(&cfg), &out3, &["--seed", "6"]), 0);
    assert_ne!(fs::read(out.join("records.jsonl")).unwrap(), fs::read(out3.join("records.jsonl")).unwrap());
}

#[test]
fn point_mass_tallies_are_deterministic_per_slot() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    let out = dir.path().join("out");
    assert_eq!(run("simulate", Some(&cfg), &out, &[]), 0);
    let text = fs::read_to_string(out.join("records.jsonl")).unwrap();
    let mut checked = 0;
    for line in text.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        if !rec["descriptor"].as_str().unwrap().starts_with("point_mass") {
            continue;
        }
        let mut positive_slots = 0;
        for slot in rec["counts"].as_array().unwrap() {
            let (p, n) = (slot["positive"].as_u64().unwrap(), slot["negative"].as_u64().unwrap());
            assert!(p == 0 || n == 0, "{slot}");
            positive_slots += (p > 0) as usize;
        }
        // The three-angle evaluation of (1, 0, 1, 0) at theta = pi/4 is positive in one slot.
        assert_eq!(positive_slots, 1);
        assert!(rec["p_value"].as_f64().unwrap() < 0.5);
        checked += 1;
    }
    assert_eq!(checked, 2);
}

#[test]
fn certify_reports_per_cell_status() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[certify]\nn_max = 3\ntheta = [0.7853981633974483]\nscores = [0.5, 0.9]\ntruncation = []\n");
    let out = dir.path().join("out");
    assert_eq!(run("certify", Some(&cfg), &out, &[]), 0);
    let mut reader = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let status = reader.headers().unwrap().iter().position(|h| h == "status").unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][status], "optimal");
    assert_eq!(&rows[1][status], "infeasible_target");
    assert!(!out.join("truncation.csv").exists());
    assert!(!out.join("timings.csv").exists());
}

#[test]
fn binary_reports_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let ok = Command::new(env!("CARGO_BIN_EXE_dew")).args(["bounds", "--out"]).arg(&out).status().unwrap();
    assert_eq!(ok.code(), Some(0));
    let csv = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("3,2,3,")), "{csv}");
    let bad = Command::new(env!("CARGO_BIN_EXE_dew")).args(["bounds", "--tol", "0"]).arg("--out").arg(&out).status().unwrap();
    assert_eq!(bad.code(), Some(2));
}
