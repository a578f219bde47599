use std::fs;
use std::path::Path;
use std::process::Command;

use packet_collapse::config::{parse_config, parse_config_with, Overrides, ScenarioKind};
use packet_collapse::scenario::{builtin_configs, resolve_output_root, run, RunStatus, MANIFEST_FILE};
use packet_collapse::Error;

const BIN: &str = env!("CARGO_BIN_EXE_packet-collapse");

fn builtin(name: &str) -> &'static str {
    builtin_configs().into_iter().find(|(n, _)| *n == name).unwrap().1
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != MANIFEST_FILE)
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn every_builtin_scenario_passes() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in builtin_configs() {
        let cfg = parse_config(text).unwrap();
        let out = run(&cfg, tmp.path()).unwrap();
        assert!(out.passed(), "{name}: {:?}", out.manifest);
    }
}

#[test]
fn reruns_are_byte_identical() {
    for name in ["collapse_sample", "measurement_run", "free_spread"] {
        let cfg = parse_config(builtin(name)).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run(&cfg, a.path()).unwrap();
        let rb = run(&cfg, b.path()).unwrap();
        assert_eq!(ra.run_dir.file_name(), rb.run_dir.file_name());
        let (fa, fb) = (artifacts(&ra.run_dir), artifacts(&rb.run_dir));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{name}");
        assert_eq!(ra.manifest.assertions, rb.manifest.assertions);
    }
}

#[test]
fn different_seeds_get_different_directories() {
    let a = parse_config_with(builtin("collapse_sample"), Overrides { seed: Some(1), n_runs: None }).unwrap();
    let b = parse_config_with(builtin("collapse_sample"), Overrides { seed: Some(2), n_runs: None }).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let (ra, rb) = (run(&a, tmp.path()).unwrap(), run(&b, tmp.path()).unwrap());
    assert_ne!(ra.run_dir, rb.run_dir);
    assert_eq!(ra.manifest.config_hash, rb.manifest.config_hash);
}

#[test]
fn manifest_lists_every_artifact() {
    let cfg = parse_config(builtin("measurement_run")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&cfg, tmp.path()).unwrap();
    let text = fs::read_to_string(out.run_dir.join(MANIFEST_FILE)).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["scenario", "config_hash", "seed", "generator", "config", "artifacts", "wall_time_s", "assertions", "status"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    let mut listed: Vec<String> =
        m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    listed.sort();
    let mut on_disk: Vec<String> =
        fs::read_dir(&out.run_dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);

    let csv = fs::read_to_string(out.run_dir.join("timeseries.csv")).unwrap();
    assert!(csv.starts_with(
        "t,norm,exp_x,std_x,exp_p,std_p,uncertainty_product,min_separation,critical_value,transition_flag\n"
    ));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.run_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["t_star"].as_f64().is_some());
    assert_eq!(summary["object_dim"], 2);
}

#[test]
fn runtime_failure_still_writes_manifest() {
    // packets overlap: branches are not weakly interfering
    let text = "scenario = \"collapse_sample\"\nseed = 1\n[packet]\nseparation = 2.0\n";
    let cfg = parse_config(text).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&cfg, tmp.path()).unwrap();
    assert_eq!(out.manifest.status, RunStatus::Error);
    assert!(out.manifest.error.is_some());
    assert!(out.run_dir.join(MANIFEST_FILE).exists());
}

#[test]
fn config_errors() {
    assert!(matches!(parse_config("scenario = \"cat_gate\"\ncoefficients = [0.6, 0.8001]\n"), Err(Error::Validation(_))));
    assert!(matches!(parse_config("scenario = \"free_spread\"\n[physics]\nhbar2 = 1.0\n"), Err(Error::Parse(_))));
    assert!(matches!(parse_config("scenario = \"teleport\"\n"), Err(Error::Parse(_))));
    assert!(matches!(parse_config("scenario = \"free_spread\"\n[grid]\nn_points = 1000\n"), Err(Error::Validation(_))));
    let cfg = parse_config("scenario = \"born_ensemble\"\nseed = 0\n").unwrap();
    assert_eq!(cfg.scenario, ScenarioKind::BornEnsemble);
    assert_eq!(cfg.n_runs(), Some(100_000));
}

#[test]
fn output_root_precedence_without_env() {
    let mut cfg = parse_config("scenario = \"free_spread\"\noutput_dir = \"from_config\"\n").unwrap();
    assert_eq!(resolve_output_root(Some(Path::new("cli")), &cfg), Path::new("cli"));
    if std::env::var_os("PACKET_COLLAPSE_OUT").is_none() {
        assert_eq!(resolve_output_root(None, &cfg), Path::new("from_config"));
        cfg.output_dir = None;
        assert_eq!(resolve_output_root(None, &cfg), Path::new("runs"));
    }
}

#[test]
fn cli_exit_codes_and_env_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.toml");
    fs::write(&good, builtin("collapse_sample")).unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "scenario = \"cat_gate\"\ncoefficients = [0.6, 0.8001]\n").unwrap();
    let env_root = tmp.path().join("env_root");

    let status = Command::new(BIN)
        .args(["simulate", good.to_str().unwrap(), "--seed", "9"])
        .env("PACKET_COLLAPSE_OUT", &env_root)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let dirs: Vec<_> = fs::read_dir(&env_root).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].to_string_lossy().ends_with("-seed9"));

    let status = Command::new(BIN).args(["simulate", bad.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let failing = tmp.path().join("failing.toml");
    fs::write(&failing, "scenario = \"collapse_sample\"\nseed = 1\n[packet]\nseparation = 2.0\n").unwrap();
    let status = Command::new(BIN)
        .args(["simulate", failing.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let output = Command::new(BIN)
        .args(["sample", good.to_str().unwrap(), "--n-runs", "500", "--out", tmp.path().join("s").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stdout));
}
