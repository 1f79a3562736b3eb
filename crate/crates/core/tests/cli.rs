use std::path::Path;
use std::process::{Command, Output};

fn lcesim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcesim"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn preset_list_names_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = lcesim(&["preset", "list"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    for c in 1..=10 {
        assert!(text.contains(&format!("criterion {c:>2}")), "{text}");
    }
}

#[test]
fn corrupt_checkpoint_fails_with_header_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.ck"), b"LCESIMXX garbage").unwrap();
    let out = lcesim(&["resume", "bad.ck"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad checkpoint header"));
    assert_eq!(stdout_json(&out)["status"], "error");
}

#[test]
fn invalid_config_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[grid]\nn = 16\n\n[run]\ncfl = -1\n").unwrap();
    let out = lcesim(&["run", "c.toml"], dir.path());
    assert!(!out.status.success());
    let err = stdout_json(&out)["error"].as_str().unwrap().to_string();
    assert!(err.contains("run.cfl") && err.contains("line 5"), "{err}");
}

#[test]
fn run_writes_series_plots_and_checkpoints_that_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\ndim = 2\nn = 16\n\n[init]\namplitude = 1e-3\n\n[run]\nformulation = \"fd\"\ncfl = 0.1\nt_end = 0.3\noutput_every = 2\ncheckpoint_every = 4\ncheckpoint_dir = \"ck\"\ntol_c = 1.0\ntol_d = 1.0\n";
    std::fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let out = lcesim(&["run", "c.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["formulation"], "fd");
    assert!(summary["energy_drift"].as_f64().unwrap() < 1e-5);
    let series = std::fs::read_to_string(dir.path().join("res/series.csv")).unwrap();
    assert!(series.starts_with("t,E_basic"));
    assert_eq!(series.lines().count() as u64, summary["rows"].as_u64().unwrap() + 1);
    for group in ["energies", "constraints", "decay"] {
        assert!(dir.path().join(format!("res/series_{group}.svg")).exists());
    }

    let cks = summary["checkpoints"].as_array().unwrap();
    assert!(!cks.is_empty());
    let first = cks[0].as_str().unwrap();
    let resumed = lcesim(&["resume", first, "--out", "res2", "--plot", "none"], dir.path());
    assert!(resumed.status.success(), "{}", String::from_utf8_lossy(&resumed.stderr));
    let r = stdout_json(&resumed);
    assert_eq!(r["t"], summary["t"]);
    assert!(!dir.path().join("res2/series_energies.svg").exists());
}

#[test]
fn verify_prints_summary_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = lcesim(&["verify", "identities"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("criterion  7 identities"));
    let report = stdout_json(&out);
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 6);
    let unknown = lcesim(&["verify", "nope"], dir.path());
    assert!(!unknown.status.success());
}
