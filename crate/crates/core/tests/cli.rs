use std::fs;
use std::path::Path;
use std::process::Command;

fn qite(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qite"))
        .args(args)
        .output()
        .unwrap()
}

fn run_k4(dir: &Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec![
        "run",
        "--graph",
        "k4",
        "--method",
        "nla",
        "--domain-size",
        "2",
        "--dtau",
        "0.1",
        "--steps",
        "30",
        "--out",
    ];
    let d = dir.to_str().unwrap();
    args.push(d);
    args.extend_from_slice(extra);
    qite(&args)
}

#[test]
fn run_is_bit_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_k4(a.path(), &[]).status.success());
    assert!(run_k4(b.path(), &[]).status.success());
    for f in ["trajectory.csv", "spectrum.csv", "summary.json"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let traj = fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("tau,energy,r"));
    assert_eq!(traj.lines().count(), 32);
    let spec = fs::read_to_string(a.path().join("spectrum.csv")).unwrap();
    assert_eq!(spec.lines().next(), Some("tau,E_level,n"));
}

#[test]
fn early_stop_still_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = qite(&[
        "run",
        "--graph",
        "k4",
        "--method",
        "nla",
        "--domain-size",
        "2",
        "--dtau",
        "0.1",
        "--steps",
        "2000",
        "--early-stop",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["stopped_early"], true);
    assert!(summary["steps_run"].as_u64().unwrap() < 2000);
    assert!((summary["final_energy"].as_f64().unwrap() + 4.0).abs() < 1e-6);
}

#[test]
fn config_file_with_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k4.json");
    let out_dir = dir.path().join("out");
    fs::write(
        &cfg,
        serde_json::json!({
            "graph": "k4", "method": "nla", "D": 2, "dtau": 0.5, "steps": 10,
            "compress": true, "noise": true, "output_dir": out_dir,
        })
        .to_string(),
    )
    .unwrap();
    let out = qite(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let noise = &summary["noise"];
    assert!(noise["energy_ideal"].as_f64().unwrap() < -3.7);
    assert!(noise["energy_noisy"].as_f64().is_some());
    assert!(!summary["blocks"].as_array().unwrap().is_empty());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = qite(&[
        "run",
        "--graph",
        "petersen",
        "--method",
        "la",
        "--domain-size",
        "4",
        "--steps",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "invalid_domain");

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"grpah": "k4"}"#).unwrap();
    assert_eq!(
        qite(&["run", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(qite(&["depth", "--sizes", ""]).status.code(), Some(2));
}

#[test]
fn spectrum_and_depth_print() {
    let out = qite(&["spectrum", "--graph", "petersen"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ground_energy"], -12.0);
    assert_eq!(report["cut_value"], 12.0);

    let out = qite(&[
        "depth",
        "--family",
        "petersen",
        "--methods",
        "la,nla",
        "--domain-sizes",
        "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n_bit,method,D,gate_count,depth,table1_bound")
    );
    assert_eq!(lines.count(), 2);
}
