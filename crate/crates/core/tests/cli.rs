use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gedanken::cli::{export_density, import_density};
use gedanken::lattice::Rep;
use gedanken::measurement::joint_density;
use gedanken::states::{build_epr_state, PreparationParams};
use sha2::{Digest, Sha256};

const SCENARIOS: [&str; 6] = [
    "epr_ideal",
    "bohr_corrected",
    "bohr_flawed",
    "disturbance",
    "counterfactual",
    "doppler",
];

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn default_config() -> PathBuf {
    manifest_dir().join("configs/default.yaml")
}

fn gedanken(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gedanken"))
        .args(args)
        .env("GEDANKEN_LOG", "error")
        .output()
        .unwrap()
}

fn run_into(scenario: &str, config: &Path, out: &Path) -> Output {
    gedanken(&[
        scenario,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

/// sha256 of every artifact except the manifest, which records wall-clock time.
fn digests(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name == "manifest.json" {
            continue;
        }
        out.insert(name, hex(&Sha256::digest(fs::read(&path).unwrap())));
    }
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn golden_path(scenario: &str) -> PathBuf {
    manifest_dir()
        .join("tests/golden")
        .join(format!("{scenario}.sha256"))
}

fn render(d: &BTreeMap<String, String>) -> String {
    d.iter().map(|(f, h)| format!("{h}  {f}\n")).collect()
}

#[test]
fn every_scenario_is_byte_deterministic_and_matches_goldens() {
    let tmp = tempfile::tempdir().unwrap();
    let bless = std::env::var_os("GEDANKEN_BLESS").is_some();
    for scenario in SCENARIOS {
        let a = tmp.path().join(format!("{scenario}-a"));
        let b = tmp.path().join(format!("{scenario}-b"));
        for dir in [&a, &b] {
            let out = run_into(scenario, &default_config(), dir);
            assert!(
                out.status.success(),
                "{scenario}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
        let (da, db) = (digests(&a), digests(&b));
        assert_eq!(da, db, "{scenario} differs between runs");

        let golden = golden_path(scenario);
        if bless {
            fs::write(&golden, render(&da)).unwrap();
        } else {
            let want = fs::read_to_string(&golden).unwrap_or_default();
            assert_eq!(
                render(&da),
                want,
                "{scenario} drifted from {}",
                golden.display()
            );
        }
    }
}

#[test]
fn manifest_lists_existing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into("disturbance", &default_config(), tmp.path());
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"], "disturbance");
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 3);
    for a in artifacts {
        let meta = fs::metadata(tmp.path().join(a.as_str().unwrap())).unwrap();
        assert!(meta.len() > 0);
    }
    let env = &manifest["config"]["protocol"]["preparation"]["envelopes"];
    assert_eq!(env[0]["kind"], "gaussian");
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!(report["disturbance"].as_f64().unwrap() > 0.0);
}

#[test]
fn flawed_run_writes_both_densities() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_into("bohr_flawed", &default_config(), tmp.path())
        .status
        .success());
    for f in ["position_density.csv", "momentum_density.csv"] {
        let text = fs::read_to_string(tmp.path().join(f)).unwrap();
        // metadata line, header, 128 x 128 cells
        assert_eq!(text.lines().count(), 2 + 128 * 128);
        let d = import_density(&tmp.path().join(f)).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-9);
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!(report["correlations"]["momentum"]["flatness_tv"].is_number());
}

#[test]
fn doppler_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gedanken(&[
        "doppler",
        "--omega",
        "1",
        "--v",
        "-1e-3",
        "--mass",
        "1e9",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!((report["result"]["shift_doppler"].as_f64().unwrap() - 2e-3).abs() < 1e-15);
}

fn error_of(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.starts_with('{'))
        .expect("json error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.yaml");

    fs::write(&cfg, "preparation:\n  d: 15\n").unwrap();
    let out = run_into("epr_ideal", &cfg, &tmp.path().join("o1"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["error"], "wrapped");
    assert!(!tmp.path().join("o1").exists());

    fs::write(&cfg, "grid:\n  n_points: 7\n").unwrap();
    let out = run_into("epr_ideal", &cfg, &tmp.path().join("o2"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"], "invalid_grid");

    fs::write(&cfg, "grid:\n  n_point: 64\n").unwrap();
    let out = run_into("epr_ideal", &cfg, &tmp.path().join("o3"));
    assert_eq!(out.status.code(), Some(2));
    let msg = error_of(&out)["message"].as_str().unwrap().to_string();
    assert!(msg.contains("n_point") && msg.contains("line"), "{msg}");

    // diaphragm postselected far outside its support
    fs::write(
        &cfg,
        "grid: { n_points: 64 }\npreparation: { sigma: 0.3, envelopes: [{kind: gaussian, center: 0, width: 0.5}, {kind: gaussian, center: -3, width: 0.5}] }\npointer: { axis: diaphragm, basis: position, value: 7.0 }\n",
    )
    .unwrap();
    let out = run_into("bohr_flawed", &cfg, &tmp.path().join("o4"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["error"], "null_postselection");

    let out = run_into("nonsense", &default_config(), &tmp.path().join("o5"));
    assert_eq!(out.status.code(), Some(2));
    let out = gedanken(&["epr_ideal"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_shapes_and_round_trip() {
    let grid = gedanken::make_grid(128, 20.0).unwrap();
    let st = build_epr_state(&grid, &PreparationParams::default()).unwrap();
    let d = joint_density(&st, &[Rep::Position, Rep::Momentum]).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("mixed.csv");
    export_density(&d, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 16384 + 2);
    let back = import_density(&path).unwrap();
    assert!((back.total() - 1.0).abs() < 1e-9);
    assert!(back == d);
    assert!(export_density(&d, &tmp.path().join("missing/dir/x.csv")).is_err());
}
