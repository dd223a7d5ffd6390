use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ild_cli::wav::read_pcm16;

fn nearild(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nearild")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = nearild(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const SCENE: &str = r#"
duration_s = 1.0

[mic_array]
azimuths_deg = [97.5, 102.5, -102.5, -97.5]

[[sources]]
role = "target"
azimuth_deg = 0.0
distance_m = 1.0
signal = { kind = "harmonic", f0_hz = 140.0 }

[[sources]]
role = "interferer"
azimuth_deg = -20.0
distance_m = 1.0
signal = { kind = "noise", seed = 3 }

[[sources]]
role = "interferer"
azimuth_deg = 40.0
distance_m = 1.0
gain_db = -3.0
signal = { kind = "noise_bursts", seed = 4, burst_s = 0.2, gap_s = 0.1 }
"#;

fn write_scene(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scene.toml");
    fs::write(&p, text).unwrap();
    p
}

fn simulate(dir: &Path, scene: &str, seed: u64) -> PathBuf {
    let cfg = write_scene(dir, scene);
    let out = dir.join("run");
    ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
    ]);
    out
}

fn csv_rows(path: &Path) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn dvf_table_far_field_and_midline_rows_are_zero_db() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dvf.csv");
    ok(&[
        "dvf-table",
        "--distances",
        "0.2,0.4,0.6,0.8,1.0",
        "--fmax",
        "800",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5 * 73 * 40);
    for r in &rows {
        if num(r, "distance_m") == 1.0 {
            assert_eq!(num(r, "c_db"), 0.0);
        }
        if num(r, "azimuth_deg") == 0.0 {
            assert!(num(r, "c_db").abs() < 1e-9, "{r:?}");
        }
    }
    let peak = rows
        .iter()
        .filter(|r| num(r, "distance_m") == 0.2 && num(r, "azimuth_deg").abs() == 90.0)
        .map(|r| num(r, "c_db").abs())
        .fold(0.0, f64::max);
    assert!((6.0..=10.0).contains(&peak), "{peak}");
}

#[test]
fn dvf_table_rejects_fmax_above_cap() {
    let out = nearild(&["dvf-table", "--fmax", "900"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("range"));
}

#[test]
fn simulate_is_deterministic_and_components_sum_to_mixture() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = simulate(a.path(), SCENE, 5);
    let rb = simulate(b.path(), SCENE, 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ra.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    let files: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().into())
        .collect();
    assert_eq!(files.len(), 4 * 5);
    for f in &files {
        assert_eq!(fs::read(ra.join(f)).unwrap(), fs::read(rb.join(f)).unwrap(), "{f}");
    }
    let components = ["target", "interferer_1", "interferer_2", "self_noise"];
    for mic in 1..=4 {
        let name = format!("mic{mic}.wav");
        let y = &read_pcm16(&ra.join("mixture").join(&name)).unwrap()[0];
        let parts: Vec<Vec<i16>> = components
            .iter()
            .map(|c| read_pcm16(&ra.join(c).join(&name)).unwrap().remove(0))
            .collect();
        // each of the five quantizations contributes at most half an LSB
        let tol = 0.5 * (components.len() + 1) as f64;
        for n in 0..y.len() {
            let sum: f64 = parts.iter().map(|p| p[n] as f64).sum();
            assert!((sum - y[n] as f64).abs() <= tol, "mic {mic} sample {n}");
        }
    }
}

#[test]
fn seed_changes_self_noise() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = simulate(a.path(), SCENE, 1);
    let rb = simulate(b.path(), SCENE, 2);
    let f = Path::new("self_noise").join("mic1.wav");
    assert_ne!(fs::read(ra.join(&f)).unwrap(), fs::read(rb.join(&f)).unwrap());
    let y = Path::new("mixture").join("mic1.wav");
    assert_ne!(fs::read(ra.join(&y)).unwrap(), fs::read(rb.join(&y)).unwrap());
}

#[test]
fn two_targets_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scene = SCENE.replacen("role = \"interferer\"", "role = \"target\"", 1);
    let cfg = write_scene(dir.path(), &scene);
    let out = nearild(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one target"));
}

#[test]
fn missing_signal_files_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let scene = SCENE
        .replace(
            "{ kind = \"noise\", seed = 3 }",
            "{ kind = \"wav\", path = \"speech_a.wav\" }",
        )
        .replace(
            "{ kind = \"noise_bursts\", seed = 4, burst_s = 0.2, gap_s = 0.1 }",
            "{ kind = \"wav\", path = \"speech_b.wav\" }",
        );
    let cfg = write_scene(dir.path(), &scene);
    let out = nearild(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("speech_a.wav") && err.contains("speech_b.wav"), "{err}");
}

#[test]
fn wav_signals_are_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let sig: Vec<f64> = (0..16_000).map(|n| 0.2 * (n as f64 * 0.07).sin()).collect();
    ild_cli::wav::write(&dir.path().join("talker.wav"), &[sig], 16_000.0, 1.0).unwrap();
    let scene = SCENE.replace(
        "{ kind = \"noise\", seed = 3 }",
        "{ kind = \"wav\", path = \"talker.wav\" }",
    );
    let run = simulate(dir.path(), &scene, 0);
    assert!(run.join("interferer_1").join("mic4.wav").is_file());
}

#[test]
fn external_atf_table_reproduces_sphere_model() {
    let dir = tempfile::tempdir().unwrap();
    let scene = ild_core::scene::Scene::from_toml_str(SCENE).unwrap();
    let atfs = ild_core::scene::build_atfs(&scene).unwrap();
    atfs.write_csv(fs::File::create(dir.path().join("atf.csv")).unwrap())
        .unwrap();
    let with_table = format!("atf_csv = \"atf.csv\"\n{SCENE}");
    let a = simulate(dir.path(), &with_table, 3);
    let other = tempfile::tempdir().unwrap();
    let b = simulate(other.path(), SCENE, 3);
    let f = Path::new("mixture").join("mic2.wav");
    assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap());
}

#[test]
fn bmvdr_only_writes_no_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulate(dir.path(), SCENE, 0);
    ok(&["beamform", "--out", run.to_str().unwrap(), "--methods", "bmvdr"]);
    let m = run.join("beamform").join("bmvdr");
    assert!(m.join("filter.csv").is_file());
    assert!(m.join("output.wav").is_file());
    assert!(!m.join("diagnostics.csv").exists());
    let out = read_pcm16(&m.join("output.wav")).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].len(), 16_000);
}

#[test]
fn evaluate_requires_beamform_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulate(dir.path(), SCENE, 0);
    let out = nearild(&["evaluate", "--out", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("filter.csv"));
}

#[test]
fn unknown_method_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulate(dir.path(), SCENE, 0);
    let out = nearild(&["beamform", "--out", run.to_str().unwrap(), "--methods", "mwf"]);
    assert_eq!(out.status.code(), Some(2));
}

fn full_run(dir: &Path) -> PathBuf {
    let run = simulate(dir, SCENE, 11);
    let r = run.to_str().unwrap();
    ok(&["beamform", "--out", r, "--methods", "bmvdr,jblcmv,ild_0.2,ild_1.0"]);
    ok(&["evaluate", "--out", r]);
    run
}

#[test]
fn pipeline_reports_and_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = full_run(a.path());
    let rb = full_run(b.path());

    let mut artifacts = vec![PathBuf::from("metrics.csv"), PathBuf::from("noise_power.csv")];
    for m in ["bmvdr", "jblcmv", "ild_0.2", "ild_1.0"] {
        artifacts.push(Path::new("beamform").join(m).join("filter.csv"));
    }
    for m in ["ild_0.2", "ild_1.0"] {
        artifacts.push(Path::new("beamform").join(m).join("diagnostics.csv"));
    }
    for f in &artifacts {
        assert_eq!(
            fs::read(ra.join(f)).unwrap(),
            fs::read(rb.join(f)).unwrap(),
            "{}",
            f.display()
        );
    }

    let metrics = csv_rows(&ra.join("metrics.csv"));
    let value = |method: &str, source: &str, metric: &str| {
        metrics
            .iter()
            .find(|r| r["method"] == method && r["source"] == source && r["metric"] == metric)
            .map(|r| num(r, "value_db"))
            .unwrap()
    };
    for m in ["bmvdr", "jblcmv", "ild_0.2", "ild_1.0"] {
        assert!(value(m, "target", "ild_err") < -100.0, "{m}");
        assert!(value(m, "target", "ipd_err") < -100.0, "{m}");
    }
    for s in ["interferer_1", "interferer_2"] {
        assert!(value("jblcmv", s, "ild_err") < -100.0);
        assert!(value("jblcmv", s, "ipd_err") < -100.0);
        assert!(
            value("ild_0.2", s, "ild_err") <= value("bmvdr", s, "ild_err") - 20.0,
            "{s}"
        );
    }

    let diag = csv_rows(&ra.join("beamform").join("ild_1.0").join("diagnostics.csv"));
    assert_eq!(diag.len(), 12);
    for r in &diag {
        let (p2, p3, jb) = (
            num(r, "objective_p2"),
            num(r, "objective_p3"),
            num(r, "objective_jblcmv"),
        );
        let slack = 1e-6 * jb;
        assert!(p2 <= p3 + slack && p3 <= jb + slack, "{r:?}");
        assert!(num(r, "objective_bmvdr") <= p2 + slack, "{r:?}");
    }
}
