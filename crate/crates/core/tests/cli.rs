use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seldkit::dataio::{self, RunConfig};

fn seldkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seldkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = seldkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A one-room kit with short recordings, to keep the suite quick.
fn small_kit(root: &Path) -> PathBuf {
    let kit = root.join("kit");
    ok(&[
        "make-bank",
        "--out",
        s(&kit),
        "--rooms",
        "1",
        "--seed",
        "3",
        "--samples-per-class",
        "2",
        "--ambience-s",
        "4",
    ]);
    let mut config = RunConfig::load(&kit.join("config.toml")).unwrap();
    config.duration_s = 12.0;
    config.n_recordings = 2;
    config.total_gap_s = dataio::Range { min: 2.0, max: 4.0 };
    let path = root.join("small.toml");
    fs::write(&path, toml::to_string(&config).unwrap()).unwrap();
    path
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .collect();
    names.sort();
    names
}

#[test]
fn full_pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = small_kit(root);
    let data = root.join("data");
    ok(&["synthesize", "--config", s(&config), "--out", s(&data)]);
    let names = files(&data);
    assert!(names.contains(&"manifest.csv".to_string()));
    assert_eq!(names.iter().filter(|n| n.starts_with("meta_")).count(), 2);
    assert_eq!(names.iter().filter(|n| n.starts_with("foa_")).count(), 2);
    assert_eq!(names.iter().filter(|n| n.starts_with("mic_")).count(), 2);

    let feats = root.join("feats");
    ok(&["features", "--in", s(&data), "--format", "mic", "--out", s(&feats)]);
    for name in files(&feats) {
        let stack = dataio::read_feature_dump(&feats.join(name)).unwrap();
        // 12 s at 24 kHz: (288000 - 960) / 480 + 1 frames
        assert_eq!(stack.data.dim(), (599, 64, 10));
    }

    let spec = root.join("identity.toml");
    fs::write(&spec, "seed = 1\n").unwrap();
    let pred = root.join("pred");
    ok(&["oracle", "--ref", s(&data), "--spec", s(&spec), "--out", s(&pred)]);
    for name in files(&pred) {
        assert_eq!(fs::read(pred.join(&name)).unwrap(), fs::read(data.join(&name)).unwrap());
    }
    let stdout = ok(&["evaluate", "--ref", s(&data), "--pred", s(&pred)]);
    assert_eq!(stdout.trim(), "ER 0.00, F 100.0%, LE 0.0°, LR 100.0%");
    assert!(pred.join("report.toml").exists());

    let noisy_spec = root.join("noisy.toml");
    fs::write(&noisy_spec, "doa_jitter_deg = 10.0\np_miss = 0.2\nseed = 2\n").unwrap();
    let noisy = root.join("noisy");
    ok(&["oracle", "--ref", s(&data), "--spec", s(&noisy_spec), "--out", s(&noisy)]);
    ok(&["evaluate", "--ref", s(&data), "--pred", s(&noisy)]);
    let table = ok(&[
        "rank",
        "--reports",
        s(&noisy.join("report.toml")),
        s(&pred.join("report.toml")),
    ]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(" pred "), "{table}");
    assert!(lines[2].contains(" noisy "), "{table}");
}

#[test]
fn interferer_ablation_leaves_labels_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = small_kit(root);
    let (full, clean) = (root.join("full"), root.join("clean"));
    ok(&["synthesize", "--config", s(&config), "--out", s(&full)]);
    ok(&["synthesize", "--config", s(&config), "--out", s(&clean), "--no-interferers"]);
    for name in files(&full).iter().filter(|n| n.starts_with("meta_")) {
        assert_eq!(fs::read(full.join(name)).unwrap(), fs::read(clean.join(name)).unwrap());
    }
    let full_wav = files(&full).into_iter().find(|n| n.starts_with("foa_")).unwrap();
    assert_ne!(
        fs::read(full.join(&full_wav)).unwrap(),
        fs::read(clean.join(&full_wav)).unwrap()
    );
}

#[test]
fn missing_prediction_files_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, p) = (tmp.path().join("ref"), tmp.path().join("pred"));
    fs::create_dir_all(&r).unwrap();
    fs::create_dir_all(&p).unwrap();
    fs::write(r.join("meta_a.csv"), "0,1,0,10,0\n").unwrap();
    fs::write(r.join("meta_b.csv"), "0,1,0,10,0\n").unwrap();
    fs::write(p.join("meta_a.csv"), "0,1,0,10,0\n").unwrap();
    let out = seldkit(&["evaluate", "--ref", s(&r), "--pred", s(&p)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("meta_b.csv"), "{err}");
}

#[test]
fn malformed_metadata_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, p) = (tmp.path().join("ref"), tmp.path().join("pred"));
    fs::create_dir_all(&r).unwrap();
    fs::create_dir_all(&p).unwrap();
    fs::write(r.join("meta_a.csv"), "0,1,0,10,0\n").unwrap();
    fs::write(p.join("meta_a.csv"), "0,1,0,10,0\n3,x,0,1,1\n").unwrap();
    let out = seldkit(&["evaluate", "--ref", s(&r), "--pred", s(&p)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("meta_a.csv:2:"), "{err}");
}

#[test]
fn unknown_config_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "seed = 1\nformats = [\"foa\"]\nsamples = \"s\"\nrooms = []\nbogus = 2\n").unwrap();
    let out = seldkit(&["synthesize", "--config", s(&config), "--out", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}
