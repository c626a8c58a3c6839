use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sefm_core::imgio::{encode_pgm, GrayImage};

fn sefm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sefm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, scene: &str) {
    let out = sefm(&["synth", "--scene", scene, "--out", s(dir), "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn report_value(text: &str, key: &str) -> usize {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn synth_then_match_writes_reconciled_outputs() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "plane");
    for f in ["img1.pgm", "img2.pgm", "intrinsics.txt", "fundamental.txt", "gt.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let out_dir = dir.path().join("run");
    let out = sefm(&[
        "match",
        s(&dir.path().join("img1.pgm")),
        s(&dir.path().join("img2.pgm")),
        "--intrinsics",
        s(&dir.path().join("intrinsics.txt")),
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    let total = report_value(&report, "matches.total");
    let survivors = report_value(&report, "matches.survivors");
    assert!(survivors > 0);
    let matches = fs::read_to_string(out_dir.join("matches.txt")).unwrap();
    let rows: Vec<&str> = matches.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), total);
    assert_eq!(rows.iter().filter(|l| l.ends_with(" -")).count(), survivors);
    assert!(out_dir.join("viz.ppm").exists());
    assert!(report.contains("cameras = calibrated"));
}

#[test]
fn disjoint_images_fail_in_seed_or_ransac_stage() {
    let dir = tempfile::tempdir().unwrap();
    let noise = GrayImage::from_fn(240, 180, |x, y| ((x * 7919 + y * 104729) % 251) as f64).unwrap();
    let stripes = GrayImage::from_fn(240, 180, |x, _| if x % 2 == 0 { 255.0 } else { 0.0 }).unwrap();
    let (a, b) = (dir.path().join("a.pgm"), dir.path().join("b.pgm"));
    fs::write(&a, encode_pgm(&noise)).unwrap();
    fs::write(&b, encode_pgm(&stripes)).unwrap();
    let out = sefm(&["match", s(&a), s(&b), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed stage") || err.contains("RANSAC stage"), "{err}");
    assert!(!dir.path().join("o").join("matches.txt").exists());
}

#[test]
fn same_image_twice_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "plane");
    let img = dir.path().join("img1.pgm");
    let out = sefm(&["match", s(&img), s(&img), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn reconstruct_without_intrinsics_is_projective() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "two-plane");
    let out_dir = dir.path().join("o");
    let out = sefm(&[
        "reconstruct",
        s(&dir.path().join("img1.pgm")),
        s(&dir.path().join("img2.pgm")),
        "--out",
        s(&out_dir),
        "--set",
        "viz.every=0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ply = fs::read_to_string(out_dir.join("cloud.ply")).unwrap();
    assert!(ply.starts_with("ply\n") && ply.contains("projective"));
    assert!(!out_dir.join("viz.ppm").exists());
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert_eq!(report_value(&report, "matches.sp_invalid"), 0);
}

#[test]
fn dump_config_applies_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "# tuned\nrough.sigma = 3\nseed = 5\n").unwrap();
    let out = sefm(&["eval", "--config", s(&cfg), "--seed", "9", "--set", "eval.tol=1.5", "--dump-config"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rough.sigma = 3\n"));
    assert!(text.contains("seed = 9\n"));
    assert!(text.contains("eval.tol = 1.5\n"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let out = sefm(&["eval", "--set", "no.such.key=1", "--dump-config"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no.such.key"));
}

#[test]
fn eval_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = sefm(&["eval", "--scene", "plane", "--out", s(dir.path()), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(csv.starts_with("scene,") && csv.lines().nth(1).unwrap().starts_with("plane,"));
    let txt = fs::read_to_string(dir.path().join("metrics.txt")).unwrap();
    assert!(txt.contains("eval.precision = ") && txt.contains("matches.survivors = "));
}
