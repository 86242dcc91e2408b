use std::path::Path;
use std::process::{Command, Output};

use scanet::synth::Manifest;
use scanet::Image;

fn scanet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scanet"))
        .args(args)
        .current_dir(cwd)
        .env("SCANET_DETERMINISTIC", "1")
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn generate_data_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = scanet(&["generate-data", "--pairs", "4", "--size", "128", "--seed", "7", "--out", out], d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (manifest(&d.path().join("a")), manifest(&d.path().join("b")));
    assert_eq!(a.pairs.len(), 4);
    for (x, y) in a.pairs.iter().zip(&b.pairs) {
        assert_eq!((&x.clear_sha256, &x.hazy_sha256), (&y.clear_sha256, &y.hazy_sha256));
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(scanet(&["generate-data", "--pairs", "4"], d.path()).status.code(), Some(2));
    assert_eq!(scanet(&["budget", "--input", "12by16"], d.path()).status.code(), Some(2));
    assert_eq!(scanet(&["frobnicate"], d.path()).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let d = tempfile::tempdir().unwrap();
    let o = scanet(&["infer", "--checkpoint", "missing.ckpt", "--in", "x.png", "--out", "y.png"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = scanet(&["train", "--data", "nowhere", "--small"], d.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_of_identical_directories_is_perfect() {
    let d = tempfile::tempdir().unwrap();
    assert!(scanet(&["generate-data", "--pairs", "2", "--size", "32", "--out", "data"], d.path()).status.success());
    let o = scanet(&["eval", "--pred", "data/clear", "--gt", "data/clear"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let agg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(agg["psnr"].as_f64(), Some(scanet::metrics::PSNR_CAP));
    assert!((agg["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(agg["images"].as_u64(), Some(2));
    let rows = std::fs::read_to_string(d.path().join("eval.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn budget_reports_both_conventions() {
    let d = tempfile::tempdir().unwrap();
    let o = scanet(&["budget", "--input", "1200x1600"], d.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("TwoPerMac") && text.contains("HalfMac"));
    assert!(text.contains("1200x1600"));
    assert!(text.contains("parameters"));
}

#[test]
fn train_then_infer_keeps_the_image_size() {
    let d = tempfile::tempdir().unwrap();
    assert!(scanet(&["generate-data", "--pairs", "1", "--size", "32", "--out", "data"], d.path()).status.success());
    let config = serde_json::json!({
        "epochs": 1,
        "patch": 16,
        "stride": 16,
        "scales": [1.0],
        "sample_every": 0,
        "msssim": { "window": 5 },
        "model": scanet::ModelConfig::tiny(),
    });
    std::fs::write(d.path().join("cfg.json"), config.to_string()).unwrap();
    let o = scanet(&["train", "--config", "cfg.json", "--data", "data", "--out", "runs", "--name", "t"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = d.path().join("runs/t");
    assert!(run.join("metrics.csv").exists() && run.join("config.json").exists());

    // an odd-sized input goes through the pad/crop path
    Image::rgb(37, 29, [0.4, 0.5, 0.6]).save_png(&d.path().join("hazy.png")).unwrap();
    let o = scanet(
        &["infer", "--checkpoint", "runs/t/checkpoints/final.ckpt", "--in", "hazy.png", "--out", "dehazed.png", "--attention", "m.png"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = Image::load_png(&d.path().join("dehazed.png")).unwrap();
    assert_eq!((out.width, out.height, out.channels), (37, 29, 3));
    let m = Image::load_png(&d.path().join("m.png")).unwrap();
    assert_eq!((m.width, m.height), (37, 29));

    let o = scanet(&["eval", "--checkpoint", "runs/t/checkpoints/final.ckpt", "--data", "data"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("cfg.json"), r#"{"epochs": 1, "bogus": true}"#).unwrap();
    let o = scanet(&["train", "--config", "cfg.json"], d.path());
    assert_eq!(o.status.code(), Some(1));
}
