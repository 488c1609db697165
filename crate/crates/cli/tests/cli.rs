//! End-to-end runs of the `fdanet` binary.

use std::path::Path;
use std::process::{Command, Output};

use fdanet::raw::{read_manifest, simple_isp, RawFile};
use fdanet::train::psnr;

fn fdanet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdanet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fdanet(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_byte_reproducible_and_lists_every_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--out", s(d), "--count", "4", "--seed", "1", "--size", "32x48"]);
    }
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    assert_eq!(read_manifest(&a).unwrap().samples.len(), 4);
}

#[test]
fn exit_codes_are_categorized() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    ok(&["synth", "--out", s(&data), "--count", "1", "--size", "16x16"]);
    let x = data.join("00000_x.fraw");
    let out = tmp.path().join("o.ppm");

    let missing = fdanet(&["infer", "--ckpt", s(&tmp.path().join("none.fdat")), "--input", s(&x), "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(3));

    let garbage = tmp.path().join("bad.fdat");
    std::fs::write(&garbage, b"FDAT1\x01").unwrap();
    let bad = fdanet(&["infer", "--ckpt", s(&garbage), "--input", s(&x), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("byte"));

    let no_data = fdanet(&["train", "--data", s(&tmp.path().join("nothing")), "--out", s(&tmp.path().join("r"))]);
    assert_eq!(no_data.status.code(), Some(2));
    assert_eq!(fdanet(&["synth", "--out", s(&data), "--size", "oops"]).status.code(), Some(2));
    assert_eq!(fdanet(&["check", "--level", "extreme"]).status.code(), Some(2));
}

#[test]
fn config_mismatch_names_the_tensor() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    let run = tmp.path().join("run");
    ok(&["synth", "--out", s(&data), "--count", "2", "--size", "32x32"]);
    ok(&["train", "--data", s(&data), "--out", s(&run), "--preset", "tiny", "--steps", "1", "--crop-size", "8"]);
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"model": {"num_scales": 2, "base_channels": 8, "window_heights": [3, 3]}}"#).unwrap();
    let out = fdanet(&[
        "infer",
        "--ckpt",
        s(&run.join("final.fdat")),
        "--input",
        s(&data.join("00000_x.fraw")),
        "--out",
        s(&tmp.path().join("o.ppm")),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("enc.stem.weight"));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    ok(&["synth", "--out", s(&data), "--count", "1", "--size", "16x16"]);
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"model": {"num_scales": 2, "base_channels": 4, "cid_blocks_per_scale": 1, "window_heights": [3, 3], "groupnorm_groups": 2}, "train": {"steps": 3, "lr": 0.01, "crop_size": 8}}"#).unwrap();
    let stdout =
        ok(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&tmp.path().join("r")), "--steps", "2"]);
    assert!(stdout.contains("defaults < file"), "{stdout}");
    assert!(stdout.contains("flags --steps"));
    assert!(stdout.contains(r#""steps":2"#) && stdout.contains(r#""lr":0.01"#));
    let metrics = std::fs::read_to_string(tmp.path().join("r/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
}

#[test]
fn flops_json_and_check_report() {
    let json: serde_json::Value =
        serde_json::from_str(&ok(&["flops", "--preset", "tiny", "--input", "1x4x64x64", "--json"])).unwrap();
    assert!(json["infer_macs"].as_u64().unwrap() < json["train_macs"].as_u64().unwrap());
    assert!(json["raw_decoder_share"].as_f64().unwrap() > 0.0);
    let report = ok(&["check", "--level", "quick"]);
    assert!(report.contains("0 failed"));
    assert!(!report.contains("FAIL"));
    let csv = ok(&["bench", "--impl", "linear", "--sizes", "4x8,4x16", "--channels", "2"]);
    assert!(csv.starts_with("impl,H,W,C,h,wall_ns,flops\nlinear,4,8,2,7,"));
}

/// Trains a small model, then checks the streaming executor against the
/// default one and the enhanced output against the amplified-noisy input
/// pushed through the reference ISP.
#[test]
fn trained_model_beats_noisy_baseline_and_streaming_matches() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, held_out, run) = (tmp.path().join("d"), tmp.path().join("h"), tmp.path().join("run"));
    ok(&["synth", "--out", s(&data), "--count", "32", "--size", "128x128", "--seed", "3", "--ratios", "250"]);
    ok(&["synth", "--out", s(&held_out), "--count", "4", "--size", "128x128", "--seed", "77", "--ratios", "250"]);
    ok(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--preset",
        "tiny",
        "--steps",
        "600",
        "--lr",
        "2e-3",
        "--crop-size",
        "64",
        "--eval-every",
        "300",
    ]);

    let ckpt = run.join("final.fdat");
    let (mut model_db, mut base_db) = (0.0, 0.0);
    for i in 0..4 {
        let x = held_out.join(format!("{i:05}_x.fraw"));
        let (default, streaming) = (tmp.path().join(format!("a{i}.ppm")), tmp.path().join(format!("b{i}.ppm")));
        ok(&["infer", "--ckpt", s(&ckpt), "--input", s(&x), "--out", s(&default)]);
        ok(&["infer", "--ckpt", s(&ckpt), "--input", s(&x), "--out", s(&streaming), "--streaming"]);
        assert!(std::fs::read(&default).unwrap().starts_with(b"P6\n128 128\n255\n"));

        let a = RawFile::read(default.with_extension("fraw")).unwrap().tensor;
        let b = RawFile::read(streaming.with_extension("fraw")).unwrap().tensor;
        assert!(a.max_abs_diff(&b) < 1e-5);

        let target = RawFile::read(held_out.join(format!("{i:05}_y_rgb.fraw"))).unwrap().tensor;
        let baseline = simple_isp(&RawFile::read(&x).unwrap().tensor).unwrap();
        model_db += psnr(&a.map(|v| v.clamp(0.0, 1.0)), &target, 1.0).unwrap() / 4.0;
        base_db += psnr(&baseline, &target, 1.0).unwrap() / 4.0;
    }
    assert!(model_db > base_db, "model {model_db:.2} dB vs noisy baseline {base_db:.2} dB");
    eprintln!("held-out mean PSNR: model {model_db:.2} dB, noisy baseline {base_db:.2} dB");
}
