use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use omniact::io::{write_json, KeypointRecord};
use omniact::synth::gen_fisheye;

fn omniact(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_omniact")).args(args).current_dir(cwd).output().unwrap();
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = omniact(args, cwd);
    assert!(out.status.success(), "{args:?} failed with {:?}", out.status);
    String::from_utf8(out.stdout).unwrap()
}

fn small_synth(dir: &Path, seed: &str) {
    ok(&["synth", "--out", "data", "--seed", seed, "--n-samples", "96", "--n-test", "32"], dir);
}

#[test]
fn same_seed_gives_identical_training_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d, "7");
    for out in ["run_a", "run_b"] {
        ok(&["train", "--manifest", "data/train/manifest.json", "--out", out, "--seed", "7", "--epochs", "8"], d);
    }
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("run_a/metrics.csv"), read("run_b/metrics.csv"));
    assert_eq!(read("run_a/head.otsr"), read("run_b/head.otsr"));
    let csv = String::from_utf8(read("run_a/metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("epoch,lr,loss_bce,loss_reg,train_map"));
    assert_eq!(csv.lines().count(), 9);

    ok(&["train", "--manifest", "data/train/manifest.json", "--out", "run_c", "--seed", "8", "--epochs", "8"], d);
    assert_ne!(read("run_a/head.otsr"), read("run_c/head.otsr"));
}

#[test]
fn ablation_rows_are_presets_times_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(
        &["ablate", "--out", "abl/summary.csv", "--seeds", "3,4", "--epochs", "2", "--n-samples", "48", "--n-test", "24"],
        d,
    );
    let csv = std::fs::read_to_string(d.join("abl/summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("group,preset,seed,aggregator,use_mask,reg_weight,k,lse_sharpness,test_map"));
    let rows: Vec<&str> = lines.collect();
    let presets = 4 * 2 * 2 + 4 + 5;
    assert_eq!(rows.len(), presets * 2);
    assert!(stdout.contains("25 presets x 2 seeds"));
    for r in &rows {
        let map: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&map), "{r}");
    }
}

#[test]
fn perfect_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("sample_id,class,score,label\n");
    for s in 0..10 {
        for c in 0..3 {
            let label = (s + c) % 3 == 0;
            csv.push_str(&format!("{s},{c},{},{}\n", if label { 0.9 } else { 0.1 }, label as u8));
        }
    }
    std::fs::write(d.join("pred.csv"), csv).unwrap();
    let stdout = ok(&["eval", "--predictions", "pred.csv", "--out", "ev"], d);
    assert!(stdout.contains("mAP,1.000000"), "{stdout}");
    let table = std::fs::read_to_string(d.join("ev/ap.csv")).unwrap();
    assert_eq!(table, "class,ap\n0,1.000000\n1,1.000000\n2,1.000000\nmAP,1.000000\n");
}

#[test]
fn unwrap_reports_reference_panorama_size() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (cx, cy) = (131.25, 120.5);
    gen_fisheye(256, 256, (cx, cy), &[0.0, 90.0, 200.0]).unwrap().image.save(d.join("frame.ppm")).unwrap();
    let kps: Vec<KeypointRecord> = (0..6)
        .map(|i| {
            let a = (i as f64 * 31.0 + 7.0f64).to_radians();
            let (dx, dy) = (a.cos(), -a.sin());
            KeypointRecord { frame: i / 3, mid_shoulder: [cx + 70.0 * dx, cy + 70.0 * dy], mid_hip: [cx + 20.0 * dx, cy + 20.0 * dy] }
        })
        .collect();
    write_json(d.join("kp.json"), &kps).unwrap();
    let first = ok(&["unwrap", "--input", "frame.ppm", "--keypoints", "kp.json", "--out", "pano"], d);
    assert!(first.contains("panorama: 2451x800"), "{first}");
    assert!(first.contains("center: 131.2500,120.5000"), "{first}");
    assert!(first.contains("(built)"));
    let pano = std::fs::read(d.join("pano/frame_pano.ppm")).unwrap();
    assert!(pano.starts_with(b"P6\n2451 800\n255\n"));

    let second = ok(&["unwrap", "--input", "frame.ppm", "--keypoints", "kp.json", "--out", "pano"], d);
    assert!(second.contains("(cached)"), "{second}");
    assert_eq!(std::fs::read(d.join("pano/frame_pano.ppm")).unwrap(), pano);

    let forced = ok(&["unwrap", "--input", "frame.ppm", "--center", "128,128", "--height", "100", "--out", "small"], d);
    assert!(forced.contains("center: 128.0000,128.0000") && forced.contains("panorama: 306x100"), "{forced}");
}

#[test]
fn synth_train_eval_round_trip_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let t = Instant::now();
    ok(&["synth", "--out", "data", "--seed", "1"], d);
    ok(&["train", "--manifest", "data/train/manifest.json", "--out", "model", "--seed", "1"], d);
    let stdout = ok(&["eval", "--model", "model/head.json", "--manifest", "data/test/manifest.json", "--out", "ev"], d);
    let elapsed = t.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "round trip took {elapsed:.1} s");
    let map: f64 = stdout.lines().find_map(|l| l.strip_prefix("mAP,")).unwrap().parse().unwrap();
    assert!(map >= 0.9, "{stdout}");
    let preds = std::fs::read_to_string(d.join("ev/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 128 * 6);

    let loc = ok(&["localize", "--model", "model/head.json", "--manifest", "data/test/manifest.json", "--out", "heat", "--samples", "0,1"], d);
    assert!(loc.contains("localization hit rate"), "{loc}");
    let names: Vec<String> = std::fs::read_dir(d.join("heat")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(!names.is_empty() && names.iter().all(|n| n.starts_with("clip_0000") && n.ends_with(".pgm")), "{names:?}");
}

#[test]
fn failures_use_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), r#"{"hyperparams": {"kk": 1}}"#).unwrap();
    let code = |args: &[&str]| omniact(args, d).status.code();
    assert_eq!(code(&["synth", "--out", "x", "--config", "bad.json"]), Some(2));
    assert_eq!(code(&["eval", "--predictions", "missing.csv", "--out", "x"]), Some(3));
    write_json(
        d.join("one.json"),
        &[KeypointRecord { frame: 0, mid_shoulder: [10.0, 10.0], mid_hip: [20.0, 20.0] }],
    )
    .unwrap();
    gen_fisheye(32, 32, (16.0, 16.0), &[]).unwrap().image.save(d.join("f.ppm")).unwrap();
    assert_eq!(code(&["unwrap", "--input", "f.ppm", "--keypoints", "one.json", "--out", "x"]), Some(4));
    let threads = Command::new(env!("CARGO_BIN_EXE_omniact"))
        .args(["eval", "--predictions", "missing.csv", "--out", "x"])
        .env("OMNI_THREADS", "lots")
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}
