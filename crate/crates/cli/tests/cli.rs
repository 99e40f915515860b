use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use vcs_core::metrics::per_frame_curves;
use vcs_core::storage::{decode_pgm, read_log, read_mask, read_video};

fn vcs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcs"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn vcs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = vcs(dir, args);
    assert!(
        out.status.success(),
        "vcs {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().to_path_buf();
    for (name, kind, seed) in [("train.rgv", "drift-texture", "1"), ("val.rgv", "drift-texture", "2")] {
        ok(
            &p,
            &["gen-synth", "--out", name, "--width", "24", "--height", "24", "--frames", "32", "--kind", kind, "--seed", seed],
        );
    }
    (dir, p)
}

const TRAIN_SMALL: &[&str] = &[
    "train", "--data", "train.rgv", "--val", "val.rgv", "--epochs", "4", "--batch", "25", "--dec-lr", "0.01",
    "--blocks", "100", "--val-blocks", "20", "--hidden", "32", "--layers", "1", "--seed", "3", "--quiet",
];

fn train_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v: Vec<&str> = TRAIN_SMALL.to_vec();
    v.extend_from_slice(extra);
    v
}

#[test]
fn unknown_flag_prints_usage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = vcs(dir.path(), &["measure", "--no-such-flag"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = vcs(dir.path(), &["eval", "--ref", "a.rgv", "--recon", "b.rgv", "--out", "m.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("a.rgv"));
}

#[test]
fn gen_synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for name in ["a.rgv", "b.rgv"] {
        ok(p, &["gen-synth", "--out", name, "--width", "16", "--height", "8", "--frames", "4", "--seed", "9"]);
    }
    let a = fs::read(p.join("a.rgv")).unwrap();
    assert_eq!(a, fs::read(p.join("b.rgv")).unwrap());
    assert_eq!(a.len(), 16 + 16 * 8 * 4);
}

#[test]
fn frozen_mask_never_flips_and_analysis_outputs() {
    let (_d, p) = setup();
    ok(&p, &train_args(&["--out", "m.mdl", "--log", "log.csv", "--freeze-mask"]));
    let log = read_log(p.join("log.csv")).unwrap();
    assert_eq!(log.len(), 4);
    assert!(log.iter().all(|r| r.flips == 0 && r.enc_lr == 0.0));
    ok(&p, &["analyze-mask", "--model", "m.mdl", "--out-prefix", "an"]);
    let hist = fs::read_to_string(p.join("an_hist.csv")).unwrap();
    assert_eq!(hist.lines().count(), 21);
    let stats = fs::read_to_string(p.join("an_stats.csv")).unwrap();
    assert!(stats.contains("nonzero_pct,") && stats.contains("mean_run_ones,"));
    ok(&p, &["plot", "--log", "log.csv", "--out", "c.svg"]);
    assert!(fs::read_to_string(p.join("c.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn measure_reconstruct_eval_pipeline() {
    let (_d, p) = setup();
    ok(&p, &train_args(&["--out", "m.mdl", "--log", "log.csv"]));
    let before = fs::read(p.join("val.rgv")).unwrap();
    ok(&p, &["measure", "--data", "val.rgv", "--mask", "m.mdl", "--out", "c.rgf"]);
    ok(&p, &["reconstruct", "--coded", "c.rgf", "--method", "decoder", "--model", "m.mdl", "--out", "r.rgv"]);
    let out = ok(&p, &["eval", "--ref", "val.rgv", "--recon", "r.rgv", "--out", "m.csv", "--frames", "32"]);
    assert_eq!(fs::read(p.join("val.rgv")).unwrap(), before, "inputs must not change");

    let csv = fs::read_to_string(p.join("m.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "frame,psnr,ssim");
    assert_eq!(lines.len(), 1 + 32 + 1);
    let mean: Vec<&str> = lines.last().unwrap().split(',').collect();
    let psnr: f64 = mean[1].parse().unwrap();
    assert!(psnr.is_finite() && psnr > 0.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean PSNR"));

    // Same averages as the metrics module on the same files.
    let reference = read_video(p.join("val.rgv")).unwrap();
    let recon = read_video(p.join("r.rgv")).unwrap();
    let manual = per_frame_curves(&reference, &recon).unwrap();
    assert_eq!(mean[1], format!("{}", manual.mean_psnr));
    assert_eq!(mean[2], format!("{}", manual.mean_ssim));
}

#[test]
fn classical_methods_run_from_a_mask_file() {
    let (_d, p) = setup();
    ok(&p, &["gen-mask", "--out", "mask.bmr", "--p", "40", "--seed", "5"]);
    ok(&p, &["measure", "--data", "val.rgv", "--mask", "mask.bmr", "--out", "c.rgf"]);
    for method in ["tv", "lasso"] {
        let out = format!("{method}.rgv");
        ok(
            &p,
            &["reconstruct", "--coded", "c.rgf", "--mask", "mask.bmr", "--method", method, "--iters", "30", "--out", &out],
        );
        let v = read_video(p.join(&out)).unwrap();
        assert_eq!((v.width(), v.height(), v.frames()), (24, 24, 32));
    }
    let out = vcs(&p, &["reconstruct", "--coded", "c.rgf", "--method", "tv", "--out", "x.rgv"]);
    assert!(!out.status.success());
}

#[test]
fn mask_image_maps_space_to_rows_and_time_to_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen-mask", "--out", "m.bmr", "--p", "50", "--seed", "8"]);
    ok(p, &["analyze-mask", "--model", "m.bmr", "--out-prefix", "v"]);
    let mask = read_mask(p.join("m.bmr")).unwrap();
    let (w, h, px) = decode_pgm(&fs::read(p.join("v_mask.pgm")).unwrap()).unwrap();
    assert_eq!((w, h), (16, 16));
    for r in 0..16 {
        for c in 0..16 {
            assert_eq!(px[r * 16 + c], 255 * mask.bit(r % 4, r / 4, c));
        }
    }
}

#[test]
fn deterministic_training_and_resume_split() {
    let (_d, p) = setup();
    ok(&p, &train_args(&["--out", "a.mdl", "--log", "a.csv", "--deterministic"]));
    ok(&p, &train_args(&["--out", "b.mdl", "--log", "b.csv", "--deterministic"]));
    assert_eq!(fs::read(p.join("a.mdl")).unwrap(), fs::read(p.join("b.mdl")).unwrap());
    assert_eq!(fs::read(p.join("a.csv")).unwrap(), fs::read(p.join("b.csv")).unwrap());

    let mut first = train_args(&["--out", "half.mdl", "--log", "c.csv", "--deterministic"]);
    let idx = first.iter().position(|a| *a == "--epochs").unwrap();
    first[idx + 1] = "2";
    ok(&p, &first);
    ok(&p, &train_args(&["--resume", "half.mdl", "--out", "c.mdl", "--log", "c.csv", "--deterministic"]));
    assert_eq!(fs::read(p.join("a.mdl")).unwrap(), fs::read(p.join("c.mdl")).unwrap());
    assert_eq!(fs::read(p.join("a.csv")).unwrap(), fs::read(p.join("c.csv")).unwrap());
}

#[test]
fn learning_rate_grid_runs_without_dec_lr() {
    let (_d, p) = setup();
    let args: Vec<&str> = train_args(&["--out", "g.mdl", "--log", "g.csv", "--lr-probe-epochs", "1"])
        .into_iter()
        .collect();
    let i = args.iter().position(|a| *a == "--dec-lr").unwrap();
    let mut args = args;
    args.drain(i..i + 2);
    ok(&p, &args);
    let log = read_log(p.join("g.csv")).unwrap();
    assert!([1e-2, 1e-3, 1e-4].contains(&log[0].dec_lr));
}
