//! End-to-end tests of the binary: pipeline behavior, determinism of file
//! outputs, format round trips, config precedence, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hsstv::cube::{CubeDims, HsCube};
use hsstv::io::{read_cube, write_cube};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hsstv"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Small piecewise-smooth cube written to `truth.hsc`.
fn write_truth(dir: &Path) -> PathBuf {
    let d = CubeDims::new(16, 16, 4).unwrap();
    let mut data = vec![0.0; d.nb()];
    for band in 0..4 {
        let t = band as f64 / 3.0;
        for col in 0..16 {
            for row in 0..16 {
                let mut v = 0.2 + 0.1 * t + 0.3 * row as f64 / 15.0 + 0.2 * col as f64 / 15.0;
                if row >= 8 && col < 8 {
                    v += 0.15;
                }
                data[row + col * 16 + band * 256] = v.clamp(0.02, 0.98);
            }
        }
    }
    let cube = HsCube::from_vec(d, data).unwrap();
    let path = dir.join("truth.hsc");
    write_cube(&path, &cube).unwrap();
    path
}

const NOISE: [&str; 8] = [
    "--sigma", "0.05", "--sp", "0.04", "--lv", "0.04", "--lh", "0.04",
];

#[test]
fn degrade_is_deterministic_and_identity_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth = truth.to_str().unwrap();

    let mut args_a = vec![
        "degrade",
        truth,
        "-o",
        "a.hsc",
        "--mask-out",
        "a.hsm",
        "--seed",
        "9",
    ];
    args_a.extend_from_slice(&NOISE);
    assert_ok(&run(&args_a, dir.path()));
    let mut args_b = vec![
        "degrade",
        truth,
        "-o",
        "b.hsc",
        "--mask-out",
        "b.hsm",
        "--seed",
        "9",
    ];
    args_b.extend_from_slice(&NOISE);
    assert_ok(&run(&args_b, dir.path()));

    assert_eq!(
        fs::read(dir.path().join("a.hsc")).unwrap(),
        fs::read(dir.path().join("b.hsc")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("a.hsm")).unwrap(),
        fs::read(dir.path().join("b.hsm")).unwrap()
    );

    // zero noise: output bytes match the input cube exactly
    assert_ok(&run(&["degrade", truth, "-o", "clean.hsc"], dir.path()));
    assert_eq!(
        fs::read(dir.path().join("clean.hsc")).unwrap(),
        fs::read(dir.path().join("truth.hsc")).unwrap()
    );
}

#[test]
fn restore_reports_and_improves() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth_str = truth.to_str().unwrap();

    let mut degrade = vec!["degrade", truth_str, "-o", "obs.hsc", "--seed", "3"];
    degrade.extend_from_slice(&NOISE);
    assert_ok(&run(&degrade, dir.path()));

    let mut restore = vec![
        "restore",
        "obs.hsc",
        "-o",
        "rest.hsc",
        "--report",
        "report.json",
        "--trace",
        "trace.csv",
    ];
    restore.extend_from_slice(&NOISE);
    assert_ok(&run(&restore, dir.path()));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "restore");
    assert_eq!(report["regularizer"]["kind"], "hsstv");
    assert_eq!(report["result"]["converged"], true);

    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,u_change,primal_residual\n"));
    assert!(trace.lines().count() > 2);

    // restored cube is closer to the truth than the observation
    let truth_cube = read_cube(&truth).unwrap();
    let observed = read_cube(&dir.path().join("obs.hsc")).unwrap();
    let restored = read_cube(&dir.path().join("rest.hsc")).unwrap();
    let before = hsstv::metrics::psnr(&observed, &truth_cube).unwrap();
    let after = hsstv::metrics::psnr(&restored, &truth_cube).unwrap();
    assert!(after > before, "psnr {before:.2} -> {after:.2}");
}

#[test]
fn sstv_equals_hsstv_with_zero_omega() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth_str = truth.to_str().unwrap();

    let mut degrade = vec!["degrade", truth_str, "-o", "obs.hsc", "--seed", "5"];
    degrade.extend_from_slice(&NOISE);
    assert_ok(&run(&degrade, dir.path()));

    let mut a = vec!["restore", "obs.hsc", "-o", "sstv.hsc", "--reg", "sstv"];
    a.extend_from_slice(&NOISE);
    assert_ok(&run(&a, dir.path()));
    let mut b = vec![
        "restore", "obs.hsc", "-o", "hs0.hsc", "--reg", "hsstv", "--omega", "0", "--p", "1",
    ];
    b.extend_from_slice(&NOISE);
    assert_ok(&run(&b, dir.path()));

    let sstv = read_cube(&dir.path().join("sstv.hsc")).unwrap();
    let hs0 = read_cube(&dir.path().join("hs0.hsc")).unwrap();
    let max_diff = sstv
        .data()
        .iter()
        .zip(hs0.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    assert!(max_diff <= 1e-9, "outputs differ by {max_diff:e}");
}

#[test]
fn cs_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth_str = truth.to_str().unwrap();

    assert_ok(&run(
        &[
            "cs-sample",
            truth_str,
            "--rate",
            "0.4",
            "--sigma",
            "0.1",
            "--seed",
            "2",
            "-o",
            "meas.hsc",
            "--mask-out",
            "mask.hsm",
        ],
        dir.path(),
    ));
    // deterministic re-run produces identical bytes
    assert_ok(&run(
        &[
            "cs-sample",
            truth_str,
            "--rate",
            "0.4",
            "--sigma",
            "0.1",
            "--seed",
            "2",
            "-o",
            "meas2.hsc",
            "--mask-out",
            "mask2.hsm",
        ],
        dir.path(),
    ));
    assert_eq!(
        fs::read(dir.path().join("meas.hsc")).unwrap(),
        fs::read(dir.path().join("meas2.hsc")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("mask.hsm")).unwrap(),
        fs::read(dir.path().join("mask2.hsm")).unwrap()
    );

    assert_ok(&run(
        &[
            "cs-restore",
            "meas.hsc",
            "--mask",
            "mask.hsm",
            "--sigma",
            "0.1",
            "-o",
            "recon.hsc",
            "--report",
            "cs.json",
        ],
        dir.path(),
    ));
    let recon = read_cube(&dir.path().join("recon.hsc")).unwrap();
    let truth_cube = read_cube(&truth).unwrap();
    assert_eq!(recon.dims(), truth_cube.dims());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cs.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "cs-restore");

    // the mask file must agree between sample and restore
    let meas = read_cube(&dir.path().join("meas.hsc")).unwrap();
    assert_eq!(meas.dims().n_h, 1);
    assert_eq!(meas.dims().bands, 1);
}

#[test]
fn metrics_of_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth_str = truth.to_str().unwrap();
    let out = run(&["metrics", truth_str, truth_str], dir.path());
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("band,psnr,ssim"));
    assert_eq!(lines.next(), Some("all,inf,1"));
}

#[test]
fn export_rgb_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let out = run(
        &[
            "export-rgb",
            truth.to_str().unwrap(),
            "-o",
            "img.png",
            "--bands",
            "1,2,4",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let bytes = fs::read(dir.path().join("img.png")).unwrap();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
}

#[test]
fn config_file_feeds_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth_str = truth.to_str().unwrap();

    fs::write(
        dir.path().join("run.toml"),
        r#"
            seed = 4

            [noise]
            sigma = 0.05
            s_p = 0.04
            l_v = 0.04
            l_h = 0.04
        "#,
    )
    .unwrap();

    // degrade with parameters from the config
    assert_ok(&run(
        &[
            "degrade", truth_str, "-o", "cfg.hsc", "--config", "run.toml",
        ],
        dir.path(),
    ));
    // the same parameters as flags with the same seed give identical bytes
    let mut flags = vec!["degrade", truth_str, "-o", "flag.hsc", "--seed", "4"];
    flags.extend_from_slice(&NOISE);
    assert_ok(&run(&flags, dir.path()));
    assert_eq!(
        fs::read(dir.path().join("cfg.hsc")).unwrap(),
        fs::read(dir.path().join("flag.hsc")).unwrap()
    );

    // a flag overrides the config value: zero noise leaves the cube alone
    assert_ok(&run(
        &[
            "degrade",
            truth_str,
            "-o",
            "quiet.hsc",
            "--config",
            "run.toml",
            "--sigma",
            "0",
            "--sp",
            "0",
            "--lv",
            "0",
            "--lh",
            "0",
        ],
        dir.path(),
    ));
    assert_eq!(
        fs::read(dir.path().join("quiet.hsc")).unwrap(),
        fs::read(&truth).unwrap()
    );

    // unknown config keys are rejected
    fs::write(dir.path().join("bad.toml"), "[solver]\nstep = 1\n").unwrap();
    let out = run(
        &["degrade", truth_str, "-o", "x.hsc", "--config", "bad.toml"],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 2);

    // the [paths] section can stand in for the positional/flag paths
    fs::write(
        dir.path().join("paths.toml"),
        r#"
            seed = 4

            [noise]
            sigma = 0.05
            s_p = 0.04
            l_v = 0.04
            l_h = 0.04

            [paths]
            input = "truth.hsc"
            output = "from_config.hsc"
        "#,
    )
    .unwrap();
    assert_ok(&run(&["degrade", "--config", "paths.toml"], dir.path()));
    assert_eq!(
        fs::read(dir.path().join("from_config.hsc")).unwrap(),
        fs::read(dir.path().join("cfg.hsc")).unwrap()
    );
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth_str = truth.to_str().unwrap();

    // missing file
    let out = run(&["metrics", "nope.hsc", truth_str], dir.path());
    assert_eq!(exit_code(&out), 2);

    // malformed cube
    fs::write(dir.path().join("junk.hsc"), b"not a cube").unwrap();
    let out = run(&["metrics", "junk.hsc", truth_str], dir.path());
    assert_eq!(exit_code(&out), 2);

    // under-determined restore (no radii, no noise statistics)
    let out = run(&["restore", truth_str, "-o", "x.hsc"], dir.path());
    assert_eq!(exit_code(&out), 2);

    // bad flag values
    let out = run(
        &[
            "cs-sample",
            truth_str,
            "--rate",
            "1.5",
            "-o",
            "m.hsc",
            "--mask-out",
            "m.hsm",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 2);

    // clap-level parse failure also exits 2
    let out = run(&["restore"], dir.path());
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn sweep_writes_one_row_per_omega() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let truth_str = truth.to_str().unwrap();

    let mut degrade = vec!["degrade", truth_str, "-o", "obs.hsc", "--seed", "8"];
    degrade.extend_from_slice(&NOISE);
    assert_ok(&run(&degrade, dir.path()));

    let mut sweep = vec![
        "sweep",
        "obs.hsc",
        "--reference",
        truth_str,
        "-o",
        "sweep.csv",
        "--omegas",
        "0.02,0.05",
    ];
    sweep.extend_from_slice(&NOISE);
    assert_ok(&run(&sweep, dir.path()));

    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "omega,psnr,ssim,iterations,converged");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.02,"));
    assert!(lines[2].starts_with("0.05,"));
}
