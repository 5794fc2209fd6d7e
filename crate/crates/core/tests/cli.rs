//! End-to-end checks of the command-line binary: preset coverage, exit
//! codes, determinism of the written artifacts, and flag overrides.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chsmc"))
}

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../presets/{name}.cfg"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chsmc_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn every_preset_parses_and_completes() {
    let jobs = [
        ("doublewell_1d", "run"),
        ("obstacle_1d", "run"),
        ("spinodal_2d", "run"),
        ("smc_reaching_1d", "smc"),
        ("contdep_1d", "contdep"),
        ("eps_study_1d", "eps-study"),
    ];
    for (name, sub) in jobs {
        let out_dir = tmp_dir(&format!("preset_{name}"));
        let start = Instant::now();
        let out = bin()
            .arg(sub)
            .arg("--config")
            .arg(preset(name))
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        let elapsed = start.elapsed();
        assert!(
            out.status.success(),
            "preset {name} failed: {}",
            stderr_of(&out)
        );
        assert!(
            elapsed.as_secs() < 60,
            "preset {name} took {elapsed:?}, budget is 60 s"
        );
        let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
        assert!(summary.starts_with("experiment="), "{name}: {summary}");
        fs::remove_dir_all(&out_dir).unwrap();
    }
}

#[test]
fn reruns_write_byte_identical_artifacts() {
    let d1 = tmp_dir("det_a");
    let d2 = tmp_dir("det_b");
    for d in [&d1, &d2] {
        let out = bin()
            .arg("run")
            .arg("--config")
            .arg(preset("spinodal_2d"))
            .arg("--out")
            .arg(d)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    for file in ["diagnostics.csv", "summary.txt", "phi_final.chsf"] {
        let a = fs::read(d1.join(file)).unwrap();
        let b = fs::read(d2.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    fs::remove_dir_all(&d1).unwrap();
    fs::remove_dir_all(&d2).unwrap();
}

#[test]
fn exit_codes_follow_the_contract() {
    // bad usage and bad configs are exit 1
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg("/no/such/file.cfg")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("error"));

    let dir = tmp_dir("codes");
    let bad = dir.join("bad.cfg");
    fs::write(&bad, "nx = 32\nwhatever = 1\n").unwrap();
    let out = bin().arg("run").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("unknown key"));

    let invalid = dir.join("invalid.cfg");
    fs::write(&invalid, "nu = -1\n").unwrap();
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&invalid)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("nu"));

    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // help and version are success
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(
        bin().arg("--version").output().unwrap().status.code(),
        Some(0)
    );

    // a run that blows up is exit 2
    let unstable = dir.join("unstable.cfg");
    fs::write(
        &unstable,
        format!(
            "nx = 32\ntau = 0.5\nt_final = 5\nnu = 1e-9\n\
             phi0 = cosine 0 3 8\ntheta0 = const 0\nout = {}\n",
            dir.join("unstable_out").display()
        ),
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&unstable)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("blew up"), "{}", stderr_of(&out));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn subcommands_override_the_config_experiment() {
    let dir = tmp_dir("override");
    let cfg = dir.join("smc.cfg");
    fs::write(
        &cfg,
        "experiment = smc\nnx = 32\ntau = 1e-4\nt_final = 0.01\nb = 1\nell = 1\n\
         rho = 5\noperator = sign\ntheta0 = cosine 0 0.1 1\nphi0 = cosine 0.1 0.1 1\n",
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("as_run"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let summary = fs::read_to_string(dir.join("as_run/summary.txt")).unwrap();
    assert!(summary.contains("experiment=simulate"), "{summary}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn smc_flags_override_gain_and_tolerance() {
    let dir = tmp_dir("smcflags");
    let out = bin()
        .arg("smc")
        .arg("--config")
        .arg(preset("smc_reaching_1d"))
        .arg("--rho")
        .arg("20")
        .arg("--tol")
        .arg("5e-4")
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("rho=2e1"), "{summary}");
    assert!(summary.contains("tol_abs=5e-4"), "{summary}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn final_snapshots_are_readable() {
    let dir = tmp_dir("snaps");
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(preset("doublewell_1d"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let (phi, t) = chsmc::snapshot::load_chsf(&dir.join("phi_final.chsf")).unwrap();
    assert_eq!(phi.grid().shape(), &[128]);
    assert!((t - 1.0).abs() < 1e-9);
    assert!(phi.max_abs() < 2.0);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn selftest_subcommand_reports_success() {
    let out = bin().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("ok   transform_round_trip"), "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}
