//! End-to-end tests of the binary: run directories, manifests, hash
//! checking, fitting, and the dump commands.

use std::path::Path;
use std::process::{Command, Output};

fn transim(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transim"))
        .args(args)
        .env("TRANSIM_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const SMALL_T1_CFG: &str = r#"
seed = 7

[device]
name = "si"

[device.transmon]
f_q_ghz = 4.962
anharmonicity_ghz = -0.260
t1_us = 27.0
t2_us = 6.6

[device.resonator]
f_r_ghz = 6.868
q_internal = 5.8e3
q_external = 12.9e3

[device.coupling]
chi_ghz = 0.0012

[device.squid]
l_j_per_junction_nh = 24.96

[device.fridge]
temperature_mk = 7.0

[device.readout]
mean_ground = [1.0, 0.0]
mean_excited = [-1.0, 0.0]
sigma = 0.2
eps0 = 0.05
eps1 = 0.05

[experiment]
kind = "t1"
shots_per_point = 400
tau = { start = 1350.0, stop = 135000.0, points = 11, spacing = "log" }
"#;

#[test]
fn params_prints_reference_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = transim(&["params", "--device", "si"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("E_J from spectrum"));
    assert!(text.contains("13.1"));
    assert!(text.contains("Purcell"));
}

#[test]
fn bundled_configs_match_presets() {
    for (name, text) in [
        ("si", include_str!("../configs/si.cfg")),
        ("soi", include_str!("../configs/soi.cfg")),
    ] {
        let config = transim::config::RunConfig::parse(text).unwrap();
        let from_file = config.device_spec().unwrap();
        let preset = transim::presets::device(name).unwrap();
        assert_eq!(from_file, preset, "bundled {name}.cfg drifted from the preset");
        let reference = config.reference.expect("bundled configs carry references");
        assert_eq!(reference, transim::presets::reference_values(name).unwrap());
    }
}

#[test]
fn run_fit_and_rerun_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("device.cfg");
    std::fs::write(&cfg_path, SMALL_T1_CFG).unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let out = transim(&["run", "--config", cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let run_dir = dir.path().join("t1_si_seed7");
    let data = run_dir.join("t1.csv");
    let manifest = run_dir.join("manifest.toml");
    assert!(data.exists() && manifest.exists());
    let first = std::fs::read_to_string(&data).unwrap();
    let first_manifest = std::fs::read_to_string(&manifest).unwrap();
    assert!(first.starts_with("# transim dataset"));
    assert!(first_manifest.contains("device_sha256"));

    // byte-identical on re-run, and under a different worker count
    let out = transim(&["run", "--config", cfg, "--workers", "2"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(first, std::fs::read_to_string(&data).unwrap());
    assert_eq!(first_manifest, std::fs::read_to_string(&manifest).unwrap());

    // seed override lands in a different directory with different draws
    let out = transim(&["run", "--config", cfg, "--seed", "8"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let other = std::fs::read_to_string(dir.path().join("t1_si_seed8/t1.csv")).unwrap();
    assert_ne!(first, other);

    // fitting the stored dataset recovers the configured lifetime
    let out = transim(&["fit", "--data", data.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("model: exponential"), "{text}");
    assert!(text.contains("tau"));
}

#[test]
fn fit_refuses_tampered_datasets_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("device.cfg");
    std::fs::write(&cfg_path, SMALL_T1_CFG).unwrap();
    let out = transim(&["run", "--config", cfg_path.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));

    let data = dir.path().join("t1_si_seed7/t1.csv");
    let mut text = std::fs::read_to_string(&data).unwrap();
    text.push_str("# tampered after the run\n");
    std::fs::write(&data, text).unwrap();

    let out = transim(&["fit", "--data", data.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("hash mismatch"));

    let out = transim(&["fit", "--data", data.to_str().unwrap(), "--force"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn invalid_configs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    std::fs::write(&cfg_path, SMALL_T1_CFG.replace("seed = 7", "seed = 7\nbogus = 1")).unwrap();
    let out = transim(&["run", "--config", cfg_path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("bogus"));

    // empty config: missing required sections are named
    let empty = dir.path().join("empty.cfg");
    std::fs::write(&empty, "").unwrap();
    let out = transim(&["run", "--config", empty.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("device"), "{}", stderr(&out));
}

#[test]
fn rb_pipeline_reports_fidelities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("rb.cfg");
    let cfg = SMALL_T1_CFG.replace(
        "kind = \"t1\"\nshots_per_point = 400\ntau = { start = 1350.0, stop = 135000.0, points = 11, spacing = \"log\" }",
        "kind = \"rb_interleaved\"\nshots_per_point = 250\nlengths = [1, 2, 4, 8, 16, 32, 64, 128]\nn_sequences = 8\nclifford_depolarizing = 0.9904\ngate_depolarizing = 0.99\ninterleaved_gate = \"x_pi\"",
    );
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = transim(
        &["rb", "--config", cfg_path.to_str().unwrap(), "--export-sequences"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("avg Clifford fidelity"), "{text}");
    assert!(text.contains("interleaved gate fidelity"));
    let run_dir = dir.path().join("rb_interleaved_si_seed7");
    assert!(run_dir.join("rb_reference.csv").exists());
    assert!(run_dir.join("rb_interleaved.csv").exists());
    assert!(run_dir.join("fidelities.toml").exists());
    let audit = std::fs::read_to_string(run_dir.join("sequences.txt")).unwrap();
    assert!(audit.lines().count() > 8);
}

#[test]
fn waveform_and_trajectory_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("device.cfg");
    std::fs::write(&cfg_path, SMALL_T1_CFG).unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let wave = dir.path().join("wave.csv");
    let out = transim(
        &["waveform", "--config", cfg, "--out", wave.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&wave).unwrap();
    assert!(text.starts_with("# device = si\n"));
    assert!(text.contains("time_ns,i,q\n"));
    assert!(text.lines().count() > 10);

    let traj = dir.path().join("traj.csv");
    let out = transim(
        &["trajectory", "--config", cfg, "--out", traj.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("# device = si\n"));
    assert!(text.contains("time_ns,p0,p1\n"));
    // the pi pulse leaves the qubit excited at the end of the schedule
    let last = text.lines().last().unwrap();
    let p1: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(p1 > 0.8, "final excited population {p1}");
}
