//! End-to-end tests of the binary: artifact determinism (the 14th
//! acceptance criterion), exit codes, and CSV shapes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nv-sense"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nv-sense-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|_| panic!("missing {name}"))
}

#[test]
fn acceptance_14_validate_artifacts_are_byte_identical() {
    let d1 = tmpdir("det1");
    let d2 = tmpdir("det2");
    for d in [&d1, &d2] {
        let status = bin()
            .args(["validate", "--quick", "--seed", "12345", "--out"])
            .arg(d)
            .status()
            .unwrap();
        assert!(status.success(), "validate --quick failed");
    }
    let a = fs::read(d1.join("validate.csv")).unwrap();
    let b = fs::read(d2.join("validate.csv")).unwrap();
    assert_eq!(a, b, "validate.csv differs between identical runs");
    println!("[PASS] 14 validate artifacts byte-identical ({} bytes)", a.len());
}

#[test]
fn qdyne_artifacts_deterministic_for_fixed_seed() {
    let d1 = tmpdir("q1");
    let d2 = tmpdir("q2");
    for d in [&d1, &d2] {
        let status = bin()
            .args(["qdyne", "--seed", "9", "--out"])
            .arg(d)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["qdyne_record.csv", "qdyne_spectrum.csv", "qdyne_fit.csv"] {
        assert_eq!(
            fs::read(d1.join(name)).unwrap(),
            fs::read(d2.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn parse_error_exits_2() {
    let dir = tmpdir("parse");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "[deer\nn = 4\n").unwrap();
    let out = bin()
        .args(["deer", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.starts_with("error: parse:"), "stderr: {msg}");
}

#[test]
fn unknown_key_exits_3() {
    let dir = tmpdir("valerr");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "[deer]\nnonsense = 1\n").unwrap();
    let out = bin()
        .args(["deer", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: validation:"));
}

#[test]
fn degenerate_sweep_rejected() {
    let dir = tmpdir("sweep1pt");
    let cfg = dir.join("s.cfg");
    fs::write(
        &cfg,
        "[deer]\nn = 8\ntau = 5e-7\n[sweep]\nparameter = deer.tau\nstart = 1e-7\nstop = 1e-6\npoints = 1\n",
    )
    .unwrap();
    let out = bin()
        .args(["sweep", "deer", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_locates_decoupling_dip() {
    // tau sweep around pi/(omega_L + a_par/2) puts the minimum within one
    // grid step of the resonance formula
    let dir = tmpdir("dip");
    let cfg = dir.join("s.cfg");
    let omega_l: f64 = 2e6;
    let tau_res = 1.0 / (2.0 * omega_l); // a_par = 0
    fs::write(
        &cfg,
        format!(
            "[nmr]\nlarmor_hz = {omega_l}\nspin = 0 1e4\nn = 32\n\
             [sweep]\nparameter = nmr.tau_start\nstart = {}\nstop = {}\npoints = 25\n",
            0.94 * tau_res,
            1.06 * tau_res
        ),
    )
    .unwrap();
    let status = bin()
        .args(["sweep", "nmr-dd", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir, "sweep.csv");
    let mut best = (0.0f64, 2.0f64);
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        let tau: f64 = parts.next().unwrap().parse().unwrap();
        let p: f64 = parts.next().unwrap().parse().unwrap();
        if p < best.1 {
            best = (tau, p);
        }
    }
    let step = tau_res * 0.12 / 24.0;
    assert!(
        (best.0 - tau_res).abs() <= step * (1.0 + 1e-9),
        "dip at {:.5e}, formula {tau_res:.5e}, step {step:.2e}",
        best.0
    );
}

#[test]
fn sensitivity_profile_within_factor_two() {
    let dir = tmpdir("sens");
    let out = bin()
        .args(["sensitivity", "--profile", "paper-ambient-shallow", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = read(&dir, "sensitivity.csv");
    let find = |name: &str| -> f64 {
        csv.lines()
            .find(|l| l.starts_with(name))
            .and_then(|l| l.split(',').nth(1))
            .unwrap()
            .parse()
            .unwrap()
    };
    let pol = find("eta_pol");
    assert!(pol > 0.05e-6 && pol < 0.2e-6, "eta_pol {pol:.3e}");
    let fluc: f64 = find("eta_fluc");
    let amp = fluc.sqrt();
    assert!(amp > 0.1e-6 && amp < 0.4e-6, "sqrt(eta_fluc) {amp:.3e}");
}

#[test]
fn deer_spectrum_shows_triplet() {
    let dir = tmpdir("deer");
    let status = bin().args(["deer", "--out"]).arg(&dir).status().unwrap();
    assert!(status.success());
    let csv = read(&dir, "deer.csv");
    assert!(csv.starts_with("rf_hz,signal\n"));
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut p = l.split(',');
            (
                p.next().unwrap().parse().unwrap(),
                p.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    // count contiguous regions well below the off-resonant level
    let mut dips = 0;
    let mut inside = false;
    for (_, s) in &rows {
        let low = *s < 0.95;
        if low && !inside {
            dips += 1;
        }
        inside = low;
    }
    assert_eq!(dips, 3, "expected a dip triplet, found {dips}");
}

#[test]
fn csv_headers_present_everywhere() {
    let dir = tmpdir("headers");
    for (cmd, file, header) in [
        ("odmr", "odmr.csv", "freq_hz,pl"),
        ("decohere", "decohere.csv", "t_s,xi"),
        ("filterfn", "filterfn.csv", "omega_hz,filter"),
        ("correlate", "correlate.csv", "dt_s,signal"),
        ("relaxometry", "relaxometry.csv", "t_s,p0"),
        ("nmr-2d", "nmr_2d.csv", "f1_hz,f2_hz,amplitude"),
    ] {
        let status = bin().args([cmd, "--out"]).arg(&dir).status().unwrap();
        assert!(status.success(), "{cmd} failed");
        let text = read(&dir, file);
        assert!(
            text.starts_with(header),
            "{file} header: {}",
            text.lines().next().unwrap_or("")
        );
    }
}

#[test]
fn dump_sequence_flag_writes_protocol() {
    let dir = tmpdir("dump");
    let status = bin()
        .args(["nmr-dd", "--dump-sequence", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let seq = read(&dir, "sequence.txt");
    assert!(seq.lines().next().unwrap().starts_with("PULSE nv_sq"));
    assert!(seq.lines().any(|l| l.starts_with("WAIT ")));
}

#[test]
fn thread_cap_env_is_respected() {
    let dir = tmpdir("threads");
    let status = bin()
        .env("NV_SENSE_THREADS", "1")
        .args(["validate", "--quick", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
}
