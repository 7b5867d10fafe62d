//! Binary contract: exit codes, file outputs, determinism, env overrides.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heterou"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heterou-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const TINY_DELTA_CONFIG: &str = r#"
seed = 42

[ensemble]
n_particles = 25
realizations = 2000
dt_max = 0.05

[time_grid]
kind = "explicit"
values = [0.0, 0.5, 1.0]

[tau_population]
kind = "delta"
location = 1.0

[sigma_population]
kind = "delta"
location = 1.0

[equivalence]
times = [0.5, 1.0]
"#;

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("simulate"));
    assert!(text.contains("compare"));
}

#[test]
fn missing_config_exits_two_and_names_path() {
    let out = bin()
        .args(["compare", "--config", "/no/such/file.cfg"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/no/such/file.cfg"), "stderr: {err}");
}

#[test]
fn unknown_config_keys_rejected() {
    let dir = scratch("badkey");
    let cfg = write_config(
        &dir,
        "bad.cfg",
        &TINY_DELTA_CONFIG.replace("[equivalence]", "mystery_key = 1\n[equivalence]"),
    );
    let out = bin()
        .args(["compare", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mystery_key"), "stderr: {err}");
}

#[test]
fn simulate_writes_deterministic_trajectories() {
    let dir = scratch("simulate");
    let cfg = write_config(&dir, "tiny.cfg", TINY_DELTA_CONFIG);
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let out = bin()
            .args([
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "42",
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["z.csv", "zstar.csv", "zh.csv", "config_echo.cfg"] {
        let a = fs::read(dir.join("a").join(name)).unwrap();
        let b = fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical-seed runs");
        assert!(!a.is_empty());
    }
    let z = fs::read_to_string(dir.join("a").join("z.csv")).unwrap();
    assert!(z.starts_with("realization,t,value\n"));
}

#[test]
fn run_seed_env_override_matches_flag() {
    let dir = scratch("envseed");
    let cfg = write_config(&dir, "tiny.cfg", TINY_DELTA_CONFIG);
    let via_flag = dir.join("flag");
    let via_env = dir.join("env");
    let s1 = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            via_flag.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&s1), 0);
    let s2 = bin()
        .env("RUN_SEED", "7")
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            via_env.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&s2), 0);
    assert_eq!(
        fs::read(via_flag.join("z.csv")).unwrap(),
        fs::read(via_env.join("z.csv")).unwrap()
    );
}

#[test]
fn simulate_binary_format() {
    let dir = scratch("binfmt");
    let cfg = write_config(&dir, "tiny.cfg", TINY_DELTA_CONFIG);
    let out_dir = dir.join("out");
    let out = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--format",
            "binary",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let bytes = fs::read(out_dir.join("z.bin")).unwrap();
    assert_eq!(&bytes[0..4], b"HOUB");
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let r = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let t = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    assert_eq!((n, r, t), (25, 2000, 3));
    assert_eq!(bytes.len(), 16 + 8 * (r * t) as usize);
    // Row-major little-endian doubles; first row starts at t = 0 → 0.0.
    let first = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    assert_eq!(first, 0.0);
}

#[test]
fn compare_passing_config_exits_zero() {
    let dir = scratch("comparepass");
    let cfg = write_config(&dir, "tiny.cfg", TINY_DELTA_CONFIG);
    let out = bin()
        .args([
            "compare",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for name in ["ks.csv", "variance.csv", "criteria.csv", "resolved.txt"] {
        assert!(dir.join("out").join(name).exists(), "{name} missing");
    }
}

#[test]
fn compare_mismatched_config_exits_one() {
    // An integrator cap above the relaxation time biases the Z* variance
    // far off the other two processes, so the KS criteria must fail.
    let dir = scratch("comparefail");
    let body = r#"
seed = 42

[ensemble]
n_particles = 25
realizations = 2000
dt_max = 0.15

[time_grid]
kind = "explicit"
values = [0.0, 1.0, 2.0]

[tau_population]
kind = "delta"
location = 0.1

[sigma_population]
kind = "delta"
location = 1.0

[equivalence]
times = [1.0, 2.0]
"#;
    let cfg = write_config(&dir, "broken.cfg", body);
    let out = bin()
        .args([
            "compare",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn kernel_gaussian_reduction_and_normalization() {
    let dir = scratch("kernel");
    let path = dir.join("kernel.csv");
    let out = bin()
        .args([
            "kernel",
            "--beta",
            "1.0",
            "--H",
            "0.5",
            "--t",
            "1.0",
            "--zmin",
            "-8",
            "--zmax",
            "8",
            "--points",
            "401",
            "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let mut ggbm = Vec::new();
    let mut zvals = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[3] == "ggbm" {
            zvals.push(cols[0].parse::<f64>().unwrap());
            ggbm.push(cols[2].parse::<f64>().unwrap());
        }
    }
    assert_eq!(ggbm.len(), 401);
    // Gaussian column: e^{-z^2/4} / (2 sqrt(pi)).
    let mut worst = 0.0f64;
    for (z, d) in zvals.iter().zip(&ggbm) {
        let expected = (-z * z / 4.0).exp() / (2.0 * std::f64::consts::PI.sqrt());
        worst = worst.max((d - expected).abs());
    }
    assert!(worst < 1e-10, "max abs deviation {worst}");
    // Trapezoid normalization within 1e-4.
    let dz = zvals[1] - zvals[0];
    let mut mass = 0.0;
    for i in 0..ggbm.len() - 1 {
        mass += 0.5 * (ggbm[i] + ggbm[i + 1]) * dz;
    }
    assert!((mass - 1.0).abs() < 1e-4, "trapezoid mass {mass}");
}

#[test]
fn kernel_invalid_range_exits_two() {
    let out = bin()
        .args(["kernel", "--beta", "0.5", "--H", "0.5", "--zmin", "2", "--zmax", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn correlate_delta_population_matches_exponential_form() {
    let dir = scratch("correlate");
    let body = r#"
seed = 42

[ensemble]
n_particles = 10
realizations = 30000
dt_max = 10.0

[time_grid]
kind = "explicit"
values = [0.0, 0.5, 1.0, 1.5]

[tau_population]
kind = "delta"
location = 1.0

[sigma_population]
kind = "delta"
location = 1.0

[correlation]
pairs = [[0.5, 0.5], [0.5, 1.5], [1.0, 1.0]]
"#;
    let cfg = write_config(&dir, "corr.cfg", body);
    let out_dir = dir.join("out");
    let out = bin()
        .args([
            "correlate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("correlation.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,s,empirical,std_error,quadrature,rel_error"
    );
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let rel: f64 = cols[5].parse().unwrap();
        assert!(rel < 0.05, "relative error {rel} in row {line}");
    }
}

#[test]
fn correlate_empty_pairs_exits_two() {
    let dir = scratch("corrempty");
    let cfg = write_config(&dir, "tiny.cfg", TINY_DELTA_CONFIG);
    let out = bin()
        .args([
            "correlate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
