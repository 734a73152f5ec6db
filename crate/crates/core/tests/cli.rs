use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_robust-mca");

const CONSTANT_SEVEN: &str = r#"{
    "band": {
        "b_lower": {"family": "zero"},
        "b_upper": {"family": "zero"},
        "a_lower": {"family": "clamp", "lo": 1.0, "hi": 30.0},
        "a_upper": {"family": "power_clamp", "lo": 1.0, "hi": 30.0, "p": 2.0},
        "bound_c": 900.0
    },
    "payoff": {"g": {"family": "zero"}, "l": {"family": "constant", "value": 7.0}, "T": 1.0},
    "x0": 1.0,
    "grid": {"x_min": 0.0, "x_max": 5.0, "n_points": 501},
    "steps": 40
}"#;

const SMALL_SIM: &str = r#"
x0 = 1.0
steps = 50
n_list = [4, 8, 16]
lambda_points = 9
seed = 11
n_paths = 3000

[band]
bound_c = 900.0
b_lower = { family = "zero" }
b_upper = { family = "zero" }
a_lower = { family = "clamp", lo = 1.0, hi = 30.0 }
a_upper = { family = "power_clamp", lo = 1.0, hi = 30.0, p = 2.0 }

[payoff]
T = 1.0
g = { family = "zero" }
l = { family = "cutoff_call", strike = 0.5, cap = 20.0 }

[grid]
x_min = 0.0
x_max = 5.0
n_points = 201
compute_domain = [-8.0, 20.0]

[[controls]]
rule = "greedy"

[[controls]]
rule = "randomized_uniform"
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn constant_payoff_prints_seven() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CONSTANT_SEVEN);
    let out_dir = dir.path().join("out");
    let out = run(&["price", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "7\n");
    let price = fs::read_to_string(out_dir.join("price.csv")).unwrap();
    assert_eq!(price, "x0,h,N,price,lambda_points\n1,0.025,40,7,33\n");
    let curve = fs::read_to_string(out_dir.join("value_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 502);
    assert!(curve.lines().skip(1).all(|l| l.ends_with(",7")));
}

#[test]
fn missing_field_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONSTANT_SEVEN.replace(
        r#""a_upper": {"family": "power_clamp", "lo": 1.0, "hi": 30.0, "p": 2.0},"#,
        "",
    );
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = run(&["price", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("band.a_upper"));
}

#[test]
fn bad_arguments_exit_with_config_code() {
    assert_eq!(run(&["price"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CONSTANT_SEVEN);
    assert_eq!(run(&["price", "--config", &cfg, "--threads", "0"]).status.code(), Some(2));
    assert_eq!(run(&["price", "--config", "/nonexistent/c.json"]).status.code(), Some(1));
}

#[test]
fn invalid_kernel_exits_with_contract_code() {
    let dir = tempfile::tempdir().unwrap();
    // C = 900 leaves no admissible step for the martingale kernel
    let text = CONSTANT_SEVEN.replace(r#""x0": 1.0,"#, r#""x0": 1.0, "kernel": "martingale_binomial","#);
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = run(&["price", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("h_max"));
}

#[test]
fn simulate_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMALL_SIM);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "2", "1"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = run(&["simulate", "--config", &cfg, "--threads", threads, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let files: Vec<Vec<u8>> =
            ["path.csv", "mc_summary.csv"].iter().map(|f| fs::read(out_dir.join(f)).unwrap()).collect();
        outputs.push((out.stdout, files));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let summary = String::from_utf8(outputs[0].1[1].clone()).unwrap();
    assert!(summary.starts_with("control,estimate,std_error,n_paths\nstate_lookup(50 steps),"));
    assert_eq!(String::from_utf8_lossy(&outputs[0].1[0]).lines().count(), 52);

    let other = dir.path().join("seeded");
    run(&["simulate", "--config", &cfg, "--seed", "12", "--out", other.to_str().unwrap()]);
    assert_ne!(fs::read(other.join("path.csv")).unwrap(), outputs[0].1[0]);
}

#[test]
fn verify_kernel_reports_exact_crr_drift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("crr_verify.json");
    let out = run(&["verify-kernel", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "robust_crr: slope_a = 1.0000, slope_b = undefined\n");
    let csv = fs::read_to_string(dir.path().join("verify_kernel.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("h,sup_res_b,sup_res_a,eps,delta_h_eps"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        assert!(r[1] <= 1e-12, "drift residual {}", r[1]);
        // sup b^2 = 1
        assert!((r[2] - r[0]).abs() <= 1e-12 * r[0], "diffusion residual {} at h = {}", r[2], r[0]);
    }
}

#[test]
fn sweep_and_fig1_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMALL_SIM);
    let d = dir.path().to_str().unwrap();
    let out = run(&["sweep", "--config", &cfg, "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("h,N,price,diff,order\n0.25,4,"));
    assert_eq!(sweep.lines().count(), 4);

    let out = run(&["reproduce-fig1", "--config", &cfg, "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["value_curve_N4.csv", "value_curve_N8.csv", "value_curve_N16.csv", "fig1.svg", "fig1_gaps.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let gaps = fs::read_to_string(dir.path().join("fig1_gaps.csv")).unwrap();
    assert!(gaps.starts_with("N_from,N_to,sup_gap\n4,8,"));
    let svg = fs::read_to_string(dir.path().join("fig1.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn sample_configs_load() {
    for name in ["cutoff_call.toml", "uncertain_vol_call.toml", "crr_verify.json"] {
        robust_mca::config::RunConfig::load(&configs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
