use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mimome"));
    c.env_remove("MIMOME_THREADS");
    c
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn real_matrix(rows: usize, cols: usize, v: &[f64]) -> String {
    let data: Vec<String> = v.iter().map(|x| format!("[{x:?}, 0.0]")).collect();
    format!("{{\"rows\": {rows}, \"cols\": {cols}, \"data\": [{}]}}", data.join(", "))
}

fn run(args: &[&str]) -> (Output, Value) {
    let out = bin().args(args).arg("--json").output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out, v)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn f(v: &Value, k: &str) -> f64 {
    v["results"][k].as_f64().unwrap_or_else(|| panic!("{k} missing in {v}"))
}

#[test]
fn scalar_capacity() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(1, 1, &[2.0]));
    let he = write(d.path(), "he.json", &real_matrix(1, 1, &[1.0]));
    let (out, v) = run(&["capacity", "--hr", s(&hr), "--he", s(&he), "--power", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let exact = (5.0f64 / 2.0).log2();
    assert!((f(&v, "capacity_bits") - exact).abs() < 1e-5);
    assert!((f(&v, "capacity_bits") - 1.32193).abs() < 1e-5);
    assert!(f(&v, "gap_bits") <= v["tolerances"]["conv_abs"].as_f64().unwrap());
    assert!(v["results"]["degraded_resid"].is_number());
    assert_eq!(v["status"], "ok");
}

#[test]
fn equal_channels_have_zero_capacity() {
    let d = TempDir::new().unwrap();
    let m = real_matrix(2, 2, &[1.0, 0.5, -0.3, 2.0]);
    let hr = write(d.path(), "hr.json", &m);
    let he = write(d.path(), "he.json", &m);
    let (out, v) = run(&["capacity", "--hr", s(&hr), "--he", s(&he), "--power", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(f(&v, "capacity_bits"), 0.0);
    assert_eq!(v["results"]["zero_cap"], true);
}

#[test]
fn report_echoes_inputs_and_tolerances() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(1, 1, &[2.0]));
    let he = write(d.path(), "he.csv", "1+0i\n");
    let out_dir = d.path().join("out");
    let (out, v) = run(&[
        "capacity", "--hr", s(&hr), "--he", s(&he), "--power", "1",
        "--tol-conv", "1e-6", "--tol-rank", "1e-9", "--seed", "5",
        "--out", s(&out_dir), "--emit-covariances",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["tolerances"]["conv_abs"], 1e-6);
    assert_eq!(v["tolerances"]["rank_rel"], 1e-9);
    assert!(v["tolerances"]["psd_margin"].is_number());
    assert_eq!(v["seed"], 5);
    assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["units"]["rates"], "bits");
    let inputs = v["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
    assert_ne!(inputs[0]["sha256"], inputs[1]["sha256"]);
    assert!(v["command"].as_array().unwrap().iter().any(|a| a == "capacity"));

    let written: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(written["results"], v["results"]);
    for name in ["k.json", "phi.json", "theta.json"] {
        let m: Value = serde_json::from_str(&fs::read_to_string(out_dir.join(name)).unwrap()).unwrap();
        assert_eq!(m["rows"], 1, "{name}");
    }
}

#[test]
fn emitted_covariance_reads_back() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(2, 2, &[3.0, 0.2, 0.1, 1.0]));
    let he = write(d.path(), "he.json", &real_matrix(2, 2, &[1.0, 0.0, 0.5, 0.7]));
    let out_dir = d.path().join("o");
    let (out, v) = run(&[
        "capacity", "--hr", s(&hr), "--he", s(&he), "--power", "4", "--out", s(&out_dir), "--emit-covariances",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let k = out_dir.join("k.json");
    let (_, v2) = run(&["capacity", "--hr", s(&k), "--he", s(&k), "--power", "1"]);
    assert_eq!(f(&v2, "capacity_bits"), 0.0);
    let km: Value = serde_json::from_str(&fs::read_to_string(&k).unwrap()).unwrap();
    let tr: f64 = [0, 3].iter().map(|&i| km["data"][i][0].as_f64().unwrap()).sum();
    assert!(tr <= 4.0 * (1.0 + 1e-9));
    assert!(f(&v, "capacity_bits") > 0.0);
}

#[test]
fn covariances_need_an_output_dir() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(1, 1, &[2.0]));
    let out = bin()
        .args(["capacity", "--hr", s(&hr), "--he", s(&hr), "--power", "1", "--emit-covariances"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unconverged_solve_exits_nonzero_with_report() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(2, 2, &[3.0, 0.2, 0.1, 1.0]));
    let he = write(d.path(), "he.json", &real_matrix(2, 2, &[1.0, 0.0, 0.5, 0.7]));
    let out_dir = d.path().join("o");
    let (out, v) = run(&[
        "capacity", "--hr", s(&hr), "--he", s(&he), "--power", "4", "--max-outer", "0", "--out", s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(v["status"], "not_converged");
    assert!(out_dir.join("report.json").exists());
    assert!(f(&v, "gap_bits") > 1e-5);
    assert!(f(&v, "capacity_bits") > 0.0);
}

#[test]
fn malformed_json_reports_line_and_column() {
    let d = TempDir::new().unwrap();
    let bad = write(d.path(), "bad.json", "{\"rows\": 1,\n \"cols\": 1,\n \"data\": [[1.0 0.0]]}");
    let out = bin().args(["capacity", "--hr", s(&bad), "--he", s(&bad), "--power", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3, column"), "{err}");
}

#[test]
fn malformed_csv_reports_line_and_column() {
    let d = TempDir::new().unwrap();
    let bad = write(d.path(), "bad.csv", "1,2\n3,4x\n");
    let out = bin().args(["gsvd", "--hr", s(&bad), "--he", s(&bad)]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2, column 2"), "{err}");
}

#[test]
fn dimension_mismatch_is_an_error() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(1, 2, &[1.0, 2.0]));
    let he = write(d.path(), "he.json", &real_matrix(1, 3, &[1.0, 2.0, 3.0]));
    let (out, v) = run(&["high-snr", "--hr", s(&hr), "--he", s(&he), "--power", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(v["status"], "error");
    assert!(v["error"].as_str().unwrap().contains("dimension mismatch"));
}

#[test]
fn gsvd_of_identity_pair() {
    let d = TempDir::new().unwrap();
    let i = write(d.path(), "i.json", &real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let out_dir = d.path().join("g");
    let (out, v) = run(&["gsvd", "--hr", s(&i), "--he", s(&i), "--check", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let sigma: Vec<f64> = v["results"]["sigma"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(sigma.len(), 2);
    assert!(sigma.iter().all(|s| (s - 1.0).abs() < 1e-12));
    assert!(f(&v, "reconstruction_residual") <= 1e-12);
    assert_eq!(v["results"]["violations"].as_array().unwrap().len(), 0);
    for name in ["psi_r.json", "psi_e.json", "psi_t.json", "omega.json"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
}

#[test]
fn gsvd_dims_of_the_wide_example() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let he = write(d.path(), "he.json", &real_matrix(1, 2, &[1.0, 0.0]));
    let (out, v) = run(&["gsvd", "--hr", s(&hr), "--he", s(&he), "--check"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["results"]["dims"]["k"], 2);
    assert_eq!(v["results"]["dims"]["p"], 1);
    assert_eq!(v["results"]["dims"]["s"], 1);
    assert!(v["results"]["sigma_max"].is_null());
}

#[test]
fn gsvd_check_fails_on_impossible_tolerance() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(2, 2, &[0.3, 1.7, -0.4, 0.9]));
    let he = write(d.path(), "he.json", &real_matrix(2, 2, &[1.1, 0.2, 0.6, -0.8]));
    let (out, v) = run(&["gsvd", "--hr", s(&hr), "--he", s(&he), "--check", "--check-tol", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(v["status"], "check_failed");
    assert!(!v["results"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn high_snr_and_masked_on_the_diagonal_pair() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.5]));
    let he = write(d.path(), "he.json", &real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let (out, v) = run(&["high-snr", "--hr", s(&hr), "--he", s(&he), "--power", "1e6"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((f(&v, "high_snr_bits") - 2.0).abs() < 1e-12);
    let (out, v) = run(&["masked", "--hr", s(&hr), "--he", s(&he), "--power", "1e9"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(f(&v, "masked_rate_bits").abs() < 1e-6);
    assert!((f(&v, "masked_high_snr_loss_bits") - 2.0).abs() < 1e-12);
    assert!(f(&v, "cross_check_delta_bits").abs() < 1e-9);
}

#[test]
fn masked_precondition_violation_exits() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
    let he = write(d.path(), "he.json", &real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let out = bin().args(["masked", "--hr", s(&hr), "--he", s(&he), "--power", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("precondition violated"));
}

#[test]
fn masked_sweep_writes_csv() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.5]));
    let he = write(d.path(), "he.json", &real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let out_dir = d.path().join("m");
    let (out, v) = run(&["masked", "--hr", s(&hr), "--he", s(&he), "--sweep", "P=1e2..1e6", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{v}");
    let body = fs::read_to_string(out_dir.join("masked_sweep.csv")).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "power_linear,capacity_bits,masked_rate_bits,high_snr_bits,capacity_gap_bits");
    assert_eq!(lines.len(), 6);
    let rows: Vec<Vec<f64>> =
        lines[1..].iter().map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    for r in &rows {
        assert!(r[2] <= r[1] + 1e-5, "masked rate above capacity: {r:?}");
    }
    assert!((rows[4][1] - 2.0).abs() < 1e-3);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1] - 1e-6));
}

#[test]
fn frontier_csv_and_svg() {
    let d = TempDir::new().unwrap();
    let (out, _) = run(&["scaling", "frontier", "--points", "100", "--svg", "--out", s(d.path())]);
    assert_eq!(out.status.code(), Some(0));
    let body = fs::read_to_string(d.path().join("frontier.csv")).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], "beta_nt_per_ne,gamma_nr_per_ne");
    let parse = |l: &str| -> (f64, f64) {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        (v[0], v[1])
    };
    assert_eq!(parse(lines[1]), (0.0, 1.0));
    assert_eq!(parse(lines[100]), (0.5, 0.0));
    let svg = fs::read_to_string(d.path().join("frontier.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn frontier_to_stdout_without_out_dir() {
    let out = bin().args(["scaling", "frontier", "--points", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("beta_nt_per_ne,gamma_nr_per_ne\n0,1.00000000\n"), "{text}");
}

#[test]
fn allocation_optimum_and_curve() {
    let d = TempDir::new().unwrap();
    let (out, v) = run(&["scaling", "allocation", "--out", s(d.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!((f(&v, "beta") - 2.0 / 9.0).abs() < 1e-9);
    assert!((f(&v, "gamma") - 1.0 / 9.0).abs() < 1e-9);
    assert!((f(&v, "ratio_at_two_thirds") - 3.0).abs() < 1e-9);
    assert!((f(&v, "ratio_at_half") - 2.9142).abs() < 1e-4);
    assert!((f(&v, "curve_peak_tx_fraction") - 2.0 / 3.0).abs() < 1e-2);
    assert!((f(&v, "curve_peak_ratio") - 3.0).abs() < 1e-4);
    let body = fs::read_to_string(d.path().join("allocation.csv")).unwrap();
    assert_eq!(body.lines().next(), Some("tx_fraction_nt_per_total,min_ne_per_total"));
    assert_eq!(body.lines().count(), 300);
}

#[test]
fn monte_carlo_is_deterministic_across_thread_counts() {
    let args = ["scaling", "mc", "--nt", "6", "--nr", "6", "--ne", "24", "--trials", "20", "--seed", "7"];
    let (o1, a) = run(&args);
    let out = Command::new(env!("CARGO_BIN_EXE_mimome"))
        .args(args)
        .arg("--json")
        .env("MIMOME_THREADS", "1")
        .output()
        .unwrap();
    let b: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(b["threads"], 1);
    assert!(a["results"]["empirical_sigma_max_mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn scaling_domain_errors() {
    let out = bin().args(["scaling", "mc", "--nt", "0", "--nr", "1", "--ne", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain error"));
}

#[test]
fn verify_reports_residuals() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(2, 2, &[3.0, 0.2, 0.1, 1.0]));
    let he = write(d.path(), "he.json", &real_matrix(2, 2, &[1.0, 0.0, 0.5, 0.7]));
    let (out, v) = run(&["verify", "--hr", s(&hr), "--he", s(&he), "--power", "4", "--probes", "64", "--tol-conv", "1e-9"]);
    assert_eq!(out.status.code(), Some(0), "{v}");
    assert!(f(&v, "saddle_resid_bits") <= 1e-6);
    assert!(f(&v, "degraded_resid") < 1e-3);
    assert_eq!(v["results"]["probes"], 64);
}

#[test]
fn text_output_uses_nine_digits() {
    let d = TempDir::new().unwrap();
    let hr = write(d.path(), "hr.json", &real_matrix(1, 1, &[2.0]));
    let he = write(d.path(), "he.json", &real_matrix(1, 1, &[1.0]));
    let out = bin().args(["high-snr", "--hr", s(&hr), "--he", s(&he), "--power", "1"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("high_snr_bits: 2.00000000\n"), "{text}");
}
