use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sqm_smatrix::cli::report::RunReport;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sqm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqm"))
        .args(args)
        .output()
        .expect("run sqm")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Parses a CSV table into header and rows.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].clone()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn solve_json_round_trips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = sqm(&["solve", "--config", &config("isp_theta1.json"), "--output", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut ra = RunReport::from_json(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let mut rb = RunReport::from_json(&std::fs::read_to_string(&b).unwrap()).unwrap();
    assert!((ra.coefficients.r.norm() - (-std::f64::consts::PI).exp()).abs() < 1e-8);
    ra.timing.seconds = 0.0;
    rb.timing.seconds = 0.0;
    assert_eq!(ra, rb);
    assert!(ra.failing().is_empty(), "{:?}", ra.failing());
}

#[test]
fn solve_csv_round_trips_bit_for_bit() {
    let json = sqm(&["solve", "--config", &config("quartic.json")]);
    let csv = sqm(&["solve", "--config", &config("quartic.json"), "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0), "{}", stderr(&csv));
    let mut from_json = RunReport::from_json(&stdout(&json)).unwrap();
    let mut from_csv = RunReport::from_csv(&stdout(&csv)).unwrap();
    from_json.timing.seconds = 0.0;
    from_csv.timing.seconds = 0.0;
    assert_eq!(from_json.coefficients.r.re.to_bits(), from_csv.coefficients.r.re.to_bits());
    assert_eq!(from_json, from_csv);
}

#[test]
fn malformed_config_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"p": 2.0, "lambda": 1.25, "k": -1.0}"#).unwrap();
    let o = sqm(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains('k'), "{}", stderr(&o));

    std::fs::write(&path, r#"{"p": 2.0, "lambda": 1.25}"#).unwrap();
    let o = sqm(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k"), "{}", stderr(&o));

    let o = sqm(&["solve", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_on_good_configs() {
    for name in ["isp_theta1.json", "quartic.json", "barrier.json"] {
        let o = sqm(&["verify", "--config", &config(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
}

#[test]
fn verify_flags_a_sabotaged_run() {
    let o = sqm(&["verify", "--config", &config("sabotaged.json"), "--no-stabilize"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("Stabilization"), "{err}");
    assert!(err.contains("FAIL"), "{err}");
}

#[test]
fn omega_sweep_on_the_unit_circle() {
    let o = sqm(&["sweep", "--config", &config("isp_theta1.json"), "--axis", "omega", "--grid", "0:6.283185307179586:64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows.len(), 64);
    for v in column(&h, &rows, "abs_s") {
        assert!((num(&v) - 1.0).abs() < 1e-8);
    }
    assert!(column(&h, &rows, "sign_relation").iter().all(|s| s == "pass"));
}

#[test]
fn omega_zero_row_is_r_prime() {
    let cfg = config("quartic.json");
    let solved = RunReport::from_json(&stdout(&sqm(&["solve", "--config", &cfg]))).unwrap();
    let o = sqm(&["sweep", "--config", &cfg, "--axis", "omega", "--omega", "0,0", "--omega", "-0.5,0.25", "--omega", "inf"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows.len(), 3);
    let re = num(&column(&h, &rows, "re_s")[0]);
    let im = num(&column(&h, &rows, "im_s")[0]);
    let rp = solved.coefficients.r_prime;
    assert!((re - rp.re).abs() < 1e-12 && (im - rp.im).abs() < 1e-12);
    assert!(column(&h, &rows, "sign_relation").iter().all(|s| s == "pass"));
}

#[test]
fn theta_sweep_follows_the_closed_form() {
    let o = sqm(&["sweep", "--config", &config("isp_theta1.json"), "--axis", "theta", "--grid", "0.5:2:4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = table(&stdout(&o));
    let thetas = column(&h, &rows, "value");
    let abs_r = column(&h, &rows, "abs_r");
    assert_eq!(thetas.len(), 4);
    for (t, r) in thetas.iter().zip(&abs_r) {
        let expect = (-std::f64::consts::PI * num(t)).exp();
        assert!((num(r) - expect).abs() / expect < 1e-6, "Θ={t}: {r} vs {expect}");
    }
}

#[test]
fn sweep_without_grid_is_a_usage_error() {
    let o = sqm(&["sweep", "--config", &config("isp_theta1.json"), "--axis", "k"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reconstruct_matches_direct_evaluation() {
    let o = sqm(&["reconstruct", "--config", &config("quartic.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = table(&stdout(&o));
    assert_eq!(column(&h, &rows, "kind")[0], "uniform_average");
    assert!(num(&column(&h, &rows, "abs_difference")[0]) < 1e-10);
    for d in &column(&h, &rows, "abs_difference")[1..] {
        assert!(num(d) < 1e-8, "{d}");
    }
    assert!(column(&h, &rows, "valid").iter().all(|v| v == "true"));
}

#[test]
fn reconstruct_error_shrinks_with_nodes() {
    let cfg = config("isp_theta1.json");
    let worst = |nodes: &str| {
        let o = sqm(&["reconstruct", "--config", &cfg, "--nodes", nodes, "--omega", "0.9,0"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let (h, rows) = table(&stdout(&o));
        num(&column(&h, &rows, "abs_difference")[1])
    };
    let (e8, e16) = (worst("8"), worst("16"));
    assert!(e16 < e8, "8 nodes {e8:e}, 16 nodes {e16:e}");
}

#[test]
fn reconstruct_outside_the_disk_is_marked_invalid() {
    let o = sqm(&["reconstruct", "--config", &config("isp_theta1.json"), "--omega", "1.5,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = table(&stdout(&o));
    assert!(column(&h, &rows, "valid")[1].starts_with("false"));
}
