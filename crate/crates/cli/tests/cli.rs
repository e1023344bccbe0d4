use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn stripes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stripes")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stripes-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn critical_coupling() {
    let o = stripes(&["jc"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["jc"].as_f64().unwrap() - 1.6678650067130343).abs() < 1e-11);
}

#[test]
fn energy_curve_and_optimal_width() {
    let o = stripes(&["es", "--tau", "-0.03", "--hmax", "20"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 21);
    let summary: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(summary["h_star"], 9);
    assert_eq!(summary["tie"], false);
}

#[test]
fn stripe_family_energy() {
    let o = stripes(&["einf", "--seq", "3,4,5"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["widths"], serde_json::json!([3, 5]));
    assert!(v["e_inf"].as_f64().unwrap().is_finite());
}

#[test]
fn usage_and_domain_errors_exit_2() {
    assert_eq!(stripes(&["einf", "--seq", "3,4"]).status.code(), Some(2));
    assert_eq!(stripes(&["jc", "--p", "1"]).status.code(), Some(2));
    assert_eq!(stripes(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(stripes(&["scan", "--what", "hstar", "--tau-grid", "-0.1:0.1:3"]).status.code(), Some(2));
}

#[test]
fn suites_pass_and_violations_exit_1() {
    let o = stripes(&["verify", "--suite", "selfenergy", "--count", "5", "--seed", "3"]);
    assert!(o.status.success());
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|r| r["ok"] == true));
    // a negative good-region constant cannot hold
    let o = stripes(&["verify", "--suite", "lemma22", "--count", "1", "--constant", "-10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("\"verdict\":\"violated\""));
}

#[test]
fn ring_ground_state() {
    let o = stripes(&["bruteforce", "--dims", "12", "--tau", "-0.03"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["enumerated"], 2048);
    assert_eq!(v["minimizers"][0]["pattern"]["stripes"]["width"], 6);
}

#[test]
fn decomposition_with_svg_and_manifest() {
    let cfg = scratch("bar.txt");
    let mut rows = String::from("# boundary plus\n");
    for y in 0..12 {
        let row: String = (0..12).map(|x| if (3..6).contains(&x) && y > 1 && y < 10 { '-' } else { '+' }).collect();
        rows.push_str(&row);
        rows.push('\n');
    }
    std::fs::write(&cfg, rows).unwrap();
    let (svg, manifest) = (scratch("bar.svg"), scratch("manifest.json"));
    let o = Command::new(env!("CARGO_BIN_EXE_stripes"))
        .env("STRIPES_THREADS", "1")
        .args(["--manifest", manifest.to_str().unwrap(), "decompose", "--config", cfg.to_str().unwrap(), "--ell", "6", "--svg", svg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["N_c"], 4);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["threads"], 1);
    assert_eq!(m["outputs"][0], svg.to_str().unwrap());
}

#[test]
fn width_scan() {
    let o = stripes(&["scan", "--what", "hstar", "--tau-grid", "-0.03:-0.01:2"]);
    assert!(o.status.success());
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    assert_eq!(rows, ["9", "15"]);
}

#[test]
fn coupling_window_scan() {
    let o = stripes(&["scan", "--what", "window", "--tau-grid", "-0.04:-0.02:2", "--count", "4", "--seed", "7"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!((v["epsilon"].as_f64().unwrap() - 0.02).abs() < 1e-12);
}
