use std::f64::consts::PI;
use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rf-franson"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        run(&["--p1", "0.1", "--nbar", "0.1", "peaks"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["--p1", "1.5", "peaks"]).status.code(), Some(1));
    // delays off the grid
    assert_eq!(run(&["--tau-p", "2.5e-9", "peaks"]).status.code(), Some(1));
    assert_eq!(run(&["validate"]).status.code(), Some(0));
}

#[test]
fn csv_shape_and_line_endings() {
    let text = stdout(&["peaks"]);
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    let rows = csv_rows(&text);
    assert_eq!(rows[0], ["delay_bins", "delay_s", "peak", "class"]);
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[4][2], "CENTER");
    assert_eq!(rows[4][1], "0.000000000000e+00");

    let nine = csv_rows(&stdout(&["--tau-p", "3.21e-9", "peaks"]));
    assert_eq!(nine.len(), 10);
}

#[test]
fn scan_center_column_follows_sum_phase_fringe() {
    let p1: f64 = 0.05;
    let text = stdout(&["--p1", "0.05", "--phi-b-pi", "0", "scan"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 65);
    assert_eq!(rows[0].len(), 8);
    let center = rows[0].iter().position(|c| c == "dt_0").unwrap();
    for row in &rows[1..] {
        let phi: f64 = row[0].parse().unwrap();
        let c: f64 = row[center].parse().unwrap();
        // with φ_B = 0 both the sum and the difference phase equal φ_A
        let expected =
            p1 * p1 / 128.0 * (1.0 + p1 * p1 + (p1 * p1 + (1.0 - p1).powi(2)) * phi.cos());
        assert!(
            (c - expected).abs() <= 1e-11 * expected.abs().max(1e-9),
            "{c} vs {expected}"
        );
    }
}

#[test]
fn coincidence_routes_agree() {
    let rows = csv_rows(&stdout(&[
        "--p1",
        "0.2",
        "--phi-a-pi",
        "0.3",
        "--phi-b-pi",
        "1.1",
        "coincidence",
        "--dt",
        "-2.14e-9",
    ]));
    let col = |name: &str| rows[0].iter().position(|c| c == name).unwrap();
    let op: f64 = rows[1][col("operator")].parse().unwrap();
    let fwd: f64 = rows[1][col("forward")].parse().unwrap();
    let closed: f64 = rows[1][col("closed_form")].parse().unwrap();
    assert!((op - fwd).abs() < 1e-15);
    assert!((op - closed).abs() < 1e-12 * op);
    let expected =
        0.04 / 512.0 * (1.0 + 0.4 + 0.16 + 0.04 * (-0.8 * PI).cos() + 0.64 * (1.4 * PI).cos());
    assert!((op - expected).abs() < 1e-12 * expected);
}

#[test]
fn power_scan_reports_crossings() {
    let out = run(&["--format", "json", "power-scan", "--points", "5"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let center = doc["crossing_center_nbar"].as_f64().unwrap();
    let tau_p = doc["crossing_tau_p_nbar"].as_f64().unwrap();
    assert!((center - 0.077).abs() < 0.005);
    assert!((tau_p - 0.032).abs() < 0.008);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("CENTER"));
}

#[test]
fn json_round_trips_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["chsh", "hbt", "validate", "peaks", "coincidence"] {
        let path = dir.path().join(format!("{cmd}.json"));
        let p = path.to_str().unwrap();
        stdout(&["--format", "json", "--out", p, cmd]);
        let text = fs::read_to_string(&path).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        let mut again = serde_json::to_string_pretty(&back).unwrap();
        again.push('\n');
        assert_eq!(again, text, "{cmd}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("scan{k}.csv"));
        stdout(&[
            "--p1",
            "0.1",
            "--out",
            path.to_str().unwrap(),
            "scan",
            "--points",
            "16",
        ]);
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"p1": 0.3, "phi_p_pi": 1.0, "format": "json"}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let doc: Value = serde_json::from_str(&stdout(&["--config", c, "hbt"])).unwrap();
    let row = &doc["rows"][0];
    assert_eq!(row[0].as_f64().unwrap(), 0.3);
    // g²(0) = 1/p1²
    assert!((row[2].as_f64().unwrap() - 1.0 / 0.09).abs() < 1e-9);

    let csv = stdout(&["--config", c, "--format", "csv", "--p1", "0.1", "hbt"]);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("1.000000000000e-01,"));

    fs::write(&cfg, r#"{"p1": 0.3, "typo_key": 1}"#).unwrap();
    assert_eq!(run(&["--config", c, "peaks"]).status.code(), Some(1));
}

#[test]
fn histogram_rejects_wide_peaks() {
    assert_eq!(run(&["--t2", "2e-9", "histogram"]).status.code(), Some(1));
    let rows = csv_rows(&stdout(&["histogram"]));
    assert_eq!(rows[0], ["delta_t_s", "probability"]);
    assert!(rows.len() > 2000);
}
