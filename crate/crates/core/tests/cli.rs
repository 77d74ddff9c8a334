//! End-to-end checks of the `smac` binary: every subcommand is exercised
//! through a real process spawn, including exit codes and output files.

use std::path::Path;
use std::process::{Command, Output};

fn smac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smac"))
        .args(args)
        .output()
        .expect("spawning the smac binary failed")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is not UTF-8")
}

fn scenario_config() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/fig1.toml")
}

#[test]
fn closed_form_reports_the_homogeneous_solution() {
    let out = smac(&[
        "closed-form",
        scenario_config(),
        "--diss",
        "287066874.9999999",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(
        text.contains("regime = mixture"),
        "expected the mixture regime, got:\n{text}"
    );
    let t_line = text
        .lines()
        .find(|l| l.starts_with("T_plus = "))
        .expect("missing T_plus line");
    let t_plus: f64 = t_line["T_plus = ".len()..].trim().parse().expect("T_plus parse");
    assert!(
        (t_plus - 345.228125).abs() < 1e-9,
        "midpoint temperature {t_plus} should be 345.228125"
    );
}

#[test]
fn sweep_prints_a_monotone_csv_table() {
    let out = smac(&[
        "sweep",
        scenario_config(),
        "--diss-min",
        "0",
        "--diss-max",
        "6e8",
        "--samples",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("diss,T_plus,beta3_plus,regime"));
    let mut temperatures = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4, "malformed sweep row: {line}");
        temperatures.push(fields[1].parse::<f64>().expect("T_plus parse"));
        assert!(
            matches!(fields[3], "no-transformation" | "mixture" | "full-austenite"),
            "unknown regime label {} in row {line}",
            fields[3]
        );
    }
    assert_eq!(temperatures.len(), 50, "expected 50 rows, got {}", temperatures.len());
    for pair in temperatures.windows(2) {
        assert!(
            pair[1] > pair[0],
            "temperature fell from {} to {} along the sweep",
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn project_prints_the_triangle_projection() {
    let out = smac(&["project", "2", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let inner = text
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or_else(|| panic!("unexpected project output: {text}"));
    let coords: Vec<f64> = inner
        .split(',')
        .map(|s| s.trim().parse().expect("coordinate parse"))
        .collect();
    assert_eq!(coords.len(), 2);
    assert!(
        (coords[0] - 0.5).abs() < 1e-15 && (coords[1] - 0.5).abs() < 1e-15,
        "projection of (2, 2) gave ({}, {}), expected the hypotenuse midpoint (0.5, 0.5)",
        coords[0],
        coords[1]
    );
}

#[test]
fn collide_writes_the_three_output_files() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config_path = dir.path().join("small.toml");
    std::fs::write(
        &config_path,
        "[mesh]\nnx = 6\nny = 6\n\n[solver]\nfp_max_iter = 120\n",
    )
    .expect("write config");
    let out_dir = dir.path().join("results");
    let out = smac(&[
        "collide",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--prescribed-diss",
        "2.8e8",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(
        stdout(&out).contains("converged = true"),
        "summary line missing convergence flag:\n{}",
        stdout(&out)
    );

    let csv = std::fs::read_to_string(out_dir.join("fields.csv")).expect("fields.csv");
    let mut csv_lines = csv.lines();
    assert_eq!(
        csv_lines.next(),
        Some("x,y,Ux,Uy,T_plus,beta1,beta2,beta3,diss")
    );
    assert_eq!(csv_lines.count(), 49, "one CSV row per node of the 6x6 mesh");

    let vtk = std::fs::read_to_string(out_dir.join("fields.vtk")).expect("fields.vtk");
    assert!(vtk.starts_with("# vtk DataFile"), "unexpected VTK header");

    let diag: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("diagnostics.json")).expect("diagnostics.json"),
    )
    .expect("diagnostics JSON parse");
    assert_eq!(diag["fixed_point"]["converged"], serde_json::Value::Bool(true));
    assert!(
        diag["summary"]["dissipated_total"].as_f64().unwrap() > 0.0,
        "dissipated work should be positive, got {}",
        diag["summary"]["dissipated_total"]
    );
}

#[test]
fn mms_reports_second_order_rates() {
    let out = smac(&["mms", "--levels", "2"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(
        text.lines().next() == Some("n,velocity_L2,thermal_L2"),
        "unexpected report header:\n{text}"
    );
    let rate_line = text
        .lines()
        .find(|l| l.starts_with("rate 8->16:"))
        .expect("missing rate line for the 8->16 refinement");
    let rates: Vec<f64> = rate_line
        .split(|c: char| !c.is_ascii_digit() && c != '.' && c != '-')
        .filter(|s| s.contains('.'))
        .map(|s| s.parse().expect("rate parse"))
        .collect();
    assert!(
        rates.len() == 2 && rates.iter().all(|r| *r > 1.8),
        "both refinement rates should be second order, line was: {rate_line}"
    );
}

#[test]
fn missing_config_exits_2() {
    let out = smac(&["closed-form", "/no/such/config.toml", "--diss", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        !out.stderr.is_empty(),
        "a missing config should explain itself on stderr"
    );
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = smac(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_config_is_loadable() {
    assert!(
        Path::new(scenario_config()).is_file(),
        "bundled scenario config missing at {}",
        scenario_config()
    );
    let out = smac(&["closed-form", scenario_config(), "--diss", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("regime = no-transformation"),
        "zero work must leave the phase mixture untouched"
    );
}
