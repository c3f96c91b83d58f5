//! End-to-end checks of the command-line interface: exit codes, the JSON
//! error channel on stderr, and the artifact files each subcommand writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lpvsyn"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Fast single-parameter test configuration: second-kind multiplier only,
/// constant certificate bases, five grid points.
fn base_config() -> Value {
    json!({
        "plant": {
            "parameters": {
                "intervals": [[-1.0, 1.0]],
                "rate_intervals": [[-0.5, 0.5]]
            },
            "a_p": [
                { "exponents": [0], "coeff": [[0.0, 1.0], [-2.0, -3.0]] },
                { "exponents": [1], "coeff": [[0.0, 0.2], [0.0, 0.1]] }
            ],
            "a_d": [
                { "exponents": [0], "coeff": [[0.0, 0.1], [-0.2, -0.3]] },
                { "exponents": [1], "coeff": [[0.2, 0.0], [0.1, 0.0]] }
            ],
            "b_p1": [ { "exponents": [0], "coeff": [[0.2], [0.2]] } ],
            "b_p2": [
                { "exponents": [0], "coeff": [[0.0], [0.1]] },
                { "exponents": [1], "coeff": [[0.2], [0.1]] }
            ],
            "c_p1": [ { "exponents": [0], "coeff": [[0.0, 10.0], [0.0, 0.0]] } ],
            "c_d1": [ { "exponents": [0], "coeff": [[0.0, 0.0], [0.0, 0.0]] } ],
            "d_p11": [ { "exponents": [0], "coeff": [[0.0], [0.0]] } ],
            "d_p12": [ { "exponents": [0], "coeff": [[0.0], [0.1]] } ]
        },
        "delay": { "tau_bar": 2.0, "r": 1.2 },
        "multipliers": { "kinds": ["pi2"] },
        "synthesis": {
            "r_basis": [[0]],
            "x_basis": [[0]],
            "grid_counts": [5]
        },
        "scenarios": {
            "ok": {
                "rho": [{ "type": "sinusoid", "amplitude": 0.5, "omega": 0.5 }],
                "tau": { "type": "constant", "value": 1.0 },
                "d": [{ "type": "pulse", "amplitude": 1.0, "start": 0.0, "end": 1.0 }],
                "horizon": 10.0,
                "step": 0.01
            },
            "bad_tau": {
                "rho": [{ "type": "constant", "value": 0.0 }],
                "tau": { "type": "constant", "value": 3.0 },
                "d": [{ "type": "pulse", "amplitude": 1.0, "start": 0.0, "end": 1.0 }],
                "horizon": 10.0,
                "step": 0.01
            },
            "zero_d": {
                "rho": [{ "type": "constant", "value": 0.0 }],
                "tau": { "type": "constant", "value": 1.0 },
                "d": [{ "type": "constant", "value": 0.0 }],
                "horizon": 10.0,
                "step": 0.01
            }
        }
    })
}

fn write_config(dir: &Path, value: &Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn stderr_json(output: &Output) -> Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let line = text
        .lines()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

fn synthesize_into(dir: &Path, config: &Path) -> (PathBuf, f64) {
    let result = dir.join("result.json");
    let out = bin()
        .args(["synthesize", "--config"])
        .arg(config)
        .arg("--out")
        .arg(&result)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: Value = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    (result, parsed["gamma"].as_f64().unwrap())
}

#[test]
fn malformed_config_exits_one_with_json_stderr() {
    let dir = tmp_dir("malformed");
    let path = dir.join("config.json");
    fs::write(&path, "{ not json").unwrap();
    let out = bin().args(["synthesize", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "invalid_input");
}

#[test]
fn unknown_config_field_rejected() {
    let dir = tmp_dir("unknown_field");
    let mut cfg = base_config();
    cfg["unexpected"] = json!(1);
    let path = write_config(&dir, &cfg);
    let out = bin().args(["synthesize", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["kind"], "invalid_input");
}

#[test]
fn first_kind_multiplier_needs_slow_delay() {
    let dir = tmp_dir("pi1_fast");
    let mut cfg = base_config();
    cfg["multipliers"]["kinds"] = json!(["pi1"]);
    let path = write_config(&dir, &cfg);
    let out = bin().args(["synthesize", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert!(
        err["message"].as_str().unwrap().contains("pi1 requires r<1"),
        "message: {}",
        err["message"]
    );
}

#[test]
fn synthesize_analyze_roundtrip_and_infeasible_level() {
    let dir = tmp_dir("roundtrip");
    let config = write_config(&dir, &base_config());
    let (result, gamma) = synthesize_into(&dir, &config);
    assert!(gamma > 0.0);

    let cert = dir.join("cert.json");
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--gains")
        .arg(&result)
        .args(["--gamma", &format!("{}", gamma * 1.05)])
        .arg("--out")
        .arg(&cert)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    assert!(parsed["margin"].as_f64().unwrap() < 0.0);

    // No controller can certify below the synthesis optimum.
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--gains")
        .arg(&result)
        .args(["--gamma", &format!("{}", gamma * 0.5)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "infeasible");
}

#[test]
fn analyze_missing_gains_file_exits_one() {
    let dir = tmp_dir("missing_gains");
    let config = write_config(&dir, &base_config());
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .args(["--gains", "/nonexistent/gains.json", "--gamma", "2.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_trace_and_respects_certified_level() {
    let dir = tmp_dir("simulate_ok");
    let config = write_config(&dir, &base_config());
    let (result, gamma) = synthesize_into(&dir, &config);
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--gains")
        .arg(&result)
        .args(["--scenario", "ok", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("ok_trace.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,x_p0,x_p1,x_psi0"), "header: {header}");
    assert!(header.ends_with(",tau,rho0"), "header: {header}");
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("ok_summary.json")).unwrap()).unwrap();
    let ratio = summary["l2_ratio"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio <= gamma, "ratio {ratio} vs gamma {gamma}");
}

#[test]
fn simulate_rejects_delay_outside_class() {
    let dir = tmp_dir("simulate_bad_tau");
    let config = write_config(&dir, &base_config());
    let (result, _) = synthesize_into(&dir, &config);
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--gains")
        .arg(&result)
        .args(["--scenario", "bad_tau", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["kind"], "scenario_violation");
}

#[test]
fn simulate_rejects_zero_disturbance() {
    let dir = tmp_dir("simulate_zero_d");
    let config = write_config(&dir, &base_config());
    let (result, _) = synthesize_into(&dir, &config);
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--gains")
        .arg(&result)
        .args(["--scenario", "zero_d", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = stderr_json(&out);
    assert!(
        err["message"].as_str().unwrap().contains("zero disturbance"),
        "message: {}",
        err["message"]
    );
}

#[test]
fn unknown_scenario_exits_one() {
    let dir = tmp_dir("unknown_scenario");
    let config = write_config(&dir, &base_config());
    let (result, _) = synthesize_into(&dir, &config);
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--gains")
        .arg(&result)
        .args(["--scenario", "nope", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fixed_gamma_below_optimum_is_infeasible() {
    let dir = tmp_dir("fixed_low_gamma");
    let config = write_config(&dir, &base_config());
    let out = bin()
        .args(["synthesize", "--config"])
        .arg(&config)
        .args(["--gamma", "0.5"])
        .arg("--out")
        .arg(dir.join("result.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "infeasible");
}

#[test]
fn synthesis_output_is_deterministic() {
    let dir = tmp_dir("determinism");
    let config = write_config(&dir, &base_config());
    let (first, _) = synthesize_into(&dir, &config);
    let first_bytes = fs::read(&first).unwrap();
    let (second, _) = synthesize_into(&dir, &config);
    let second_bytes = fs::read(&second).unwrap();
    assert_eq!(first_bytes, second_bytes);
}

#[test]
fn validate_iqc_reports_pass() {
    let dir = tmp_dir("validate_iqc");
    let config = write_config(&dir, &base_config());
    let report = dir.join("iqc.json");
    let out = bin()
        .args(["validate-iqc", "--config"])
        .arg(&config)
        .args(["--seed", "7", "--trials", "2", "--out"])
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["pass"], true);
    assert_eq!(parsed["entries"].as_array().unwrap().len(), 1);
}
