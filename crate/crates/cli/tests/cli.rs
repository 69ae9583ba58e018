//! End-to-end runs of the `hrru` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hrru_cli::parse_config;

const SIMULATE: &str = r#"
[experiment]
kind = "simulate"

[plan]
n = 50
seed = 11

[urns.main]
a = 3
b = 2
k = 3
draw = { kind = "iid-uniform", h = 3 }
reinforcement = { kind = "finite-discrete", values = [1, 3], probabilities = [0.25, 0.75] }
"#;

const COVERAGE: &str = r#"
[experiment]
kind = "coverage"
confidence = 0.9

[plan]
reps = 40
n = 100
n_proxy = 1000
seed = 5

[urns.main]
a = 10
b = 10
k = 4
draw = { kind = "iid-uniform", h = 4 }
reinforcement = { kind = "uniform-range", lo = 1, hi = 3 }

[output]
tables = "tsv"
"#;

fn hrru(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrru"))
        .args(args)
        .env_remove("HRRU_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.in.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_self_describing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SIMULATE);
    let out = dir.path().join("out");
    let status = hrru(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let table = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("# hrru ") && lines[0].ends_with("kind=simulate seed=11"));
    assert_eq!(lines[1], "n,N,X,R,H,S,Z,M");
    assert_eq!(lines.len(), 2 + 50);
    let last: Vec<&str> = lines[51].split(',').collect();
    assert_eq!(last[0], "50");
    let (h, s): (u64, u64) = (last[4].parse().unwrap(), last[5].parse().unwrap());
    let z: f64 = last[6].parse().unwrap();
    assert_eq!(z, h as f64 / s as f64);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "hrru-report/1");
    assert_eq!(report["seed"], 11);
    assert_eq!(report["kind"], "simulate");
    assert_eq!(report["config"]["urns"]["main"]["a"], 3);
    assert_eq!(report["results"]["urns"]["main"]["snapshot"]["s"], s);
    assert_eq!(report["results"]["urns"]["main"]["intervals"].as_array().unwrap().len(), 2);
}

#[test]
fn echo_reproduces_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), COVERAGE);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert!(hrru(&["run", "-c", &config, "-o", first.to_str().unwrap(), "--seed", "99"]).status.success());

    let echo = first.join("config.toml");
    let echoed = parse_config(&fs::read_to_string(&echo).unwrap()).unwrap();
    assert_eq!(echoed.plan.seed, 99);
    assert!(hrru(&["coverage", "-c", echo.to_str().unwrap(), "-o", second.to_str().unwrap(), "--workers", "2"])
        .status
        .success());
    for name in ["config.toml", "report.json", "intervals.tsv"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SIMULATE.replace("k = 3", "k = 9").replace("h = 3", "h = 0");
    let config = write_config(dir.path(), &bad);
    let out = hrru(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("urns.main.k"), "{stderr}");
    assert!(stderr.contains("urns.main.draw"), "{stderr}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn syntax_errors_report_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SIMULATE.replace("iid-uniform", "iid-normal"));
    let out = hrru(&["validate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 13"), "{stderr}");
    assert!(stderr.contains("absorbing-random-walk"), "{stderr}");
}

#[test]
fn kind_mismatch_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SIMULATE);
    let out = hrru(&["clt", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_reports_path() {
    let out = hrru(&["run", "--config", "/nonexistent/hrru.toml"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/hrru.toml"));
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), COVERAGE);
    let out = hrru(&["validate", "--config", &config]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid coverage experiment"));
}

#[test]
fn shipped_sample_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            let config = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(parse_config(&config.to_toml()).unwrap(), config);
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
