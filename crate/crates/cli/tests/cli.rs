use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn marketabm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marketabm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
model = "gcmg"
steps = 500
seed = 4
output_dir = "small"

[params]
n_spec = 20
n_prod = 20
P = 8
epsilon = 0.01
lambda_depth = 10.0

[sweep]
param = "n_spec"
values = [0, 20]
"#;

#[test]
fn list_and_show_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = marketabm(&["list-presets"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().any(|l| l.starts_with("thurner-leverage-scan")));

    let out = marketabm(&["preset", "fig2", "--show"], tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("values = [50, 500, 5000]"));
}

#[test]
fn run_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("small.toml"), SMALL).unwrap();
    let out = marketabm(&["run", "small.toml", "--serial"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert_eq!(summary, fs::read_to_string(tmp.path().join("small/summary.csv")).unwrap());
    for f in ["manifest.json", "00_n_spec=0/ticks.csv", "01_n_spec=20/report.json"] {
        assert!(tmp.path().join("small").join(f).exists(), "{f}");
    }

    let out = marketabm(&["run", "small.toml", "--out", "other"], tmp.path());
    assert!(out.status.success());
    assert_eq!(
        fs::read(tmp.path().join("small/01_n_spec=20/ticks.csv")).unwrap(),
        fs::read(tmp.path().join("other/01_n_spec=20/ticks.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("typo.toml"), SMALL.replace("epsilon", "epsilom")).unwrap();
    let out = marketabm(&["run", "typo.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("epsilom") && err.contains("line 11"), "{err}");

    assert_eq!(marketabm(&["run", "missing.toml"], tmp.path()).status.code(), Some(2));
    assert_eq!(marketabm(&["preset", "fig9"], tmp.path()).status.code(), Some(2));
}

#[test]
fn run_abort_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let exploding = r#"
model = "fc_minimal"
steps = 1000
[params]
N = 100
K = 0.1
gamma = 20.0
b = 1.0
M = 2
p_f = 100.0
sigma = 1.0
B = 0.1
x0 = 1.0
"#;
    fs::write(tmp.path().join("boom.toml"), exploding).unwrap();
    let out = marketabm(&["run", "boom.toml", "--out", "boom"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("aborted at tick"));
    assert!(tmp.path().join("boom/manifest.json").exists());
}

#[test]
fn analyze_external_prices() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("tick,close,open\n");
    let mut p = 100.0f64;
    for t in 0..400 {
        p *= 1.0 + 0.01 * ((t * 7919 % 13) as f64 - 6.0) / 6.0;
        csv.push_str(&format!("{t},{p},{}\n", (t % 2)));
    }
    fs::write(tmp.path().join("prices.csv"), &csv).unwrap();
    let out = marketabm(&["analyze", "prices.csv", "--column", "close"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_returns"], 399);
    assert_eq!(report["config"]["return_kind"], "log");

    let out = marketabm(
        &["analyze", "prices.csv", "--column", "close", "--active-column", "open", "--return-kind", "difference"],
        tmp.path(),
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_returns"], 199);
    assert_eq!(report["config"]["active_only"], true);

    let out = marketabm(&["analyze", "prices.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("price"));
}
