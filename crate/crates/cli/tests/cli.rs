use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kl"))
        .args(args)
        .output()
        .expect("kl runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\n{}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

/// Numeric rows of an emitted table, keyed by column name.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn value_at(rows: &[Vec<f64>], t: f64, col: usize) -> f64 {
    rows.iter()
        .find(|r| r[0] == t)
        .unwrap_or_else(|| panic!("no row at t = {t}"))[col]
}

#[test]
fn reproduce_huber_example() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("b2.csv");
    let o = kl(&[
        "reproduce",
        "example-b2",
        "--rho",
        "1",
        "--emit-table",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert!(r["provenance"].as_str().unwrap().contains("Huber"));
    let (header, rows) = read_table(&table);
    assert_eq!(header, ["t", "phi", "dphi", "reference"]);
    assert!((value_at(&rows, 0.5, 1) - 1.0).abs() < 0.02);
    assert!((value_at(&rows, 2.0, 1) - 1.75).abs() < 0.02 * 1.75);
}

#[test]
fn reproduce_embeds_provenance_for_every_entry() {
    for id in [
        "exp_neg_inv_sq",
        "abs_val",
        "min_exp_abs",
        "huber_like",
        "neg_log_factor",
        "linear_pair",
        "min_continuity_demo",
    ] {
        let o = kl(&["reproduce", id]);
        assert_eq!(code(&o), 0, "{id}: {}", String::from_utf8_lossy(&o.stdout));
        let r = report(&o);
        assert_eq!(r["id"], id);
        assert!(!r["provenance"].as_str().unwrap().is_empty());
    }
}

#[test]
fn reports_are_deterministic() {
    let a = kl(&["reproduce", "linear_pair", "--seed-free-check"]);
    assert_eq!(code(&a), 2, "unknown flags are usage errors");
    let a = kl(&["alpha", "--oracle", "linear_pair", "--seed", "7"]);
    let b = kl(&["alpha", "--oracle", "linear_pair", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    let a = kl(&["reproduce", "abs_val"]);
    let b = kl(&["reproduce", "abs_val"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn power_functions_fail_on_flat_function() {
    let o = kl(&[
        "verify",
        "--oracle",
        "exp_neg_inv_sq",
        "--phi",
        "power:c=1,theta=0.5",
    ]);
    assert_eq!(code(&o), 1);
    let r = report(&o);
    assert_eq!(r["result"]["passed"], false);
    assert!(r["result"]["violation_count"].as_u64().unwrap() > 0);

    let ok = kl(&["verify", "--oracle", "exp_neg_inv_sq", "--phi", "sqrtneginvlog"]);
    assert_eq!(code(&ok), 0);
}

#[test]
fn separable_composition_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let o = kl(&[
        "compose",
        "sepsum",
        "--phi",
        "expsqrt:a=1,b=1",
        "--phi",
        "expsqrt:a=1,b=1",
        "--eta",
        "inf",
        "--emit-table",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table(&table);
    assert_eq!(header, ["t", "phi", "dphi"]);
    assert!(rows.len() > 100);
    for r in rows {
        let want = 2.0 * (-(-r[0] / 2.0).exp_m1()).sqrt();
        assert!((r[1] - want).abs() <= 5e-3 * want, "t = {}", r[0]);
    }
}

#[test]
fn other_rules() {
    let o = kl(&[
        "compose",
        "min",
        "--phi",
        "sqrtneginvlog",
        "--phi",
        "power:c=1,theta=0",
        "--phi",
        "power:c=2,theta=0.5",
        "--values",
        "0,0.5,0",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(report(&o)["active"], serde_json::json!([1, 3]));

    let o = kl(&["compose", "sum", "--phi", "power:c=1,theta=0.5", "--phi", "power:c=1,theta=0"]);
    assert_eq!(code(&o), 2, "sum needs --alpha");

    let o = kl(&[
        "compose",
        "precompose",
        "--phi",
        "power:c=1,theta=0.5",
        "--matrix",
        "2,0;0,1",
    ]);
    assert_eq!(code(&o), 0);
    let scale = &report(&o)["result"]["scale"];
    assert!((scale["estimate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn alpha_of_linear_pair() {
    let o = kl(&["alpha", "--oracle", "linear_pair"]);
    assert_eq!(code(&o), 0);
    let a = report(&o)["result"]["alpha"].as_f64().unwrap();
    assert!((a - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn tabulated_oracle_files() {
    let dir = tempfile::tempdir().unwrap();
    let abs = dir.path().join("abs.csv");
    std::fs::write(&abs, "x1,f,dist\n-1,1,1\n0,0,0\n1,1,1\n").unwrap();
    let o = kl(&[
        "verify",
        "--oracle",
        abs.to_str().unwrap(),
        "--xbar",
        "0",
        "--eps",
        "2",
        "--phi",
        "power:c=1,theta=0",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&o)["result"]["tested_count"], 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,f\n0,0\n").unwrap();
    let o = kl(&["verify", "--oracle", bad.to_str().unwrap(), "--phi", "power:c=1,theta=0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn exported_cloud_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("cloud.csv");
    let second = dir.path().join("again.csv");
    for oracle in ["huber_like", "neg_log_factor"] {
        let o = kl(&["modulus", "--oracle", oracle, "--emit-cloud", first.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let o = kl(&[
            "modulus",
            "--oracle",
            first.to_str().unwrap(),
            "--emit-cloud",
            second.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    }
}

#[test]
fn modulus_dominance_exit_codes() {
    let below = kl(&["modulus", "--oracle", "abs_val", "--phi", "power:c=1,theta=0"]);
    assert_eq!(code(&below), 0);
    assert_eq!(report(&below)["dominance"]["holds"], true);
    let above = kl(&["modulus", "--oracle", "abs_val", "--phi", "power:c=0.5,theta=0"]);
    assert_eq!(code(&above), 1);
}

#[test]
fn blockers_make_the_modulus_undefined() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("flat.csv");
    std::fs::write(&f, "x1,f,dist\n0,0,1\n0.5,0.25,0\n1,1,2\n").unwrap();
    let o = kl(&["modulus", "--oracle", f.to_str().unwrap(), "--xbar", "0", "--eps", "2"]);
    assert_eq!(code(&o), 1);
    let r = report(&o);
    assert_eq!(r["modulus"]["defined"], false);
    assert_eq!(r["modulus"]["blockers"], 1);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["verify", "--oracle", "nope", "--phi", "power:c=1,theta=0"],
        vec!["verify", "--oracle", "abs_val", "--phi", "power:c=1,theta=0", "--eta", "-1"],
        vec!["verify", "--oracle", "abs_val", "--phi", "power:c=-1,theta=0"],
        vec!["verify", "--oracle", "abs_val"],
        vec!["verify", "--oracle", "abs_val", "--phi", "power:c=1,theta=0", "--grid-n", "1"],
        vec!["reproduce", "abs_val", "--rho", "2"],
        vec!["selftest", "--only", "11"],
    ] {
        let o = kl(&args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn selftest_subset() {
    let o = kl(&["selftest", "--only", "7", "--only", "8"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("PASS  7") && text.contains("PASS  8"), "{text}");
}
