//! End-to-end checks of the `solquad` binary: round trips through rule
//! files, output determinism, and exit-code conventions.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use solquad::rulegen::{apply_rule, build_rule, Settings};
use solquad::spectrum::{parse_spectrum, Column, Modifier, WeightModel};

const BIN: &str = env!("CARGO_BIN_EXE_solquad");

/// Constant weight 1 on a small band: rules build in milliseconds.
const CONSTANT_DATA: &str = "0,1\n1,1\n2,1\n3,1\n4,1\n";

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("solquad-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn rule_round_trips_through_csv_and_json() {
    let dir = workdir("roundtrip");
    let data = dir.join("flat.csv");
    fs::write(&data, CONSTANT_DATA).unwrap();
    let spectrum = data.to_str().unwrap();

    // in-memory reference
    let parsed = parse_spectrum(CONSTANT_DATA.as_bytes(), Column::GlobalTilt).unwrap();
    let model = WeightModel::build(&parsed, (0.0, 4.0), Modifier::None).unwrap();
    let rule = build_rule(&model, 5, &Settings::default()).unwrap();
    let f = |l: f64| 1.0 + 2.0 * l + 3.0 * l * l;
    let reference = apply_rule(&rule, f).unwrap();

    for format in ["csv", "json"] {
        let rule_path = dir.join(format!("rule.{format}"));
        let out = run(&[
            "rule", "--spectrum", spectrum, "--band", "0,4", "--order", "5",
            "--format", format, "--out", rule_path.to_str().unwrap(),
        ]);
        stdout_of(&out);
        let out = run(&[
            "integrate", "--rule", rule_path.to_str().unwrap(), "--poly", "1,2,3",
        ]);
        let value: f64 = stdout_of(&out).trim().parse().unwrap();
        assert!(
            (value - reference).abs() <= 1e-15 * reference.abs(),
            "{format} round trip: {value} vs in-memory {reference}"
        );
    }
}

#[test]
fn identical_invocations_produce_identical_bytes() {
    let dir = workdir("determinism");
    let data = dir.join("flat.csv");
    fs::write(&data, CONSTANT_DATA).unwrap();
    let args = [
        "rule", "--spectrum", data.to_str().unwrap(), "--band", "0,4", "--order", "6",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn oracle_subcommand_integrates_weight_times_integrand() {
    let dir = workdir("oracle");
    let data = dir.join("flat.csv");
    fs::write(&data, CONSTANT_DATA).unwrap();
    // weight 1 on (0, 3): integral of lambda is 4.5
    let out = run(&[
        "oracle", "--spectrum", data.to_str().unwrap(), "--band", "0,3", "--poly", "0,1",
    ]);
    let text = stdout_of(&out);
    let value: f64 = text.split_whitespace().next().unwrap().parse().unwrap();
    assert!((value - 4.5).abs() <= 1e-10, "oracle returned {value}");
}

#[test]
fn convergence_subcommand_emits_one_row_per_order() {
    let dir = workdir("convergence");
    let data = dir.join("flat.csv");
    fs::write(&data, CONSTANT_DATA).unwrap();
    let out = run(&[
        "convergence", "--spectrum", data.to_str().unwrap(), "--band", "0,4",
        "--sin", "4", "--orders", "2:1:4",
    ]);
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N,value,oracle,rel_error,evals");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[3].starts_with("4,"));
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = workdir("usage");
    let data = dir.join("flat.csv");
    fs::write(&data, CONSTANT_DATA).unwrap();
    for args in [
        vec!["rule", "--spectrum", data.to_str().unwrap(), "--band", "0,4", "--order", "0"],
        vec!["rule", "--spectrum", data.to_str().unwrap(), "--band", "4,0", "--order", "3"],
        vec!["oracle", "--spectrum", data.to_str().unwrap(), "--band", "0,4"],
        vec!["nonsense"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
}

#[test]
fn runtime_failures_exit_with_1() {
    let dir = workdir("runtime");
    let data = dir.join("flat.csv");
    fs::write(&data, CONSTANT_DATA).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        // spectrum file does not exist
        vec!["rule", "--spectrum", "/no/such/file", "--band", "0,4", "--order", "3"],
        // band outside the tabulated range
        vec!["rule", "--spectrum", data.to_str().unwrap(), "--band", "0,9", "--order", "3"],
        // rule file does not exist
        vec!["integrate", "--rule", "/no/such/rule.csv", "--poly", "1"],
    ];
    for args in cases {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "args {args:?}");
        assert!(!out.stderr.is_empty());
    }
}
