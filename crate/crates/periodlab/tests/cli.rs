//! Integration tests of the binary surface: exit-code contract (0 verified /
//! 1 not verified / 2 usage-or-domain error) and deterministic kv output.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_periodlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn frobenius_prints_expected_holomorphic_series() {
    let out = run(&["frobenius", "-N", "5"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let f0 = stdout.lines().find(|l| l.starts_with("f0:")).unwrap();
    assert_eq!(f0, "f0: 1 5 45 545 7885 127905");
}

#[test]
fn frobenius_order_zero() {
    let out = run(&["frobenius", "-N", "0"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("f0: 1\n"));
    assert!(stdout.contains("f1: 0\n"));
    assert!(stdout.contains("f3: 0\n"));
}

#[test]
fn invalid_operator_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.op");
    std::fs::write(&path, "name broken\nc 0 4 not-an-integer\n").unwrap();
    let out = run(&["frobenius", "-N", "4", "--op", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 2"), "diagnostic: {stderr}");
}

#[test]
fn singular_target_exits_2() {
    let out = run(&[
        "continue",
        "--target",
        "1/25",
        "--precision",
        "30",
        "--offline",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_kv_is_deterministic_and_verified() {
    let args = [
        "verify",
        "--precision",
        "40",
        "--k",
        "1",
        "--offline",
        "--format",
        "kv",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&a.stderr));
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout, "kv output must be byte-identical");
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("ratio_plus_num -2401\n"));
    assert!(text.contains("ratio_plus_den 32\n"));
    assert!(text.contains("ratio_minus_num 1029\n"));
    assert!(text.contains("ratio_minus_den 32\n"));
    assert!(text.contains("verified 1\n"));
    assert!(text.contains("f_inf_02 -3\n"));
}

#[test]
fn verify_low_precision_never_reports_a_different_rational() {
    let out = run(&[
        "verify",
        "--precision",
        "30",
        "--offline",
        "--format",
        "kv",
    ]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 1, "exit {code}");
    let text = String::from_utf8(out.stdout).unwrap();
    if let Some(line) = text.lines().find(|l| l.starts_with("ratio_plus_num ")) {
        let val = line.trim_start_matches("ratio_plus_num ");
        assert!(val == "-2401" || val == "unrecognized", "got {val}");
    }
}

#[test]
fn lvalue_subcommand_prints_reference_value() {
    let out = run(&[
        "lvalue",
        "--form",
        "14.2.a.a",
        "--s",
        "1",
        "--precision",
        "35",
        "--offline",
        "--format",
        "kv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let v = text
        .lines()
        .find(|l| l.starts_with("l_value "))
        .unwrap()
        .trim_start_matches("l_value ");
    assert!(v.starts_with("3.302236593444805390"), "got {v}");
}

#[test]
fn lvalue_outside_strip_exits_2() {
    let out = run(&[
        "lvalue", "--form", "14.2.a.a", "--s", "3", "--precision", "30", "--offline",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn jcheck_passes_with_bundled_constant() {
    let out = run(&["jcheck", "--precision", "40", "--offline", "--format", "kv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let d: i64 = text
        .lines()
        .find(|l| l.starts_with("digits_agreement "))
        .unwrap()
        .trim_start_matches("digits_agreement ")
        .parse()
        .unwrap();
    assert!(d >= 10, "digits {d}");
}

#[test]
fn jcheck_wrong_constant_exits_1() {
    let out = run(&["jcheck", "--vperp", "0.25", "--precision", "30", "--offline"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn monodromy_subcommand_prints_unipotent_matrix() {
    let out = run(&[
        "monodromy",
        "--center",
        "0",
        "--precision",
        "35",
        "--offline",
        "--format",
        "kv",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rationalized 1\n"));
    assert!(text.contains("m_10 1\n"));
    assert!(text.contains("m_32 3\n"));
}

#[test]
fn continue_with_path_file_matches_automatic_plan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("route.path");
    std::fs::write(&path, "-0.02 0\n-0.08 -0.04\n-0.142857142857142857 0\n").unwrap();
    let auto = run(&["continue", "--precision", "35", "--offline", "--format", "kv"]);
    assert_eq!(auto.status.code(), Some(0));
    let manual = run(&[
        "continue",
        "--precision",
        "35",
        "--offline",
        "--format",
        "kv",
        "--path",
        path.to_str().unwrap(),
    ]);
    assert_eq!(manual.status.code(), Some(0));
    let get = |out: &[u8], key: &str| -> String {
        String::from_utf8_lossy(out)
            .lines()
            .find(|l| l.starts_with(key))
            .unwrap()
            .to_string()
    };
    // same homotopy class; the file's decimal waypoint only approximates
    // -1/7 to f64 accuracy, so agreement holds to ~15 digits
    let a = get(&auto.stdout, "w_00_re ");
    let b = get(&manual.stdout, "w_00_re ");
    assert_eq!(a[..22], b[..22], "{a} vs {b}");
}
