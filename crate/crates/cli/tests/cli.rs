use std::process::{Command, Output};

use serde_json::Value;

fn squfof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_squfof")).args(args).env_remove("SQUFOF_WORKERS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_line(o: &Output) -> Value {
    let s = stdout(o);
    assert_eq!(s.lines().count(), 1, "{s}");
    serde_json::from_str(s.trim()).unwrap()
}

#[test]
fn factor_21() {
    let o = squfof(&["factor", "21"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("21 = 3 × 7"));
}

#[test]
fn factor_9_is_a_square() {
    let o = squfof(&["factor", "9"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("9 = 3 × 3"));
}

#[test]
fn cf_21_matches_the_hand_expansion() {
    let o = squfof(&["--csv", "cf", "21", "--steps", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("i,b,p,q"));
    let rows: Vec<Vec<i64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.iter().map(|r| r[1]).collect::<Vec<_>>(), vec![4, 1, 1, 2, 1, 1, 8]);
    assert_eq!(rows.iter().map(|r| r[3]).collect::<Vec<_>>(), vec![1, 5, 4, 3, 4, 5, 1]);
}

#[test]
fn exit_codes() {
    assert_eq!(squfof(&["factor", "101"]).status.code(), Some(1));
    assert_eq!(squfof(&["factor", "twelve"]).status.code(), Some(2));
    assert_eq!(squfof(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(squfof(&["pfactor", "21", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(squfof(&["factor", "1"]).status.code(), Some(2));
}

#[test]
fn json_records() {
    let v = json_line(&squfof(&["--json", "factor", "0x3ade68b1", "--deterministic"]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "factor");
    let f = &v["payload"]["factors"];
    let (p, q): (u64, u64) = (f[0].as_str().unwrap().parse().unwrap(), f[1].as_str().unwrap().parse().unwrap());
    assert_eq!(p * q, 0x3ade68b1);
    assert_eq!(v["payload"]["wall_time_ms"], 0.0);

    for args in [
        &["--json", "cf", "13", "--normalized", "--steps", "4"][..],
        &["--json", "cycle", "85", "--all"],
        &["--json", "regulator", "13", "--normalized"],
        &["--json", "bsgs", "3599"],
        &["--json", "pfactor", "1022117", "--workers", "2"],
        &["--json", "pfactor", "1022117", "--workers", "2", "--method", "multipliers"],
    ] {
        let o = squfof(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        let v = json_line(&o);
        assert_eq!(v["command"], args[1]);
    }
    let o = squfof(&["--json", "factor", "101"]);
    assert_eq!(json_line(&o)["exit_code"], 1);
}

#[test]
fn regulator_of_13() {
    let v = json_line(&squfof(&["--json", "regulator", "13", "--normalized"]));
    let r = v["payload"]["regulator"].as_f64().unwrap();
    assert!((r - ((3.0 + 13f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
}

#[test]
fn csv_width_is_constant() {
    for args in [&["--csv", "bench", "--bits", "20", "--trials", "2", "--workers", "1,2"][..], &["--csv", "cycle", "221", "--all"], &["--csv", "factor", "1022117"]] {
        let o = squfof(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        let s = stdout(&o);
        let widths: Vec<usize> = s.lines().map(|l| l.split(',').count()).collect();
        assert!(widths.len() > 1 && widths.iter().all(|&w| w == widths[0]), "{args:?}: {s}");
    }
}

#[test]
fn workers_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_squfof")).args(["--json", "pfactor", "1022117"]).env("SQUFOF_WORKERS", "3").output().unwrap();
    assert_eq!(json_line(&o)["payload"]["workers"], 3);
    let o = Command::new(env!("CARGO_BIN_EXE_squfof")).args(["--json", "--deterministic", "pfactor", "1022117"]).env("SQUFOF_WORKERS", "3").output().unwrap();
    assert_eq!(json_line(&o)["payload"]["workers"], 1);
}

#[test]
fn selftest_subset() {
    let o = squfof(&["selftest", "--only", "1,3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[PASS] criterion 3"));
}
