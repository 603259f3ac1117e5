use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regop::cp::LinearMap;
use regop::io;
use serde_json::Value;
use tempfile::TempDir;

fn regop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn write_map(dir: &TempDir, name: &str, u: &LinearMap) -> PathBuf {
    let path = dir.path().join(name);
    io::write_value(&path, &io::map_to_json(u)).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, kind: &str, n: &str, m: &str, seed: &str) -> PathBuf {
    let path = dir.path().join(name);
    let out = regop(&[
        "gen",
        "--kind",
        kind,
        "--n",
        n,
        "--m",
        m,
        "--seed",
        seed,
        "--out",
        s(&path),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

#[test]
fn regnorm_of_identity_is_one() {
    let dir = TempDir::new().unwrap();
    let map = write_map(&dir, "id.json", &LinearMap::identity(2));
    let r = json_of(&regop(&[
        "regnorm",
        "--map",
        s(&map),
        "--p",
        "2",
        "--seed",
        "1",
    ]));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["p"], 2.0);
    let (lo, up) = (r["lower"].as_f64().unwrap(), r["upper"].as_f64().unwrap());
    assert!(
        (lo - 1.0).abs() < 1e-6 && (up - 1.0).abs() < 1e-6,
        "{lo} {up}"
    );
    assert!(r["levels"].as_array().is_some_and(|l| !l.is_empty()));
    assert!(r["certificate"].is_string());
}

#[test]
fn cpcheck_rejects_transpose_with_margin_minus_one() {
    let dir = TempDir::new().unwrap();
    let map = write_map(&dir, "t.json", &LinearMap::transpose(2));
    let r = json_of(&regop(&["cpcheck", "--map", s(&map)]));
    assert_eq!(r["is_cp"], false);
    assert!((r["margin"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(r["summary"], "not CP, margin -1.0");
}

#[test]
fn kraus_of_non_cp_map_is_a_computation_failure() {
    let dir = TempDir::new().unwrap();
    let map = write_map(&dir, "t.json", &LinearMap::transpose(2));
    assert_eq!(regop(&["kraus", "--map", s(&map)]).status.code(), Some(1));
}

#[test]
fn kraus_of_identity_has_one_operator() {
    let dir = TempDir::new().unwrap();
    let map = write_map(&dir, "id.json", &LinearMap::identity(3));
    let r = json_of(&regop(&["kraus", "--map", s(&map)]));
    assert_eq!(r["count"], 1);
}

#[test]
fn malformed_file_exits_two_with_location() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"in_dim\": 2,\n  \"out_dim\": \n}").unwrap();
    let out = regop(&["cbnorm", "--map", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:4:"), "{err}");
}

#[test]
fn bad_entry_exits_two_with_json_path() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"outer_dim":1,"inner_dim":1,"rows":1,"cols":1,"data":[["x",0]]}"#,
    )
    .unwrap();
    let out = regop(&["vnorm", "--input", s(&path), "--p", "2", "--seed", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("$.data[0][0]"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let map = write_map(&dir, "id.json", &LinearMap::identity(2));
    // missing seed
    assert_eq!(
        regop(&["regnorm", "--map", s(&map), "--p", "2"])
            .status
            .code(),
        Some(2)
    );
    // unknown flag
    assert_eq!(
        regop(&["cbnorm", "--map", s(&map), "--bogus"])
            .status
            .code(),
        Some(2)
    );
    // exponent below one
    let out = regop(&["spnorm", "--map", s(&map), "--p", "0.5", "--seed", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn p_accepts_inf() {
    let dir = TempDir::new().unwrap();
    let block = gen(&dir, "x.json", "block", "2", "2", "3");
    let r = json_of(&regop(&[
        "vnorm",
        "--input",
        s(&block),
        "--p",
        "inf",
        "--seed",
        "0",
    ]));
    assert_eq!(r["p"], "inf");
    let (lo, up) = (r["lower"].as_f64().unwrap(), r["upper"].as_f64().unwrap());
    assert!(lo <= up * (1.0 + 1e-6));
}

#[test]
fn gen_round_trips_through_consumers() {
    let dir = TempDir::new().unwrap();
    let cp = gen(&dir, "cp.json", "cp-map", "2", "3", "5");
    let r = json_of(&regop(&["cpcheck", "--map", s(&cp)]));
    assert_eq!(r["is_cp"], true);
    let block = gen(&dir, "b.json", "block", "2", "3", "6");
    let back = io::read_block(&block).unwrap();
    let again = dir.path().join("b2.json");
    io::write_value(&again, &io::block_to_json(&back)).unwrap();
    assert_eq!(
        std::fs::read(&block).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let map = gen(&dir, "u.json", "map", "2", "2", "11");
    let args = ["spnorm", "--map", s(&map), "--p", "3", "--seed", "4"];
    let a = regop(&args);
    let b = regop(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn pair_satisfies_duality() {
    let dir = TempDir::new().unwrap();
    let map = gen(&dir, "u.json", "map", "2", "2", "12");
    let block = gen(&dir, "a.json", "block", "2", "2", "13");
    let r = json_of(&regop(&[
        "pair",
        "--map",
        s(&map),
        "--input",
        s(&block),
        "--p",
        "2",
        "--seed",
        "0",
    ]));
    assert_eq!(r["holds"], true);
}

#[test]
fn extend_consumes_generated_subspace_map() {
    let dir = TempDir::new().unwrap();
    let f = gen(&dir, "f.json", "subspace-map", "2", "2", "14");
    let r = json_of(&regop(&[
        "extend",
        "--subspace",
        s(&f),
        "--p",
        "inf",
        "--seed",
        "0",
    ]));
    let residual = r["restriction_residual"].as_f64().unwrap();
    assert!(residual < 1e-6, "{residual}");
    assert!(r["lower"].as_f64().unwrap() <= r["upper"].as_f64().unwrap() * (1.0 + 1e-6));
}

#[test]
fn verify_is_deterministic() {
    let args = [
        "verify",
        "--seed",
        "7",
        "--criterion",
        "6",
        "--criterion",
        "7",
    ];
    let a = regop(&args);
    let b = regop(&args);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stdout)
    );
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(
        text.contains("[PASS]  6") && text.contains("[PASS]  7"),
        "{text}"
    );
}
