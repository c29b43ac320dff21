use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn lieinfty(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lieinfty")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend(["--json", "-"]);
    let out = lieinfty(&a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lieinfty-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn strings(v: &Value) -> Vec<&str> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect()
}

#[test]
fn sl2_run_report() {
    let r = json(&["run", "--builtin", "sl2", "--point", "0,0"]);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["resolution"]["ranks"], serde_json::json!([3, 1]));
    assert_eq!(r["homological"]["passed"], true);
    assert_eq!(r["isotropy"]["dims"], serde_json::json!({"-1": 3, "-2": 1}));
    assert_eq!(strings(&r["isotropy"]["brackets"]["2"]), ["{h, e}_2 = 2*e", "{h, f}_2 = -2*f", "{e, f}_2 = h"]);
    assert_eq!(r["nmrla"]["class_vanishes"], true);
    assert_eq!(r["nmrla"]["statement"], "inconclusive");
    assert!(r.get("failure").is_none());
}

#[test]
fn koszul_verdict() {
    let r = json(&["nmrla", "--builtin", "koszul(x^3+y^3+z^3+t^3)", "--point", "0,0,0,0"]);
    assert_eq!(r["isotropy"]["dims"], serde_json::json!({"-1": 6, "-2": 4, "-3": 1}));
    assert_eq!(r["nmrla"]["class_vanishes"], false);
    assert_eq!(r["nmrla"]["rank"], 6);
    assert!(r["nmrla"]["statement"].as_str().unwrap().starts_with("no Lie algebroid of rank 6"));
    let text = String::from_utf8(lieinfty(&["run", "--builtin", "koszul(x^3+y^3+z^3+t^3)", "--point", "0,0,0,0"]).stdout).unwrap();
    assert!(text.contains("no Lie algebroid of rank 6"), "{text}");
}

#[test]
fn generators_reproduce_the_builtin_isotropy() {
    let p = scratch("sl2.txt", "# sl2 on the plane\nvariables = [x, y]\ngenerator = [x, -y]\ngenerator = [0, x]\ngenerator = [y, 0]\npoint = (0, 0)\n");
    let a = json(&["run", "--input", p.to_str().unwrap()]);
    let b = json(&["run", "--builtin", "sl2", "--point", "0,0"]);
    assert_eq!(a["isotropy"]["dims"], b["isotropy"]["dims"]);
    assert_eq!(a["isotropy"]["brackets"]["2"].as_array().unwrap().len(), 3);
    assert_eq!(a["nmrla"]["class_vanishes"], true);
}

#[test]
fn run_without_point_stops_after_verification() {
    let r = json(&["run", "--builtin", "order2"]);
    assert_eq!(r["homological"]["passed"], true);
    assert!(r.get("isotropy").is_none());
    assert!(r.get("nmrla").is_none());
}

#[test]
fn non_involutive_input_is_a_report_not_an_error() {
    let p = scratch("ni.txt", "variables = [x, y]\ngenerator = [1, 0]\ngenerator = [0, x]\n");
    let r = json(&["run", "--input", p.to_str().unwrap()]);
    assert_eq!(r["failure"]["stage"], "involutivity");
    assert!(r["failure"]["message"].as_str().unwrap().contains("[X1, X2]"));
    assert!(r.get("resolution").is_none());
}

#[test]
fn usage_and_parse_errors_exit_two() {
    let p = scratch("bad.txt", "variables = [x, y]\ngenerator = [x, y^]\n");
    let out = lieinfty(&["resolve", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:19:"));
    assert_eq!(lieinfty(&["isotropy", "--builtin", "sl2"]).status.code(), Some(2));
    assert_eq!(lieinfty(&["run", "--builtin", "sl3"]).status.code(), Some(2));
    assert_eq!(lieinfty(&["run", "--builtin", "sl2", "--point", "0,0,0"]).status.code(), Some(2));
    assert_eq!(lieinfty(&["run"]).status.code(), Some(2));
}

#[test]
fn json_file_matches_stdout_and_write_errors_exit_one() {
    let path = scratch("report.json", "");
    let out = lieinfty(&["verify", "--builtin", "origin(2)", "--json", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("origin(2)"));
    let file = std::fs::read(&path).unwrap();
    assert_eq!(file, lieinfty(&["verify", "--builtin", "origin(2)", "--json", "-"]).stdout);
    let bad = lieinfty(&["verify", "--builtin", "sl2", "--json", "/nonexistent/dir/report.json"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn regular_point_has_trivial_isotropy() {
    // ker rho(m) is spanned by the image of the relation, so H^-1 = 0
    let r = json(&["isotropy", "--builtin", "sl2", "--point", "-1,1/2"]);
    assert_eq!(r["isotropy"]["point"], serde_json::json!(["-1", "1/2"]));
    assert_eq!(r["isotropy"]["transferred"], true);
    assert_eq!(r["isotropy"]["foliation_rank"], 2);
    assert_eq!(r["isotropy"]["dims"], serde_json::json!({"-1": 0, "-2": 0}));
}
