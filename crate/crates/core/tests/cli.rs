use std::path::{Path, PathBuf};
use std::process::Command;

use adaptive_binpack::cli::{run_cli_with, CSV_HEADER, EXIT_CAPACITY, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("abp-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["adaptive-binpack"];
    argv.extend_from_slice(args);
    let code = run_cli_with(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}: "))).unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn write_tiny(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    std::fs::write(
        &path,
        r#"{"penalty": "4", "capacity": "1", "items": ["discrete:0.3@1/2,0.6@1/2", "discrete:0.5@2/3,1.2@1/3", "point:0.4"]}"#,
    )
    .unwrap();
    path
}

#[test]
fn generate_and_simulate_csv() {
    let dir = scratch("sim");
    let inst = dir.join("tp.json");
    assert_eq!(run(&["generate", "three_point", "--n", "60", "--C", "20", "-o", p(&inst)]).0, EXIT_OK);
    let report = dir.join("report.json");
    let (code, csv) = run(&[
        "simulate", "-i", p(&inst), "-p", "bg:sqrt(2),fg", "--trials", "200", "--seed", "7", "--prefix-sweep", "20,40",
        "--report", p(&report),
    ]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("20,bg:"));
    assert!(lines[6].starts_with("60,fg,"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["seed"], 7);
    assert_eq!(r["reference"]["proxy"], false);
    assert_eq!(r["rows"].as_array().unwrap().len(), 6);
    assert_eq!(r["stats"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_output_ignores_worker_count() {
    let dir = scratch("workers");
    let inst = dir.join("exp.json");
    assert_eq!(run(&["generate", "exp_blocks", "--n", "90", "--C", "30", "-o", p(&inst)]).0, EXIT_OK);
    let go = |w: &str| run(&["simulate", "-i", p(&inst), "-p", "bg:2,tg:1/2", "--trials", "300", "--seed", "3", "--workers", w]);
    let (a, b) = (go("1"), go("3"));
    assert_eq!(a.0, EXIT_OK);
    assert_eq!(a.1, b.1);
}

#[test]
fn simulate_flags_proxy_reference() {
    let dir = scratch("proxy");
    let inst = dir.join("inc.json");
    assert_eq!(run(&["generate", "exp_increasing", "--n", "20", "-o", p(&inst)]).0, EXIT_OK);
    let report = dir.join("r.json");
    let (code, csv) = run(&["simulate", "-i", p(&inst), "-p", "fg", "--trials", "50", "--report", p(&report)]);
    assert_eq!(code, EXIT_OK);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["reference"]["proxy"], true);
    // proxy is n/C + 1 = 20/50 + 1
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[6].parse::<f64>().unwrap(), 1.4);
}

#[test]
fn exact_reports_matching_tree() {
    let dir = scratch("exact");
    let inst = write_tiny(&dir);
    let (code, out) = run(&["exact", "-i", p(&inst)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(field(&out, "tree_matches"), "true");
    assert_eq!(run(&["exact", "-i", p(&inst), "--max-states", "1"]).0, EXIT_CAPACITY);
    assert_eq!(run(&["exact", "-i", p(&inst), "--single-bin"]).0, EXIT_USAGE);
}

#[test]
fn exact_budgeted_and_single_bin() {
    let dir = scratch("iid");
    let inst = dir.join("b.json");
    assert_eq!(run(&["generate", "bernoulli", "--n", "4", "--C", "10", "-o", p(&inst)]).0, EXIT_OK);
    let (code, out) = run(&["exact", "-i", p(&inst), "--budgeted", "sqrt(2)"]);
    assert_eq!(code, EXIT_OK);
    assert!(field(&out, "min_opened_budgeted").contains('('));
    let (code, out) = run(&["exact", "-i", p(&inst), "--single-bin"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("single_bin_value: "));
}

#[test]
fn ptas_solves_and_tracks() {
    let dir = scratch("ptas");
    let inst = write_tiny(&dir);
    let table = dir.join("table.json");
    let (code, out) = run(&[
        "ptas", "-i", p(&inst), "--eps", "3/10", "--grid", "81/10000", "--track", "--trials", "500", "--table", p(&table),
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert_eq!(field(&out, "dp_capacity"), "11/5");
    assert_eq!(field(&out, "track_capacity"), "14/5");
    assert!(field(&out, "tracked_mean_cost").parse::<f64>().unwrap() > 0.0);
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert!(!t["entries"].as_array().unwrap().is_empty());
    assert_eq!(run(&["ptas", "-i", p(&inst), "--eps", "3"]).0, EXIT_USAGE);
    assert_eq!(run(&["ptas", "-i", p(&inst), "--eps", "3/10", "--grid", "1/10"]).0, EXIT_USAGE);
}

#[test]
fn threshold_subcommand() {
    let dir = scratch("mdp");
    let inst = dir.join("tp.json");
    assert_eq!(run(&["generate", "three_point", "--n", "10", "-o", p(&inst)]).0, EXIT_OK);
    let (code, out) = run(&["threshold", "-i", p(&inst)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(field(&out, "interval"), "true");
    assert_eq!(field(&out, "monotone"), "true");
}

#[test]
fn reduce_and_generate_reduction() {
    let dir = scratch("reduce");
    let cnf = dir.join("f.cnf");
    std::fs::write(&cnf, "p cnf 2 2\n1 2 0\n-1 2 0\n").unwrap();
    let (code, out) = run(&["reduce", "-f", p(&cnf), "--symmetrize"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(field(&out, "variables"), "3");
    assert_eq!(field(&out, "satisfying"), "4");
    assert_eq!(field(&out, "searched_equals_corrected"), "true");
    assert_eq!(field(&out, "digit_carries"), "0");
    // not symmetric without --symmetrize
    assert_eq!(run(&["reduce", "-f", p(&cnf)]).0, EXIT_USAGE);
    let inst = dir.join("red.json");
    let (code, _) = run(&["generate", "reduction", "--cnf", p(&cnf), "--symmetrize", "-o", p(&inst)]);
    assert_eq!(code, EXIT_OK);
    assert!(dir.join("red.meta.json").exists());
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["generate", "nosuch", "-o", "/dev/null"]).0, EXIT_USAGE);
    assert_eq!(run(&["simulate"]).0, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    let dir = scratch("usage");
    let inst = write_tiny(&dir);
    assert_eq!(run(&["simulate", "-i", p(&inst), "-p", "bg:0"]).0, EXIT_USAGE);
    assert_eq!(run(&["simulate", "-i", p(&inst), "-p", "mdp"]).0, EXIT_USAGE);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_adaptive-binpack");
    let ok = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("simulate"));
    let bad = Command::new(bin).args(["exact", "-i", "/nonexistent.json"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}
