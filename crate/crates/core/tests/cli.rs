//! End-to-end runs of the `padic-sr` binary: outputs, files and exit codes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_padic-sr"));
    c.env_remove("PADIC_SR_TRUNCATION").env_remove("PADIC_SR_HENSEL_DEPTH");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn fixture(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel).to_string_lossy().into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("padic-sr-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Nodes and undirected edges of a DOT `graph { ... }` body.
fn parse_dot(text: &str) -> (BTreeSet<String>, Vec<(String, String)>) {
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    let mut lines = text.lines().map(str::trim);
    assert!(lines.next().unwrap().starts_with("graph "), "undirected graph header");
    for line in lines {
        let stmt = line.split(" [").next().unwrap().trim_end_matches(';');
        if let Some((a, b)) = stmt.split_once(" -- ") {
            edges.push((a.to_string(), b.to_string()));
        } else if stmt.starts_with('v') {
            nodes.insert(stmt.to_string());
        }
    }
    (nodes, edges)
}

fn is_tree(nodes: &BTreeSet<String>, edges: &[(String, String)]) -> bool {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let Some(start) = nodes.iter().next() else { return false };
    let mut seen = BTreeSet::from([start.as_str()]);
    let mut stack = vec![start.as_str()];
    while let Some(v) = stack.pop() {
        for &w in adj.get(v).into_iter().flatten() {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    edges.len() + 1 == nodes.len() && seen.len() == nodes.len()
}

#[test]
fn analyze_writes_report_and_dot() {
    let (report, dot) = (scratch("r.json"), scratch("g.dot"));
    let o = run(&[
        "analyze",
        "--p",
        "5",
        "--n",
        "3",
        "--a",
        "1",
        "--b",
        "5",
        "--json",
        report.to_str().unwrap(),
        "--dot",
        dot.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["all_certified"], true);
    assert_eq!(r["graph_checks"]["vanishing_cycles_residual"], "0");
    let g = &r["graph"];
    let (nodes, edges) = parse_dot(&std::fs::read_to_string(&dot).unwrap());
    let n_vertices = g["components"].as_array().unwrap().len() + g["augmented"].as_array().unwrap().len();
    assert_eq!(nodes.len(), n_vertices);
    assert_eq!(edges.len() * 2, g["edges"].as_array().unwrap().len());
    assert!(is_tree(&nodes, &edges));
}

#[test]
fn analyze_to_stdout_and_negative_exponents() {
    let o = run(&["analyze", "--p", "7", "--n", "2", "--a", "-6", "--b", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["spec"]["s"], 1);
}

#[test]
fn rejected_and_malformed_inputs() {
    // v(a) = v(b) > 0: not a three-point cover.
    assert_eq!(run(&["analyze", "--p", "5", "--n", "2", "--a", "5", "--b", "10"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--p", "5", "--n", "2"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--p", "6", "--n", "2", "--a", "1", "--b", "1"]).status.code(), Some(1));
    assert_eq!(run(&["validate-graph", "/nonexistent/graph.json"]).status.code(), Some(2));
    assert_eq!(run(&["validate-graph", &fixture("mutated/manifest.json")]).status.code(), Some(2));
    let o = bin()
        .env("PADIC_SR_TRUNCATION", "abc")
        .args(["certify", "--p", "5", "--n", "2", "--a", "2", "--b", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn certify_reports_both_disks() {
    let o = run(&["certify", "--p", "5", "--n", "3", "--a", "1", "--b", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["new_tail"]["kind"], "splits_artin_schreier");
    assert_eq!(v["new_tail"]["count"], 25);
    assert_eq!(v["new_tail"]["conductor"], 2);
    assert!(v["branch_point_one"].is_object());
    let o = run(&["--truncation", "12", "certify", "--p", "5", "--n", "2", "--a", "2", "--b", "1"]);
    assert_eq!(json(&o)["new_tail"]["truncation"], 12);
}

#[test]
fn validate_graph_accepts_fixtures_and_rejects_mutations() {
    let dot = scratch("v.dot");
    let o = run(&["validate-graph", &fixture("graphs/g_3_3_1_3.json"), "--dot", dot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["violations"], Value::Array(vec![]));
    let (nodes, edges) = parse_dot(&std::fs::read_to_string(&dot).unwrap());
    assert!(is_tree(&nodes, &edges));

    let o = run(&["validate-graph", &fixture("mutated/m05_dagger_sigma_fraction.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insep-sigma-nonint"));
    let o = run(&["validate-graph", &fixture("mutated/m02_cycle.json"), "--dot", dot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn conductor_for_cover_and_tower_file() {
    let o = run(&["conductor", "--p", "3", "--n", "2", "--a", "1", "--b", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let tower = scratch("tower.json");
    std::fs::write(&tower, serde_json::to_string(&v["tower"]).unwrap()).unwrap();
    let o = run(&["conductor", "--tower", tower.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(run(&["conductor", "--tower", "t.json", "--p", "3"]).status.code(), Some(2));
}

#[test]
fn signature_solutions_and_flip_hint() {
    let o = run(&["signature", "--p", "7", "--n", "1", "--m", "3", "--a1", "1", "--a2", "2", "--a3", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let pts = json(&o)["solution"]["points"].clone();
    let sig: Vec<&str> = pts.as_array().unwrap().iter().map(|x| x["sigma"].as_str().unwrap()).collect();
    assert_eq!(sig, ["1/3", "2/3", "0"]);
    let o = run(&["signature", "--p", "7", "--n", "1", "--m", "3", "--a1", "2", "--a2", "2", "--a3", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[1, 1, 1]"));
    let o = run(&["signature", "--p", "5", "--n", "1", "--m", "3", "--a1", "1", "--a2", "2", "--a3", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn batch_prints_a_full_table() {
    let out = scratch("batch.json");
    let o = run(&[
        "batch",
        "--p",
        "3",
        "--n-max",
        "2",
        "--per-cell",
        "2",
        "--threads",
        "2",
        "--json",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r[3], "2", "covers");
        assert!(r[4..7].iter().all(|&c| c == "2"), "{r:?}");
    }
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 6);
}
