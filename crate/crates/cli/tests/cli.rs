use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anchor-attn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(path: &Path, contents: &str) {
    fs::write(path, contents).unwrap();
}

#[test]
fn gen_is_deterministic_and_validates_p() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.el");
    let b = dir.path().join("b.el");
    assert!(run(&["gen", "--n", "200", "--p", "0.05", "--seed", "7", "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(run(&["gen", "--n", "200", "--p", "0.05", "--seed", "7", "--out", b.to_str().unwrap()])
        .status
        .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let out = run(&["gen", "--n", "10", "--p", "1.5", "--seed", "1", "--out", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_complete_graph_edge_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k50.el");
    assert!(run(&["gen", "--n", "50", "--p", "1.0", "--seed", "3", "--out", path.to_str().unwrap()])
        .status
        .success());
    let lines = fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(lines, 1 + 1225);
}

#[test]
fn anchors_on_star_graph() {
    let dir = tempfile::tempdir().unwrap();
    let star = dir.path().join("star.el");
    write(&star, "6\n0 1\n0 2\n0 3\n0 4\n0 5\n");
    let out = run(&["anchors", "--graph", star.to_str().unwrap(), "--k", "1", "--seed", "5"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["anchors"], serde_json::json!([0]));
    assert_eq!(json["verified"], serde_json::json!(true));
}

#[test]
fn malformed_graph_file_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.el");
    write(&bad, "3\n0 1\nx 2\n");
    let out = run(&["anchors", "--graph", bad.to_str().unwrap(), "--k", "1", "--seed", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn gradcheck_passes_on_er_16() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("er16.el");
    assert!(run(&["gen", "--n", "16", "--p", "0.2", "--seed", "9", "--out", g.to_str().unwrap()])
        .status
        .success());
    let out = run(&[
        "gradcheck",
        "--graph",
        g.to_str().unwrap(),
        "--k",
        "2",
        "--seed",
        "4",
        "--d-model",
        "8",
        "--heads",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max rel. error"), "stdout: {stdout}");
}

#[test]
fn forward_on_single_node_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("one.el");
    write(&g, "1\n");
    let out_path = dir.path().join("fwd.json");
    let out = run(&[
        "forward",
        "--graph",
        g.to_str().unwrap(),
        "--k",
        "1",
        "--d-model",
        "8",
        "--heads",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("head 0"));
    assert!(stdout.contains("head 1"));
    let dump: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(dump["0"].as_array().unwrap().len(), 8);
}

#[test]
fn wl_separates_path_from_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let p3 = dir.path().join("p3.el");
    let tri = dir.path().join("tri.el");
    write(&p3, "3\n0 1\n1 2\n");
    write(&tri, "3\n0 1\n1 2\n2 0\n");
    let out = run(&["wl", "--g1", p3.to_str().unwrap(), "--g2", tri.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.trim_end().ends_with("distinguishable"));
    assert!(!stdout.trim_end().ends_with("indistinguishable"));
}

#[test]
fn fact2_separates_the_classic_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("decalin.el");
    let b = dir.path().join("bicyclopentyl.el");
    write(&d, "10\n0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n4 6\n6 7\n7 8\n8 9\n9 5\n");
    write(&b, "10\n0 1\n1 2\n2 3\n3 4\n4 0\n5 6\n6 7\n7 8\n8 9\n9 5\n0 5\n");
    let out = run(&[
        "fact2",
        "--g1",
        d.to_str().unwrap(),
        "--g2",
        b.to_str().unwrap(),
        "--exhaustive",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["verdict"], serde_json::json!("distinguished"));
    assert_eq!(json["wl"]["distinguishable"], serde_json::json!(false));
    assert!(json["multisets"][0].as_array().unwrap().len() >= 2);
}

#[test]
fn bench_paper_grid_emits_six_rows_with_sparse_savings() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("grid.csv");
    let out = run(&[
        "bench",
        "--preset",
        "paper-grid",
        "--out",
        out_path.to_str().unwrap(),
        "--reps",
        "1",
        "--warmup",
        "0",
        "--seed",
        "11",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&out_path).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        let attended: u64 = cols[7].parse().unwrap();
        let dense: u64 = cols[8].parse().unwrap();
        assert!(attended < dense, "row: {row}");
    }
}

#[test]
fn bench_unknown_preset_is_usage_error() {
    let out = run(&["bench", "--preset", "nonsense", "--out", "/tmp/x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ksweep_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("er.el");
    assert!(run(&["gen", "--n", "300", "--p", "0.02", "--seed", "2", "--out", g.to_str().unwrap()])
        .status
        .success());
    let out = run(&[
        "ksweep",
        "--graph",
        g.to_str().unwrap(),
        "--k-values",
        "1,2",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(rows[0]["attended_pairs"].as_u64().unwrap() > 0);
}
