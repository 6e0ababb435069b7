use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn fixture(name: &str) -> String {
    root().join("crates/core/fixtures").join(name).display().to_string()
}

fn actlang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actlang")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn infer_reports_the_root_rules() {
    let out = stdout(&actlang(&["infer", &fixture("table4_grammar.tsv")]));
    let dr = body(&out).into_iter().find(|l| l.starts_with("S\tDR\t")).expect("S -> DR row");
    let p: f64 = dr.split('\t').nth(2).unwrap().parse().unwrap();
    assert!((p - 0.43117).abs() < 5e-6, "{p}");
}

#[test]
fn every_artifact_has_a_provenance_header() {
    let out = stdout(&actlang(&["infer", &fixture("table1.tsv")]));
    let head: Vec<&str> = out.lines().take(3).collect();
    assert!(head[0].starts_with("# actlang "));
    assert!(head[1].starts_with("# manifest sha256:") && head[1].len() == "# manifest sha256:".len() + 64);
    assert_eq!(head[2], "# seed none");

    let json = stdout(&actlang(&["infer", &fixture("table1.tsv"), "--format", "struct"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["provenance"]["manifest_sha256"].as_str().unwrap().len() == 64);
    assert!(v["data"].is_object());
}

#[test]
fn zero_words_is_an_input_error() {
    let o = actlang(&["gen", "--grammar", &fixture("table1.tsv"), "--seed", "1", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n must be ≥ 1"));
}

#[test]
fn missing_seed_is_an_input_error() {
    let o = actlang(&["gen", "--grammar", &fixture("table1.tsv"), "--n", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generation_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    stdout(&actlang(&["infer", &fixture("table4_grammar.tsv"), "--format", "struct", "--out", g.to_str().unwrap()]));
    let g = g.to_str().unwrap();
    for extra in [&[][..], &["--counts", "2.5"]] {
        let mut args = vec!["gen", "--grammar", g, "--seed", "42", "--n", "500"];
        args.extend_from_slice(extra);
        let a = actlang(&args);
        let b = actlang(&args);
        assert_eq!(stdout(&a), stdout(&b));
        assert_eq!(body(&stdout(&a)).len(), 501);
    }
    let a = stdout(&actlang(&["gen", "--grammar", g, "--seed", "1", "--n", "500"]));
    let b = stdout(&actlang(&["gen", "--grammar", g, "--seed", "2", "--n", "500"]));
    assert_ne!(body(&a), body(&b));
}

#[test]
fn tab_separated_grammar_feeds_generation_and_cost() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.tsv");
    let w = dir.path().join("w.tsv");
    stdout(&actlang(&["infer", &fixture("table4_grammar.tsv"), "--out", g.to_str().unwrap()]));
    stdout(&actlang(&["gen", "--grammar", g.to_str().unwrap(), "--seed", "5", "--n", "200", "--counts", "2", "--out", w.to_str().unwrap()]));
    let out = stdout(&actlang(&["cost", w.to_str().unwrap()]));
    assert!(body(&out).iter().any(|l| l == &"n\t200"));
}

#[test]
fn conversation_chain_settles_uniformly() {
    let out = stdout(&actlang(&["ctmc", &data("conversation.json"), "--t", "100", "--steps", "4"]));
    let rows = body(&out);
    assert_eq!(rows.len(), 6);
    let last: Vec<f64> = rows[5].split('\t').skip(1).map(|x| x.parse().unwrap()).collect();
    assert_eq!(last.len(), 14);
    assert!(last.iter().all(|p| (p - 1.0 / 14.0).abs() < 1e-6));
}

#[test]
fn tree_walk_conserves_mass() {
    let out = stdout(&actlang(&["tree-walk", &data("tree.json"), "--t", "3", "--steps", "3", "--start", "Cu"]));
    for row in body(&out).into_iter().skip(1) {
        let s: f64 = row.split('\t').skip(1).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn assembly_report() {
    let out = stdout(&actlang(&["aword", &data("example.aword"), "--times", "2,1.5,4.5", "--workers", "2"]));
    let b = body(&out);
    assert!(b.contains(&"depth\t2") && b.contains(&"leaf_count\t6") && b.contains(&"inner_count\t3"));
    assert!(out.contains("node 2: actions [a3, a5] processes [p2, p5] stations 3 workers 6"));
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.aword");
    std::fs::write(&p, "(x1,\n (x2, x3; a1)\n").unwrap();
    let o = actlang(&["aword", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.aword:"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let c = dir.path().join("bad.tsv");
    std::fs::write(&c, "#year:1999\nA_\t3\nDR\tmany\n").unwrap();
    let o = actlang(&["infer", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.tsv:3"));
}

#[test]
fn missing_file_is_an_input_error() {
    let o = actlang(&["infer", "/nonexistent/corpus.tsv"]);
    assert_eq!(o.status.code(), Some(2));
}
