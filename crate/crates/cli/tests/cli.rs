use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn quadmetric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadmetric")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const C4: &str = r#"{"n": 4, "d": [[0,1,2,1],[1,0,1,2],[2,1,0,1],[1,2,1,0]]}"#;

#[test]
fn c4_boxtimes_reports_the_cycle() {
    let dir = TempDir::new().unwrap();
    let c4 = write(&dir, "c4.json", C4);
    let out = quadmetric(&["check-boxtimes", s(&c4)]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["command"], "check-boxtimes");
    assert_eq!(r["version"], "1");
    assert_eq!(r["results"]["status"], "violation");
    assert_eq!(r["results"]["min_gap"], -1.0);
    let w = &r["witnesses"][0];
    assert_eq!(w["kind"], "boxtimes");
    assert_eq!(w["s"], 0.5);
    assert_eq!(w["t"], 0.5);
    let quad: Vec<u64> = w["quadruple"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert!(quad.iter().all(|&l| (1..=4).contains(&l)), "labels are 1-based: {quad:?}");
}

#[test]
fn check_metric_reports_triangle_violation() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "bad.json", r#"{"n": 3, "d": [[0,1,3],[1,0,1],[3,1,0]]}"#);
    let out = quadmetric(&["check-metric", s(&f)]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["results"]["semimetric"], true);
    assert_eq!(r["results"]["metric"], false);
    let w = r["witnesses"].as_array().unwrap();
    assert!(w.iter().any(|w| w["kind"] == "triangle" && w["triple"] == json!([1, 3, 2]) && w["slack"] == 1.0), "{w:?}");
}

#[test]
fn check_metric_rejects_asymmetry_with_witness() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "asym.json", r#"{"n": 2, "d": [[0,1],[2,0]]}"#);
    let out = quadmetric(&["check-metric", s(&f)]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["results"]["semimetric"], false);
    assert_eq!(r["witnesses"][0]["kind"], "asymmetric");
    assert_eq!(r["witnesses"][0]["pair"], json!([1, 2]));
}

#[test]
fn mirror_upper_repairs_the_lower_triangle() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "upper.json", r#"{"n": 3, "d": [[0,1,1],[0,0,1],[0,0,0]]}"#);
    assert_eq!(quadmetric(&["check-metric", s(&f)]).status.code(), Some(1));
    let out = quadmetric(&["check-metric", s(&f), "--mirror-upper"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["metric"], true);
}

#[test]
fn csv_and_json_inputs_agree() {
    let dir = TempDir::new().unwrap();
    let j = write(&dir, "c4.json", C4);
    let c = write(&dir, "c4.csv", "0,1,2,1\n1,0,1,2\n 2, 1, 0, 1\n1,2,1,0\n");
    let a = report(&quadmetric(&["check-boxtimes", s(&j)]));
    let b = report(&quadmetric(&["check-boxtimes", s(&c)]));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["witnesses"], b["witnesses"]);
    assert_ne!(a["inputs_digest"], b["inputs_digest"]);
}

#[test]
fn point_cloud_input_is_a_metric() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "cloud.json", r#"{"dim": 2, "points": [[0,0],[1,0],[0,1],[1,1],[0.5,0.3]]}"#);
    let out = quadmetric(&["certify-upto5", s(&f)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["verdict"], "EMBEDDABLE");
    let bad = write(&dir, "ragged.json", r#"{"dim": 2, "points": [[0,0],[1,0,0]]}"#);
    let out = quadmetric(&["check-metric", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["results"]["kind"], "schema");
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("garbage.json", "{not json", "parse"),
        ("mismatch.json", r#"{"n": 3, "d": [[0,1],[1,0]]}"#, "schema"),
        ("unknown.json", r#"{"n": 2, "d": [[0,1],[1,0]], "extra": 1}"#, "parse"),
        ("neither.json", r#"{"rows": []}"#, "schema"),
        ("word.csv", "0,x\n1,0\n", "schema"),
    ];
    for (name, contents, kind) in cases {
        let f = write(&dir, name, contents);
        let out = quadmetric(&["check-metric", s(&f)]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let r = report(&out);
        assert_eq!(r["results"]["status"], "input_error", "{name}");
        assert_eq!(r["results"]["kind"], kind, "{name}");
    }
    let out = quadmetric(&["check-metric", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["results"]["kind"], "io");
}

#[test]
fn usage_errors_exit_2_with_a_report() {
    let out = quadmetric(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["results"]["status"], "input_error");
    let out = quadmetric(&["verify-lebedeva", "--epsilon", "1e-6", "--epsilon-fraction", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(quadmetric(&["--help"]).status.code(), Some(0));
}

#[test]
fn certify_handles_small_and_large_spaces() {
    let dir = TempDir::new().unwrap();
    let c4 = write(&dir, "c4.json", C4);
    let out = quadmetric(&["certify-upto5", s(&c4)]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["results"]["verdict"], "NOT_EMBEDDABLE");
    assert_eq!(r["results"]["reason"], "boxtimes");

    let two = write(&dir, "two.json", r#"{"n": 2, "d": [[0,3],[3,0]]}"#);
    let out = quadmetric(&["certify-upto5", s(&two)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["verdict"], "EMBEDDABLE");

    let tri = write(&dir, "tri.json", r#"{"n": 3, "d": [[0,1,3],[1,0,1],[3,1,0]]}"#);
    let out = quadmetric(&["certify-upto5", s(&tri)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["results"]["reason"], "triangle");

    let six = write(&dir, "six.json", r#"{"dim": 1, "points": [[0],[1],[2],[3],[4],[5]]}"#);
    let out = quadmetric(&["certify-upto5", s(&six)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn search_on_c4_finds_a_verified_violation() {
    let dir = TempDir::new().unwrap();
    let c4 = write(&dir, "c4.json", C4);
    let out = quadmetric(&["search-ann-violation", s(&c4), "--restarts", "10", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["results"]["found_violation"], true);
    assert!(r["results"]["recheck_gap"].as_f64().unwrap() <= -0.9);
    assert_eq!(r["witnesses"][0]["kind"], "ann_plan");
}

#[test]
fn search_on_a_single_point_passes() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "one.json", r#"{"n": 1, "d": [[0]]}"#);
    let out = quadmetric(&["search-ann-violation", s(&f), "--restarts", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["found_violation"], false);
    assert_eq!(r["results"]["best_gap"], 0.0);
}

#[test]
fn out_file_matches_stdout_and_reruns_are_identical() {
    let dir = TempDir::new().unwrap();
    let c4 = write(&dir, "c4.json", C4);
    let args = ["search-ann-violation", s(&c4), "--restarts", "5", "--seed", "11"];
    let a = quadmetric(&args);
    let b = quadmetric(&args);
    assert_eq!(a.stdout, b.stdout);
    let path = dir.path().join("report.json");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", s(&path)]);
    let c = quadmetric(&with_out);
    assert_eq!(c.status.code(), a.status.code());
    assert!(c.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
}

#[test]
fn build_lebedeva_reports_constants() {
    let out = quadmetric(&["build-lebedeva"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let inst = &r["results"]["instance"];
    let c = inst["C"].as_f64().unwrap();
    assert!(c > 0.0 && c < 1e-3, "{c}");
    assert_eq!(inst["C_terms"].as_array().unwrap().len(), 4);
    assert_eq!(inst["y0"], json!([0.0, 0.0, 0.0]));
    assert_eq!(inst["gamma"], 1.0);

    let out = quadmetric(&["build-lebedeva", "--gamma-grid"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let table = r["results"]["gamma_grid"].as_array().unwrap();
    assert_eq!(table.len(), 13);
    let best = table.iter().map(|row| row["C"].as_f64().unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r["results"]["instance"]["C"].as_f64().unwrap(), best);
}

#[test]
fn bad_instance_names_the_failed_condition() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "bad.json",
        r#"{"points": [[1,0,0],[0,1,0],[-1,0,0],[0,-1,0],[0,0,1],[0,0.1,-1]]}"#,
    );
    let out = quadmetric(&["build-lebedeva", "--instance", s(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["results"]["kind"], "CrossingOnEdge");

    let short = write(&dir, "short.json", r#"{"points": [[1,0,0]]}"#);
    let out = quadmetric(&["build-lebedeva", "--instance", s(&short)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["results"]["kind"], "schema");
}

#[test]
fn verify_lebedeva_rejects_out_of_range_epsilon() {
    for args in [["--epsilon-fraction", "1.5"], ["--epsilon-fraction", "0"], ["--epsilon", "-1"]] {
        let mut full = vec!["verify-lebedeva", "--restarts", "1"];
        full.extend(args);
        let out = quadmetric(&full);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(report(&out)["results"]["kind"], "option");
    }
}

#[test]
fn verify_lebedeva_outside_the_range_is_flagged() {
    let out = quadmetric(&["verify-lebedeva", "--epsilon", "1e-3", "--restarts", "4"]);
    let r = report(&out);
    assert_eq!(r["results"]["within_certified_range"], false);
    assert!(r["results"]["non_embeddability"].as_str().unwrap().contains("not computationally verified"));
}

#[test]
fn verify_euclidean_is_deterministic() {
    let a = quadmetric(&["verify-euclidean", "--count", "50", "--seed", "4"]);
    let b = quadmetric(&["verify-euclidean", "--count", "50", "--seed", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let empty = report(&quadmetric(&["verify-euclidean", "--count", "0"]));
    assert_eq!(empty["results"]["worst_residual"], Value::Null);
    assert_eq!(quadmetric(&["verify-euclidean", "--dim", "0"]).status.code(), Some(2));
}

#[test]
fn every_float_has_17_significant_digits() {
    let out = quadmetric(&["build-lebedeva"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut seen = 0;
    for token in text.split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']') {
        if token.contains('e') && token.chars().next().is_some_and(|c| c == '-' || c.is_ascii_digit()) {
            let mantissa = token.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{token}");
            seen += 1;
        }
    }
    assert!(seen > 20);
}
