use std::collections::BTreeMap;
use std::process::Command;

use dimerlab_cli::report::{Criterion, Scalar, Table};
use dimerlab_cli::{render, run, ExperimentConfig, Format, Report};
use proptest::prelude::*;
use serde_json::{json, Value};

fn config(v: Value) -> ExperimentConfig {
    ExperimentConfig::from_value(v).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dimerlab"))
}

#[test]
fn temperley_run_reports_all_equal() {
    let r = run(&config(json!({"experiment": "temperley", "params": {"grids": ["2x2", "3x3", "3x4"]}}))).unwrap();
    assert!(r.passed());
    assert_eq!(r.rows.len(), 3);
    let eq = r.columns.iter().position(|c| c == "equal").unwrap();
    assert!(r.rows.iter().all(|row| row[eq] == json!(true)));
    assert_eq!(&r.columns[r.columns.len() - 2..], ["method", "error_bound"]);
}

#[test]
fn every_table_carries_method_and_error_bound() {
    let dir = tempfile::tempdir().unwrap();
    let region = dir.path().join("region.txt");
    std::fs::write(&region, "; a 2x4 block over a domino\n####\n####\n.##.\n").unwrap();
    let configs = [
        json!({"experiment": "count", "params": {"regions": [region]}}),
        json!({"experiment": "greens", "params": {"grids": ["2x2"], "shapes": false}}),
        json!({"experiment": "cut-constants", "params": {"steps": 4}}),
        json!({"experiment": "schwarzian", "params": {"seed": 3, "pairs": 2}}),
        json!({"experiment": "two-hole", "params": {"sizes": [2]}}),
        json!({"experiment": "exactness", "params": {"seed": 5, "regions": 6, "subgraphs": 4}}),
    ];
    for c in configs {
        let r = run(&config(c)).unwrap();
        assert_eq!(&r.columns[r.columns.len() - 2..], ["method", "error_bound"], "{}", r.experiment);
        assert!(r.rows.iter().all(|row| row.len() == r.columns.len()));
        assert!(r.passed(), "{}: {:?}", r.experiment, r.criteria);
    }
}

#[test]
fn runs_are_reproducible_and_parallel_matches_sequential() {
    let base = json!({"experiment": "exactness", "params": {"seed": 9, "regions": 8, "subgraphs": 6}});
    let a = run(&config(base.clone())).unwrap();
    let b = run(&config(base.clone())).unwrap();
    assert_eq!(a.rows, b.rows);
    let mut par = base;
    par["parallel"] = json!(true);
    let c = run(&config(par)).unwrap();
    assert_eq!(a.rows, c.rows);
    let other = run(&config(json!({"experiment": "exactness", "params": {"seed": 10, "regions": 8, "subgraphs": 6}}))).unwrap();
    assert_ne!(a.rows, other.rows);
}

#[test]
fn two_hole_accepts_ascii_regions_with_a_base() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("p.txt");
    // The 3x3 square minus its lower-left corner, which is the base square.
    std::fs::write(&f, "###\n###\nX##\n").unwrap();
    let r = run(&config(json!({"experiment": "two-hole", "params": {"sizes": [], "regions": [f]}}))).unwrap();
    assert!(r.passed(), "{:?}", r.criteria);
    assert!(!r.rows.is_empty());
    std::fs::write(&f, "###\n###\n.##\n").unwrap();
    let e = run(&config(json!({"experiment": "two-hole", "params": {"sizes": [], "regions": [f]}}))).unwrap_err();
    assert!(e.to_string().contains("no base square"), "{e}");
}

#[test]
fn corner_law_reads_polygon_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("square.json");
    std::fs::write(&f, r#"{"corners": [[0,0],[1,0],[1,1],[0,1]], "base": [0,0]}"#).unwrap();
    let r = run(&config(json!({"experiment": "corner-law", "params": {"polygons": [f], "mesh": 0.0078125, "deltas": [0.25, 0.125, 0.0625, 0.03125]}}))).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.passed(), "{:?}", r.criteria);
}

fn sample_report(rows: Vec<Vec<Value>>) -> Report {
    let mut t = Table::new(&["a", "b"]);
    for r in rows {
        t.push(r, "test", Some(1e-3));
    }
    let mut summary = BTreeMap::new();
    summary.insert("x".into(), Scalar::new(0.1, "m", None));
    Report {
        experiment: "sample".into(),
        inputs: json!({"k": [1, 2]}),
        columns: t.columns,
        rows: t.rows,
        summary,
        criteria: vec![Criterion::new("c", "d | with pipe", true, "ok")],
        diagnostics: vec![Criterion::new("e", "f", false, "no")],
        versions: BTreeMap::new(),
        wall_time_s: 0.25,
    }
}

#[test]
fn csv_has_one_line_per_row_plus_header() {
    let r = sample_report(vec![vec![json!(1), json!("x,y")], vec![json!(2.5), Value::Null], vec![json!(true), json!("z")]]);
    let csv = String::from_utf8(render(&r, Format::Csv)).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(reader.headers().unwrap().len(), 4);
    assert_eq!(reader.records().count(), 3);
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn markdown_has_the_summary_line() {
    let md = String::from_utf8(render(&sample_report(vec![vec![json!(1), json!(2)]]), Format::Markdown)).unwrap();
    assert!(md.contains("**PASS**: 1 of 1 criteria passed"), "{md}");
    assert!(md.contains("d \\| with pipe"));
    assert!(md.contains("Diagnostics (not gating)"));
}

#[test]
fn binary_reports_config_errors_with_paths_and_exit_codes() {
    let out = bin().args(["run", "temperley", "--grids", "2x2,2y3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.grids[1]"));

    let out = bin().args(["run", "lerw-exponent"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.seed"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": "rect-expansion", "params": {"sizes": [16, -1]}}"#).unwrap();
    let out = bin().args(["run", "rect-expansion", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.sizes[1]"));

    let out = bin().args(["run", "temperley", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment"));
}

#[test]
fn binary_writes_json_and_csv_and_exit_code_tracks_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let (j, c) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    let out = bin().args(["run", "rect-expansion", "--sizes", "16,24", "--precision", "96", "--json"]).arg(&j).arg("--csv").arg(&c).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let bytes = std::fs::read(&j).unwrap();
    assert_eq!(out.stdout, bytes);
    let report = Report::from_json(&bytes).unwrap();
    assert_eq!(render(&report, Format::Json), bytes);
    assert_eq!(report.inputs["precision_bits"], json!(96));
    assert_eq!(std::fs::read_to_string(&c).unwrap().lines().count(), report.rows.len() + 1);

    // An impossible bound makes the criterion fail and the exit code 1.
    let out = bin().args(["run", "rect-expansion", "--sizes", "16,24", "--set", "bound_constant=1e-9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().args(["render"]).arg(&j).args(["--format", "markdown"]).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("criteria passed"));
}

#[test]
fn precision_defaults_to_the_environment() {
    let out = bin().env("DIMERLAB_PRECISION", "80").args(["run", "rect-expansion", "--sizes", "16,24"]).output().unwrap();
    let report = Report::from_json(&out.stdout).unwrap();
    assert_eq!(report.inputs["precision_bits"], json!(80));
    let out = bin().env("DIMERLAB_PRECISION", "lots").args(["run", "rect-expansion", "--sizes", "16,24"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("precision_bits"));
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|i| json!(i)),
        any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(|x| json!(x)),
        "[ -~]{0,12}".prop_map(Value::String),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_render_round_trips_byte_for_byte(rows in proptest::collection::vec(proptest::collection::vec(value(), 2), 0..6), wall in 0.0f64..1e4) {
        let mut r = sample_report(rows);
        r.wall_time_s = wall;
        let bytes = render(&r, Format::Json);
        let back = Report::from_json(&bytes).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(render(&back, Format::Json), bytes);
        let csv = render(&r, Format::Csv);
        prop_assert_eq!(csv::Reader::from_reader(csv.as_slice()).records().count(), r.rows.len());
    }
}
