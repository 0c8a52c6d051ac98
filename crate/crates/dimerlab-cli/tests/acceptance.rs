//! Acceptance suite: each criterion runs through the experiment runner and prints one
//! PASS/FAIL line. Non-gating comparisons follow as indented diagnostic lines.

use std::process::ExitCode;
use std::time::Instant;

use dimerlab_cli::report::Criterion;
use dimerlab_cli::{run, ExperimentConfig};
use serde_json::{json, Value};

fn criteria() -> Vec<(u32, &'static str, Vec<Value>)> {
    vec![
        (1, "exactness suite", vec![json!({"experiment": "exactness", "params": {"seed": 1}})]),
        (2, "Green's-function identity", vec![json!({"experiment": "greens"})]),
        (3, "rectangle expansion", vec![json!({"experiment": "rect-expansion", "precision_bits": 128})]),
        (4, "rectangle energy closed form", vec![json!({"experiment": "energy"})]),
        (5, "corner law", vec![json!({"experiment": "corner-law"})]),
        (6, "universal constant", vec![json!({"experiment": "main2"})]),
        (7, "Schwarzian and energy identity", vec![json!({"experiment": "schwarzian", "params": {"seed": 7}})]),
        (8, "cut constants", vec![json!({"experiment": "cut-constants"})]),
        (9, "two-hole bijection", vec![json!({"experiment": "two-hole"})]),
        (10, "LERW exponent", vec![json!({"experiment": "lerw-exponent", "params": {"seed": 1}})]),
        (
            11,
            "ratio law",
            vec![json!({"experiment": "lerw-ratio"}), json!({"experiment": "lerw-profile", "params": {"seed": 2}})],
        ),
        (12, "slit-plane decay", vec![json!({"experiment": "slit-greens"})]),
    ]
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let mut passed = 0;
    let all = criteria();
    for (number, title, configs) in &all {
        let t0 = Instant::now();
        let mut checks: Vec<Criterion> = Vec::new();
        let mut diagnostics: Vec<Criterion> = Vec::new();
        let mut errors: Vec<String> = Vec::new();
        for c in configs {
            match ExperimentConfig::from_value(c.clone()).map_err(|e| e.to_string()).and_then(|cfg| run(&cfg).map_err(|e| e.to_string())) {
                Ok(r) => {
                    checks.extend(r.criteria);
                    diagnostics.extend(r.diagnostics);
                }
                Err(e) => errors.push(e),
            }
        }
        let ok = errors.is_empty() && !checks.is_empty() && checks.iter().all(|c| c.passed);
        passed += ok as usize;
        let detail: Vec<String> = checks.iter().map(|c| format!("{} {} [{}]", c.id, status(c.passed), c.measured)).chain(errors.iter().map(|e| format!("error: {e}"))).collect();
        println!("criterion {number}: {} {title}: {} ({:.1} s)", status(ok), detail.join("; "), t0.elapsed().as_secs_f64());
        for d in &diagnostics {
            println!("    diagnostic {number} {}: {} {} [{}]", d.id, status(d.passed), d.description, d.measured);
        }
    }
    println!("acceptance: {passed}/{} criteria passed", all.len());
    if passed == all.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
