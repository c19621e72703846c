use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::Arc;

use serde_json::{json, Value};

use lt_core::local::{make_local_field, LocalFieldSpec, OFElem};

fn lt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is one JSON document ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(format!("{name}.schema.json"));
    let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).expect("schema parses")
}

fn assert_valid(name: &str, v: &Value) {
    let validator = jsonschema::validator_for(&schema(name)).expect("schema compiles");
    if let Err(e) = validator.validate(v) {
        panic!("{name} output breaks its schema: {e}\n{v}");
    }
}

fn config_file(tag: &str, content: &Value) -> PathBuf {
    let p = std::env::temp_dir().join(format!("lt-cli-{}-{tag}.json", std::process::id()));
    fs::write(&p, content.to_string()).expect("config written");
    p
}

fn q2(prec: i64) -> Arc<LocalFieldSpec> {
    make_local_field(2, 1, vec![0, 1], vec![vec![-2], vec![1]], prec).unwrap()
}

#[test]
fn iterate_prints_the_level_two_iterate() {
    let out = lt(&["iterate", "--p", "3", "--f", "standard", "--m", "2", "--deg", "9"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["pretty"], json!("9X+30X^3+27X^5+9X^7+X^9"));
    assert_eq!(v["m"], json!(2));
    assert_valid("iterate", &v);
}

#[test]
fn eisenstein_output_is_byte_exact() {
    let out = lt(&["eisenstein", "--p", "3", "--f", "standard", "--m", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim_end(), r#"{"Phi":"X^2+3","eisenstein":true}"#);
}

#[test]
fn verify_axioms_passes_and_exits_zero() {
    let out = lt(&["verify-axioms", "--p", "2", "--f", "standard", "--deg", "8"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["passed"], json!(true));
    let items = v["items"].as_array().unwrap();
    assert!(!items.is_empty());
    assert!(items.iter().all(|i| i["status"] == json!("pass")));
    assert_valid("verify-axioms", &v);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["af-gamma", "--p", "2", "--f", "standard", "--m", "20", "--seed", "42"];
    let first = lt(&args);
    let second = lt(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let reseeded = lt(&["af-gamma", "--p", "2", "--f", "standard", "--m", "20", "--seed", "43"]);
    assert!(reseeded.status.success());
    assert_ne!(first.stdout, reseeded.stdout, "the seed is part of the output");
}

#[test]
fn usage_errors_name_the_flag_and_exit_two() {
    let missing_a = lt(&["endo", "--p", "2", "--f", "standard"]);
    assert_eq!(missing_a.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_a.stderr).contains("--a"));

    let missing_p = lt(&["iterate"]);
    assert_eq!(missing_p.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_p.stderr).contains("--p"));

    let unknown = lt(&["iterate", "--p", "3", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("--bogus"));
}

#[test]
fn computation_errors_surface_module_error_names() {
    let out = lt(&["iterate", "--p", "4", "--f", "standard"]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    let msg = v["error"].as_str().unwrap();
    assert!(msg.starts_with("NotPrime"), "got: {msg}");
    assert_valid("error", &v);

    let out = lt(&["reciprocity", "--p", "2", "--f", "standard", "--m", "1", "--u", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stdout_json(&out)["error"].as_str().unwrap().to_string();
    assert!(msg.starts_with("NotAUnit"), "got: {msg}");
}

#[test]
fn config_file_merges_and_flags_override() {
    let cfg = config_file("merge", &json!({"p": 3, "f": "standard", "m": 1}));
    let cfg = cfg.to_str().unwrap();

    let from_file = lt(&["norm", "--config", cfg]);
    assert!(from_file.status.success());
    assert_eq!(stdout_json(&from_file)["pretty"], json!("3"));

    // the explicit flag beats the file: over Q_2 the level-one norm is -2
    let overridden = lt(&["norm", "--config", cfg, "--p", "2"]);
    assert!(overridden.status.success());
    assert_eq!(stdout_json(&overridden)["pretty"], json!("-2"));
}

#[test]
fn transcript_records_the_run() {
    let path = std::env::temp_dir().join(format!("lt-cli-{}-transcript.json", std::process::id()));
    let path_str = path.to_str().unwrap();
    let out = lt(&["norm", "--p", "3", "--f", "standard", "--m", "1", "--out", path_str]);
    assert!(out.status.success());
    let t: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(t["exit"], json!(0));
    assert_eq!(t["config"]["p"], json!(3));
    assert_eq!(t["output"], stdout_json(&out));
    assert!(t["argv"].as_array().unwrap().len() >= 8);
}

#[test]
fn solver_and_descent_configs_round_trip() {
    // x^q = pibar^2 x over the residue Laurent field of Q_3: the line
    // through pibar
    let cfg = config_file(
        "solve",
        &json!({"p": 3, "input": {"a": {"depth": 0, "trunc": 8, "terms": [{"e": 2, "c": 1}]}}}),
    );
    let out = lt(&["solve-modp", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["kind"], json!("line"));
    assert_eq!(v["basis"]["terms"], json!([{"c": [1], "e": "1"}]));
    assert_valid("solve-modp", &v);

    // beta = (1+pi)^2 over Q_2 has the exact square root 1+pi
    let cfg = config_file(
        "lt5",
        &json!({"p": 2, "prec": 8, "input": {"beta": {"terms": [[0, 1], [1, 2], [2, 1]], "hi": 20}}}),
    );
    let out = lt(&["lt5", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_valid("lt5", &v);
    let spec = q2(8);
    let alpha0 = OFElem::from_json(&spec, &v["alpha"]["coeffs"]["0"]).unwrap();
    let alpha1 = OFElem::from_json(&spec, &v["alpha"]["coeffs"]["1"]).unwrap();
    assert!(alpha0.same_value(&OFElem::one(&spec)));
    assert!(alpha1.same_value(&OFElem::one(&spec)));

    // unramified quadratic twist: eta(pi) = -1, trivial on units
    let cfg = config_file(
        "descend",
        &json!({"p": 2, "prec": 6, "input": {
            "order": 2,
            "character": {"pi_value": -1, "level": 1, "unit_values": {"-1": 1, "3": 1}},
            "zeta": {"value": -1, "order": 2}}}),
    );
    let out = lt(&["descend", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_valid("descend", &v);
    // one square root costs v(2) = 1 of the 6 carried digits
    assert_eq!(v["certified"], json!(5));
    let spec = q2(15);
    let twist = OFElem::from_json(&spec, &v["twist"]).unwrap();
    assert!(twist.same_value(&OFElem::from_i64(&spec, -1)));
    assert_eq!(v["report"]["passed"], json!(true));
}

#[test]
fn every_subcommand_output_validates() {
    let solve_cfg = config_file(
        "sweep-solve",
        &json!({"p": 3, "input": {"a": {"depth": 0, "trunc": 8, "terms": [{"e": 2, "c": 1}]}}}),
    );
    let lt4_cfg = config_file(
        "sweep-lt4",
        &json!({"p": 3, "input": {"form": "additive",
            "elem": {"depth": 1, "trunc": 6, "terms": [{"e": "1/3", "c": 2}]}}}),
    );
    let lt5_cfg = config_file(
        "sweep-lt5",
        &json!({"p": 2, "prec": 8, "input": {"beta": {"terms": [[0, 1], [1, 2], [2, 1]], "hi": 20}}}),
    );
    let descend_cfg = config_file(
        "sweep-descend",
        &json!({"p": 2, "prec": 6, "input": {
            "order": 2,
            "character": {"pi_value": -1, "level": 1, "unit_values": {"-1": 1, "3": 1}},
            "zeta": {"value": -1, "order": 2}}}),
    );
    let solve_cfg = solve_cfg.to_str().unwrap();
    let lt4_cfg = lt4_cfg.to_str().unwrap();
    let lt5_cfg = lt5_cfg.to_str().unwrap();
    let descend_cfg = descend_cfg.to_str().unwrap();

    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("group-law", vec!["group-law", "--p", "2", "--f", "cyclotomic", "--deg", "4"]),
        ("endo", vec!["endo", "--p", "2", "--f", "cyclotomic", "--a", "3", "--deg", "6"]),
        ("iterate", vec!["iterate", "--p", "2", "--f", "standard", "--m", "1", "--deg", "6"]),
        ("iso", vec!["iso", "--p", "2", "--f", "cyclotomic", "--deg", "6"]),
        ("verify-axioms", vec!["verify-axioms", "--p", "3", "--f", "standard", "--deg", "6"]),
        ("eisenstein", vec!["eisenstein", "--p", "2", "--f", "standard", "--m", "2"]),
        ("torsion-check", vec!["torsion-check", "--p", "2", "--f", "standard", "--m", "1"]),
        ("galois", vec!["galois", "--p", "2", "--f", "cyclotomic", "--m", "2", "--a", "3"]),
        ("norm", vec!["norm", "--p", "3", "--f", "standard", "--m", "1"]),
        ("reciprocity", vec!["reciprocity", "--p", "3", "--f", "standard", "--m", "1", "--u", "5"]),
        ("af-frobenius", vec!["af-frobenius", "--p", "2", "--f", "standard", "--m", "5"]),
        ("af-gamma", vec!["af-gamma", "--p", "3", "--f", "standard", "--m", "5"]),
        ("ve", vec!["ve", "--p", "2", "--f", "standard", "--m", "5"]),
        ("solve-modp", vec!["solve-modp", "--config", solve_cfg]),
        ("lt4", vec!["lt4", "--config", lt4_cfg]),
        ("lt5", vec!["lt5", "--config", lt5_cfg]),
        ("descend", vec!["descend", "--config", descend_cfg]),
    ];
    for (name, args) in cases {
        let out = lt(&args);
        assert!(
            out.status.success(),
            "{name} failed: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert_valid(name, &stdout_json(&out));
    }
}
