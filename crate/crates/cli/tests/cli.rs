use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn progress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_progress"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) {
    let mut full = args.to_vec();
    full.extend(["--run-dir", dir.to_str().unwrap()]);
    let out = progress(&full);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn no_arguments_print_usage_and_exit_2() {
    let out = progress(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_exits_2() {
    let out = progress(&["generate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let out = progress(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configuration_exits_2_with_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = progress(&[
        "integrate",
        "--folds",
        "1",
        "--run-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["exit_code"], 2);
}

#[test]
fn missing_input_exits_1_with_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = progress(&["harmonize", "--run-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let line = String::from_utf8_lossy(&out.stderr);
    let err: Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("integrated.jsonl"));
    assert_eq!(err["error"]["exit_code"], 1);
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(a.path(), &["generate", "--n", "100", "--seed", "7"]);
    run_ok(b.path(), &["generate", "--n", "100", "--seed", "7"]);
    for f in [
        "csf.csv",
        "visits.csv",
        "demographics.csv",
        "ground_truth.jsonl",
    ] {
        let x = std::fs::read(a.path().join("data").join(f)).unwrap();
        let y = std::fs::read(b.path().join("data").join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
    let c = tempfile::tempdir().unwrap();
    run_ok(c.path(), &["generate", "--n", "100", "--seed", "8"]);
    assert_ne!(
        std::fs::read(a.path().join("data/visits.csv")).unwrap(),
        std::fs::read(c.path().join("data/visits.csv")).unwrap()
    );
}

#[test]
fn later_stages_inherit_the_recorded_configuration() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &["generate", "--n", "80", "--seed", "5", "--horizons", "1,4"],
    );
    run_ok(dir.path(), &["integrate"]);
    let cfg = read_json(&dir.path().join("config.json"));
    assert_eq!(cfg["subcommand"], "integrate");
    assert_eq!(cfg["config"]["seed"], 5);
    assert_eq!(cfg["config"]["horizons"], serde_json::json!([1.0, 4.0]));
    assert_eq!(cfg["config"]["generator"]["n_subjects"], 80);

    // an explicit partial configuration file replaces the recorded one
    let file = dir.path().join("custom.json");
    std::fs::write(&file, r#"{"seed": 9, "folds": 3}"#).unwrap();
    run_ok(
        dir.path(),
        &[
            "integrate",
            "--config",
            file.to_str().unwrap(),
            "--repeats",
            "2",
        ],
    );
    let cfg = read_json(&dir.path().join("config.json"));
    assert_eq!(cfg["config"]["seed"], 9);
    assert_eq!(cfg["config"]["folds"], 3);
    assert_eq!(cfg["config"]["repeats"], 2);
    assert_eq!(
        cfg["config"]["horizons"],
        serde_json::json!([2.0, 3.0, 5.0])
    );
}

#[test]
fn full_pipeline_on_200_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["generate", "--n", "200", "--seed", "3"]);
    for step in [
        "integrate",
        "harmonize",
        "fit-trajectories",
        "train-traj",
        "train-surv",
        "predict",
        "evaluate",
    ] {
        run_ok(d, &[step]);
    }
    let out = progress(&[
        "cv-compare",
        "--folds",
        "3",
        "--repeats",
        "1",
        "--run-dir",
        d.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "too few folds for the paired tests"
    );
    for step in ["cv-compare", "loco", "fairness"] {
        run_ok(
            d,
            &[
                step,
                "--folds",
                "5",
                "--repeats",
                "1",
                "--min-center-n",
                "5",
            ],
        );
    }

    let metrics = read_json(&d.join("metrics.json"));
    for section in [
        "cohort",
        "harmonization",
        "trajectory",
        "survival",
        "comparison",
        "oracle",
    ] {
        assert!(!metrics[section].is_null(), "missing {section}");
    }
    let schema =
        read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/metrics.schema.json"));
    schema_check::validate(&schema, &schema, &metrics, "$").unwrap();

    let n = metrics["cohort"]["n_subjects"].as_u64().unwrap() as usize;
    let risk = std::fs::read_to_string(d.join("tables/risk_scores.csv")).unwrap();
    let mut lines = risk.lines();
    assert_eq!(
        lines.next().unwrap(),
        "subject_id,split,psi,S2yr,S3yr,S5yr,median_survival,linear_psi"
    );
    assert_eq!(lines.count(), n);
    let hazard = std::fs::read_to_string(d.join("tables/baseline_hazard.csv")).unwrap();
    assert!(hazard.starts_with("time,H0\n"));

    let cv = read_json(&d.join("cv_compare.json"));
    assert_eq!(cv["rows"].as_array().unwrap().len(), 2 * 5);
    assert_eq!(cv["tests"].as_array().unwrap().len(), 3);
    let loco = read_json(&d.join("loco.json"));
    assert!(!loco["centers"].as_array().unwrap().is_empty());
    let fairness = read_json(&d.join("fairness.json"));
    assert_eq!(
        fairness["report"]["overall"]["n"].as_u64().unwrap() as usize,
        n
    );
    for model in [
        "harmonizer",
        "mixed_model",
        "trajnet",
        "survnet",
        "linear_cox",
    ] {
        assert!(
            d.join("models").join(format!("{model}.json")).exists(),
            "{model}"
        );
    }
}

/// Validator for the JSON Schema (draft-07) keywords used by the shipped
/// schemas. Unsupported keywords are reported as errors rather than ignored.
mod schema_check {
    use serde_json::Value;

    fn type_matches(name: &str, v: &Value) -> bool {
        match name {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "number" => v.is_number(),
            "integer" => v.is_i64() || v.is_u64(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            _ => false,
        }
    }

    fn resolve<'a>(root: &'a Value, reference: &str) -> Result<&'a Value, String> {
        let pointer = reference
            .strip_prefix('#')
            .ok_or_else(|| format!("unsupported $ref {reference}"))?;
        root.pointer(pointer)
            .ok_or_else(|| format!("dangling $ref {reference}"))
    }

    pub fn validate(root: &Value, schema: &Value, v: &Value, at: &str) -> Result<(), String> {
        let obj = schema
            .as_object()
            .ok_or_else(|| format!("{at}: schema is not an object"))?;
        let fail = |msg: String| Err(format!("{at}: {msg}"));
        for (key, rule) in obj {
            match key.as_str() {
                "$schema" | "$id" | "title" | "description" | "definitions" => {}
                "$ref" => validate(root, resolve(root, rule.as_str().unwrap())?, v, at)?,
                "type" => {
                    let names: Vec<&str> = match rule {
                        Value::String(s) => vec![s.as_str()],
                        Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
                        _ => return fail("bad type keyword".into()),
                    };
                    if !names.iter().any(|n| type_matches(n, v)) {
                        return fail(format!("expected {names:?}, found {v}"));
                    }
                }
                "enum" => {
                    if !rule.as_array().unwrap().contains(v) {
                        return fail(format!("{v} not in {rule}"));
                    }
                }
                "required" => {
                    for name in rule.as_array().unwrap().iter().filter_map(Value::as_str) {
                        if v.is_object() && v.get(name).is_none() {
                            return fail(format!("missing property {name}"));
                        }
                    }
                }
                "properties" => {
                    if let Some(o) = v.as_object() {
                        for (name, sub) in rule.as_object().unwrap() {
                            if let Some(child) = o.get(name) {
                                validate(root, sub, child, &format!("{at}.{name}"))?;
                            }
                        }
                    }
                }
                "additionalProperties" => {
                    if let Some(o) = v.as_object() {
                        let declared = obj.get("properties").and_then(Value::as_object);
                        for (name, child) in o {
                            if declared.is_some_and(|d| d.contains_key(name)) {
                                continue;
                            }
                            match rule {
                                Value::Bool(false) => {
                                    return fail(format!("unexpected property {name}"))
                                }
                                Value::Bool(true) => {}
                                sub => validate(root, sub, child, &format!("{at}.{name}"))?,
                            }
                        }
                    }
                }
                "items" => {
                    if let Some(a) = v.as_array() {
                        for (i, child) in a.iter().enumerate() {
                            validate(root, rule, child, &format!("{at}[{i}]"))?;
                        }
                    }
                }
                "minItems" | "maxItems" => {
                    if let Some(a) = v.as_array() {
                        let bound = rule.as_u64().unwrap() as usize;
                        let ok = if key == "minItems" {
                            a.len() >= bound
                        } else {
                            a.len() <= bound
                        };
                        if !ok {
                            return fail(format!("{key} {bound} violated by length {}", a.len()));
                        }
                    }
                }
                "minimum" | "maximum" | "exclusiveMinimum" => {
                    if let (Some(x), Some(b)) = (v.as_f64(), rule.as_f64()) {
                        let ok = match key.as_str() {
                            "minimum" => x >= b,
                            "maximum" => x <= b,
                            _ => x > b,
                        };
                        if !ok {
                            return fail(format!("{x} violates {key} {b}"));
                        }
                    }
                }
                "oneOf" => {
                    let matches = rule
                        .as_array()
                        .unwrap()
                        .iter()
                        .filter(|s| validate(root, s, v, at).is_ok())
                        .count();
                    if matches != 1 {
                        return fail(format!("{matches} oneOf branches match"));
                    }
                }
                other => return fail(format!("unsupported schema keyword {other}")),
            }
        }
        Ok(())
    }

    #[test]
    fn rejects_violations() {
        let schema = serde_json::json!({
            "type": "object",
            "required": ["a"],
            "additionalProperties": false,
            "properties": {"a": {"type": "array", "items": {"type": "number", "minimum": 0}, "maxItems": 2}}
        });
        assert!(validate(&schema, &schema, &serde_json::json!({"a": [1, 2]}), "$").is_ok());
        for bad in [
            serde_json::json!({}),
            serde_json::json!({"a": [1, -1]}),
            serde_json::json!({"a": [1, 2, 3]}),
            serde_json::json!({"a": [], "b": 1}),
            serde_json::json!({"a": ["x"]}),
        ] {
            assert!(validate(&schema, &schema, &bad, "$").is_err(), "{bad}");
        }
    }
}
