use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bicforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicforge"))
        .args(args)
        .env_remove("BICFORGE_JOBS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// Subset of JSON Schema used by the shipped schema:
// type, enum, required, properties, additionalProperties=false, items, min/maxItems, $ref, oneOf.
fn validate(root: &Value, schema: &Value, v: &Value) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/$defs/");
        return validate(root, &root["$defs"][name], v);
    }
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let hits = options.iter().filter(|s| validate(root, s, v).is_ok()).count();
        if hits != 1 {
            return Err(format!("{hits} oneOf branches match {v}"));
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(v) {
            return Err(format!("{v} not in {allowed:?}"));
        }
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let ok = types.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "number" => v.is_number(),
            "integer" => v.is_u64() || v.is_i64(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("{v} is not {types:?}"));
        }
    }
    if let Some(obj) = v.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                return Err(format!("missing `{key}`"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, child) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => validate(root, s, child).map_err(|e| format!("{k}: {e}"))?,
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("unexpected `{k}`"));
                }
                None => {}
            }
        }
    }
    if let Some(arr) = v.as_array() {
        if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
            if (arr.len() as u64) < min {
                return Err("too few items".into());
            }
        }
        if let Some(max) = schema.get("maxItems").and_then(Value::as_u64) {
            if arr.len() as u64 > max {
                return Err("too many items".into());
            }
        }
        if let Some(items) = schema.get("items") {
            for (i, x) in arr.iter().enumerate() {
                validate(root, items, x).map_err(|e| format!("[{i}]: {e}"))?;
            }
        }
    }
    Ok(())
}

fn assert_valid(v: &Value) {
    let s = schema();
    validate(&s, &s, v).unwrap();
}

#[test]
fn single_band_delta_bound() {
    let v = json(&bicforge(&["delta-bound", "--lambda", "-1", "--mass", "1"]));
    assert_eq!(v["e_b"], -0.5);
    assert_eq!(v["verdict"], "ConventionalBound");
    assert_valid(&v);
}

#[test]
fn two_band_delta_bound() {
    let v = json(&bicforge(&["delta-bound", "--two-band", "--mu", "0", "--g", "1", "--lambda", "-1"]));
    assert!((v["e_b"].as_f64().unwrap() - 0.875).abs() < 1e-12);
    assert_eq!(v["lambda_c"], -4.0);
    assert_eq!(v["verdict"], "QuasiBIC");
    assert!(v["boundary_residual"].as_f64().unwrap() < 1e-10);
    assert!(v["bare_extended_residual"].as_f64().unwrap() >= 1e-3);
    assert_valid(&v);

    let v = json(&bicforge(&["delta-bound", "--two-band", "--mu", "0", "--g", "1", "--b=-1,0,-1"]));
    assert_eq!(v["e_b"], 0.5);
    assert_eq!(v["verdict"], "ExactBIC");
    assert_valid(&v);
}

#[test]
fn repulsive_delta_has_no_bound_state() {
    let out = bicforge(&["delta-bound", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no bound state for repulsive delta"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["bic-verify", "--model", "soc", "--gamma", "0.5", "--nu", "0.7"][..],
        &["scan", "--range", "1:0:-5", "--param", "scale", "--model", "soc", "--gamma", "0.5", "--nu", "0.7", "--mu", "1"],
        &["delta-bound", "--frobnicate"],
        &["delta-bound", "--two-band", "--mu", "0", "--g", "1", "--b", "-1,0"],
        &["bic-verify", "--model-file", "m.json", "--mu", "1"],
        &[],
    ] {
        assert_eq!(bicforge(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(bicforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_limits_and_single_band() {
    assert_eq!(bicforge(&["oracle", "--n", "100000"]).status.code(), Some(4));
    let v = json(&bicforge(&["oracle", "--single-band", "--lambda", "-1", "--target", "-0.5", "--n", "1024", "--k", "3"]));
    let nearest = v["states"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["energy"].as_f64().unwrap())
        .min_by(|a, b| (a + 0.5).abs().total_cmp(&(b + 0.5).abs()))
        .unwrap();
    assert!((nearest + 0.5).abs() < 1e-2);
    assert_valid(&v);
}

#[test]
fn kernel_check_suite_and_degenerate_energy() {
    let v = json(&bicforge(&["kernel-check"]));
    assert_eq!(v["passed"], true);
    assert_valid(&v);
    let out = bicforge(&["kernel-check", "--energy", "1", "--mu", "0", "--g", "1"]);
    assert_eq!(out.status.code(), Some(5));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["rows"][0]["message"].as_str().unwrap().starts_with("DegeneratePoles"));
    assert_valid(&v);
}

#[test]
fn scan_rows_and_csv_header() {
    let args = [
        "scan", "--param", "nu", "--range", "0.6:0.8:3", "--model", "soc", "--gamma", "0.5", "--mu", "1",
        "--half-width", "20", "--n", "512", "--format", "csv",
    ];
    let out = bicforge(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,energy,residual_rel,tail_rel,verdict,candidate,error"));
    assert_eq!(lines.count(), 3);

    let mut json_args = args.to_vec();
    json_args.truncate(json_args.len() - 2);
    let v = json(&bicforge(&json_args));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_valid(&v);
}

#[test]
fn scan_records_row_errors() {
    // far too coarse for the real momentum: every row fails, the run does not
    let out = bicforge(&[
        "scan", "--param", "scale", "--range", "0.9:1.1:2", "--model", "soc", "--gamma", "0.5", "--nu", "0.7",
        "--mu", "1", "--half-width", "60", "--n", "128",
    ]);
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["error"].is_string() && r["verdict"].is_null()));
    assert_valid(&v);
}

#[test]
fn model_file_matches_inline_two_band() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(
        &path,
        r#"{
  "n_bands": 2,
  "a0": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]],
  "a1": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]],
  "b":  [[[-1, 0], [0, 0]], [[0, 0], [0, 0]]],
  "potential": { "kind": "delta", "lambda": 1.0 },
  "target": 0.875
}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let grid = ["--half-width", "30", "--n", "1024"];
    let mut from_file = vec!["bic-verify", "--model-file", p];
    from_file.extend(grid);
    let mut inline = vec!["bic-verify", "--two-band", "--mu", "0", "--g", "1", "--lambda", "-1"];
    inline.extend(grid);
    let a = json(&bicforge(&from_file));
    let b = json(&bicforge(&inline));
    assert_eq!(a["criterion"]["verdict"], "QuasiBIC");
    let (ea, eb) = (a["solver"]["energy"].as_f64().unwrap(), b["solver"]["energy"].as_f64().unwrap());
    assert!((ea - eb).abs() < 1e-9 && (ea - 0.875).abs() < 2e-3, "{ea} {eb}");
    assert_valid(&a);
    assert_valid(&b);

    std::fs::write(&path, r#"{"n_bands": 2, "a0": []}"#).unwrap();
    assert_eq!(bicforge(&["bic-verify", "--model-file", p]).status.code(), Some(1));
}

#[test]
fn bic_verify_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = dir.path().join("spectrum.tsv");
    let state = dir.path().join("state.tsv");
    let out = bicforge(&[
        "bic-verify", "--model", "soc", "--gamma", "0.5", "--nu", "0.7", "--mu", "1", "--n", "1024",
        "--window", "0.5:0.8", "--spectrum", spectrum.to_str().unwrap(), "--state", state.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert_valid(&v);
    let text = std::fs::read_to_string(&spectrum).unwrap();
    assert!(text.starts_with("# q\tnorm\tre_0\tim_0\tre_1\tim_1\n"));
    assert_eq!(text.lines().count(), 802);
    // channel-0 spectrum changes sign across each real pole
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|x| x.parse().unwrap()).collect())
        .collect();
    let p = v["criterion"]["real_poles"][1].as_f64().unwrap();
    for target in [-p, p] {
        let k = rows.iter().position(|r| r[0] > target).unwrap();
        assert!(rows[k - 2][2] * rows[k + 1][2] < 0.0, "no sign change at {target}");
    }
    assert!(std::fs::read_to_string(&state).unwrap().starts_with('#'));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let runs: [&[&str]; 3] = [
        &["delta-bound", "--two-band", "--mu", "0.3", "--g", "0.8", "--lambda", "-1.2", "--format", "csv"],
        &["kernel-check"],
        &[
            "scan", "--param", "scale", "--range", "0.95:1.05:3", "--model", "soc", "--gamma", "0.5", "--nu",
            "0.7", "--mu", "1", "--half-width", "20", "--n", "512", "--jobs", "2",
        ],
    ];
    for args in runs {
        let a = bicforge(args);
        let b = bicforge(args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let env = Command::new(env!("CARGO_BIN_EXE_bicforge"))
        .args(runs[2])
        .env("BICFORGE_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(env.stdout, bicforge(runs[2]).stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_bicforge"))
        .args(["kernel-check"])
        .env("BICFORGE_JOBS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
