#![allow(dead_code)]

use std::path::PathBuf;

use jsonschema::{Resource, Validator};
use serde_json::Value;

const NAMES: [&str; 5] = ["problem", "polyline", "scene", "leaves", "solid"];

fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn load(name: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(format!("{name}.schema.json"))).expect("schema file");
    serde_json::from_str(&text).expect("schema json")
}

/// Validator for one shipped schema, with its siblings registered for `$ref`.
pub fn validator(name: &str) -> Validator {
    let mut opts = jsonschema::options();
    for n in NAMES {
        let doc = load(n);
        let id = doc["$id"].as_str().expect("$id").to_string();
        opts = opts.with_resource(id, Resource::from_contents(doc).expect("resource"));
    }
    opts.build(&load(name)).expect("schema compiles")
}

pub fn assert_valid(name: &str, instance: &Value) {
    let v = validator(name);
    let errors: Vec<String> = v
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{name} schema: {errors:#?}");
}

pub const SQUARE: &str = r#"{"A": [[1, 0], [0, 1], [-1, 0], [0, -1]], "b": [1, 1, 1, 1], "c": [1, 1]}"#;

/// Maximiser of `c^T x` over a polygon, by enumerating intersections of row
/// pairs and keeping the feasible ones.
pub fn best_vertex(a: &[[f64; 2]], b: &[f64], c: [f64; 2]) -> [f64; 2] {
    let mut best: Option<([f64; 2], f64)> = None;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let det = a[i][0] * a[j][1] - a[i][1] * a[j][0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [
                (b[i] * a[j][1] - a[i][1] * b[j]) / det,
                (a[i][0] * b[j] - b[i] * a[j][0]) / det,
            ];
            let feasible = a.iter().zip(b).all(|(r, bi)| r[0] * x[0] + r[1] * x[1] <= bi + 1e-12);
            let val = c[0] * x[0] + c[1] * x[1];
            if feasible && best.is_none_or(|(_, v)| val > v) {
                best = Some((x, val));
            }
        }
    }
    best.expect("bounded polygon").0
}
