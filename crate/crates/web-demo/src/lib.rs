//! Browser bindings: each operation takes the form fields of the demo page
//! and returns the JSON report the CLI would print for the same job.

use metrisability::job::{cmd_check, cmd_tractor, JobError, JobSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn ode_job(a: [&str; 4], x: &str, y: &str) -> Result<JobSpec, JobError> {
    let job = json!({
        "kind": "ode",
        "A0": a[0], "A1": a[1], "A2": a[2], "A3": a[3],
        "points": [[x, y]],
    });
    JobSpec::from_json(&job.to_string())
}

fn metric_job(e: &str, f: &str, g: &str, x: &str, y: &str) -> Result<JobSpec, JobError> {
    let job = json!({ "kind": "metric", "E": e, "F": f, "G": g, "points": [[x, y]] });
    JobSpec::from_json(&job.to_string())
}

fn render(r: Result<Value, JobError>) -> String {
    let v = r.unwrap_or_else(|e| json!({ "error": e }));
    serde_json::to_string_pretty(&v).unwrap_or_else(|_| Value::Null.to_string())
}

/// Metrisability verdict for `y'' = A0 + A1 y' + A2 y'^2 + A3 y'^3` at `(x, y)`.
pub fn check_ode(a0: &str, a1: &str, a2: &str, a3: &str, x: &str, y: &str) -> String {
    render(ode_job([a0, a1, a2, a3], x, y).and_then(|j| cmd_check(&j)).map(|r| serde_json::to_value(r).expect("reports serialise")))
}

/// Tractor determinant and its projective-change invariance at `(x, y)`.
pub fn tractor_ode(a0: &str, a1: &str, a2: &str, a3: &str, x: &str, y: &str) -> String {
    render(ode_job([a0, a1, a2, a3], x, y).and_then(|j| cmd_tractor(&j)).map(|r| serde_json::to_value(r).expect("reports serialise")))
}

/// Verdict for the geodesic structure of the metric `E dx² + 2F dx dy + G dy²`.
pub fn check_metric(e: &str, f: &str, g: &str, x: &str, y: &str) -> String {
    render(metric_job(e, f, g, x, y).and_then(|j| cmd_check(&j)).map(|r| serde_json::to_value(r).expect("reports serialise")))
}

#[wasm_bindgen(js_name = checkOde)]
pub fn check_ode_js(a0: &str, a1: &str, a2: &str, a3: &str, x: &str, y: &str) -> String {
    check_ode(a0, a1, a2, a3, x, y)
}

#[wasm_bindgen(js_name = tractorOde)]
pub fn tractor_ode_js(a0: &str, a1: &str, a2: &str, a3: &str, x: &str, y: &str) -> String {
    tractor_ode(a0, a1, a2, a3, x, y)
}

#[wasm_bindgen(js_name = checkMetric)]
pub fn check_metric_js(e: &str, f: &str, g: &str, x: &str, y: &str) -> String {
    check_metric(e, f, g, x, y)
}
