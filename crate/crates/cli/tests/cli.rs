use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn job(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../jobs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metrisability"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_job(cmd: &str, name: &str) -> (i32, Value) {
    let path = job(name);
    let out = run(&[cmd, "--input", path.to_str().unwrap()]);
    let v = serde_json::from_slice(&out.stdout).expect("JSON on stdout");
    (out.status.code().unwrap(), v)
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let (code, r) = run_job("check", "flat.json");
    assert_eq!((code, r["summary"].as_str()), (0, Some("MetrisableFlat")));
    let (code, r) = run_job("check", "painleve1.json");
    assert_eq!((code, r["summary"].as_str()), (1, Some("DegenerateKernel")));
    let (code, r) = run_job("check", "lambda_cubic.json");
    assert_eq!((code, r["summary"].as_str()), (1, Some("NotMetrisable")));
    assert_ne!(r["runs"][0]["results"][0]["det_m"], "0");
}

#[test]
fn invariants_of_painleve() {
    let (code, r) = run_job("invariants", "painleve1.json");
    assert_eq!(code, 0);
    for p in r["runs"][0]["results"].as_array().unwrap() {
        assert_eq!(p["l1"], "-12");
        assert_eq!(p["l2"], "0");
        assert_eq!(p["det_m"], "0");
        assert_eq!(p["nu5"], "0");
    }
}

#[test]
fn invariants_echo_the_input_and_version() {
    let (_, r) = run_job("invariants", "flat.json");
    assert_eq!(r["command"], "invariants");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["input"]["kind"], "ode");
}

#[test]
fn quartic_family_sweep_brackets_a_quartic_root() {
    // det M changes sign between c = 3 and c = 5 (root at c ≈ 3.07)
    let (_, r) = run_job("invariants", "quartic_family.json");
    let det = |label: &str| -> f64 {
        let run = r["runs"].as_array().unwrap().iter().find(|x| x["label"] == label).unwrap();
        let s = run["results"][0]["det_m"].as_str().unwrap();
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap()
    };
    assert!(det("c=3").signum() != det("c=5").signum());
}

#[test]
fn tractor_report_on_metric() {
    let (code, r) = run_job("tractor", "metric_polynomial.json");
    assert_eq!(code, 0);
    for p in r["runs"][0]["results"].as_array().unwrap() {
        assert_eq!(p["data"]["det_theta"], "0");
        assert_eq!(p["contraction_agrees"], true);
        assert_eq!(p["vanishing_agrees"], true);
        for c in p["changes"].as_array().unwrap() {
            assert_eq!(c["invariant"], true);
            assert_eq!(c["operations_agree"], true);
        }
    }
}

#[test]
fn tractor_ratio_is_one_for_generic_structure() {
    let (_, r) = run_job("tractor", "lambda_cubic.json");
    for c in r["runs"][0]["results"][0]["changes"].as_array().unwrap() {
        assert_eq!(c["ratio"], "1");
    }
}

#[test]
fn recover_exp_xy_and_refuse_painleve() {
    let (code, r) = run_job("recover", "exp_xy_c1.json");
    assert_eq!(code, 0);
    let res = &r["runs"][0]["results"];
    assert_eq!(res["status"], "recovered");
    assert!(res["round_trip_residual"].as_f64().unwrap() < 1e-6);
    let (code, r) = run_job("recover", "painleve1.json");
    assert_eq!(code, 1);
    assert_eq!(r["runs"][0]["results"]["status"], "refused");
    assert_eq!(r["runs"][0]["results"]["verdict"], "DegenerateKernel");
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = run(&["check", "--input", job("exp_xy_c0.json").to_str().unwrap()]);
    let b = run(&["check", "--input", job("exp_xy_c0.json").to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn mode_flag_overrides_the_job() {
    let path = job("painleve1.json");
    let out = run(&["check", "--input", path.to_str().unwrap(), "--mode", "float"]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["input"]["arithmetic"], "float");
    assert_eq!(r["runs"][0]["results"][0]["mode"], "float");
    assert_eq!(r["summary"], "DegenerateKernel");
}

#[test]
fn output_flag_writes_a_file() {
    let dir = std::env::temp_dir().join(format!("metrisability-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("report.json");
    let o = run(&["check", "--input", job("flat.json").to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["summary"], "MetrisableFlat");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn input_errors_exit_with_three() {
    let dir = std::env::temp_dir().join(format!("metrisability-cli-err-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cases = [
        ("syntax.json", r#"{"kind":"ode","A0":"6*y^","A1":"0","A2":"0","A3":"0","points":[[0,0]]}"#, "parse", Some("A0")),
        ("order.json", r#"{"kind":"ode","A0":"0","A1":"0","A2":"0","A3":"0","points":[[0,0]],"order":6}"#, "order", Some("order")),
        ("domain.json", r#"{"kind":"ode","A0":"log(x)","A1":"0","A2":"0","A3":"0","points":[[0,0]]}"#, "domain", None),
        ("points.json", r#"{"kind":"ode","A0":"0","A1":"0","A2":"0","A3":"0","points":[]}"#, "input", Some("points")),
        ("json.json", r#"{"kind":"ode""#, "json", None),
    ];
    for (name, src, code, field) in cases {
        let path = dir.join(name);
        std::fs::write(&path, src).unwrap();
        let o = run(&["check", "--input", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(3), "{name}");
        let r: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(r["error"]["code"], code, "{name}");
        if let Some(f) = field {
            assert_eq!(r["error"]["field"], f, "{name}");
        }
        assert!(!r["error"]["message"].as_str().unwrap().is_empty());
    }
    let o = run(&["check", "--input", dir.join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let items: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(items.as_array().unwrap().iter().all(|i| i["passed"] == true));
}
