//! JSON job files and the reports produced for them.
//!
//! A job names a structure (ODE coefficients, a metric or a polynomial
//! right-hand side), the sample points, and the analysis settings. Each
//! command turns a job into a deterministic JSON report.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::expr::{parse_expr_with, EvalMode, Expr};
use crate::input_model::{ode_from_lambda, ode_from_metric, LambdaPoly, MetricInput, ProjectiveStructure};
use crate::invariants::{
    analyze_jets, liouville_l, matrix_m, nu5, summarize, AnalysisConfig, DerivativeTower,
    JetStructure, ObstructionReport, Verdict,
};
use crate::jets::Point;
use crate::linalg;
use crate::recovery::{recover, GridSpec, RecoveryConfig, RecoveryError, RecoveryReport};
use crate::scalar::Scalar;
use crate::tractor::{
    det_by_contraction, gradient_at, projective_change, tractor_data, transform_theta, TractorData,
    VolumeForm,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// A failure attributable to the job: bad syntax, a domain error at a point,
/// or settings that cannot support the requested command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobError {
    /// Machine-readable category, e.g. `parse`, `domain`, `order`.
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<String>,
}

impl JobError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        JobError {
            code,
            message: message.into(),
            field: None,
            point: None,
        }
    }

    fn field(mut self, f: &str) -> Self {
        self.field = Some(f.to_string());
        self
    }

    fn at(mut self, p: &Point) -> Self {
        self.point = Some(p.to_string());
        self
    }
}

impl std::fmt::Display for JobError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)?;
        if let Some(field) = &self.field {
            write!(f, " (field {field})")?;
        }
        if let Some(p) = &self.point {
            write!(f, " (at {p})")?;
        }
        Ok(())
    }
}

impl std::error::Error for JobError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Ode,
    Metric,
    Lambda,
}

/// A parameter sweep: the job is run once per value of `param`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub kind: JobKind,
    #[serde(rename = "A0", default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<String>,
    #[serde(rename = "A1", default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<String>,
    #[serde(rename = "A2", default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<String>,
    #[serde(rename = "A3", default, skip_serializing_if = "Option::is_none")]
    pub a3: Option<String>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<String>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_coeffs: Option<Vec<String>>,
    /// Named rational constants usable in every expression.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub points: Vec<Value>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub arithmetic: EvalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Potentials `f` of the projective changes `ω = df` tried by `tractor`.
    #[serde(default = "default_changes")]
    pub changes: Vec<String>,
}

fn default_order() -> usize {
    10
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_changes() -> Vec<String> {
    vec!["x+y".into(), "x*y".into()]
}

/// Wraps bare rational literals such as `1/2` (outside strings) in quotes,
/// so that `"points": [[0,0],[1/2,1/3]]` is accepted.
fn quote_bare_rationals(src: &str) -> String {
    let bytes = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    let mut in_string = false;
    while i < bytes.len() {
        let c = bytes[i];
        if in_string {
            out.push(c as char);
            if c == b'\\' && i + 1 < bytes.len() {
                out.push(bytes[i + 1] as char);
                i += 1;
            } else if c == b'"' {
                in_string = false;
            }
            i += 1;
            continue;
        }
        if c == b'"' {
            in_string = true;
            out.push('"');
            i += 1;
            continue;
        }
        if c == b'-' || c.is_ascii_digit() {
            let start = i;
            let mut j = i + 1;
            let num = |j: &mut usize| {
                while *j < bytes.len() && (bytes[*j].is_ascii_digit() || bytes[*j] == b'.') {
                    *j += 1;
                }
            };
            num(&mut j);
            if j < bytes.len() && bytes[j] == b'/' && j + 1 < bytes.len() && bytes[j + 1].is_ascii_digit() {
                j += 1;
                num(&mut j);
                out.push('"');
                out.push_str(&src[start..j]);
                out.push('"');
            } else {
                out.push_str(&src[start..j]);
            }
            i = j;
            continue;
        }
        // copy one UTF-8 character
        let ch = src[i..].chars().next().expect("char boundary");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

fn literal(v: &Value, params: &BTreeMap<String, BigRational>) -> Result<BigRational, JobError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(JobError::new("input", format!("expected a number, found {other}"))),
    };
    match parse_expr_with(&text, params) {
        Ok(Expr::Num(r)) => Ok(r),
        Ok(_) => Err(JobError::new("input", format!("`{text}` is not a rational constant"))),
        Err(e) => Err(JobError::new("parse", format!("`{text}`: {e}"))),
    }
}

impl JobSpec {
    pub fn from_json(src: &str) -> Result<JobSpec, JobError> {
        serde_json::from_str(&quote_bare_rationals(src))
            .map_err(|e| JobError::new("json", e.to_string()))
    }

    fn param_values(&self) -> Result<BTreeMap<String, BigRational>, JobError> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.params {
            let r = literal(v, &out).map_err(|e| e.field(&format!("params.{k}")))?;
            out.insert(k.clone(), r);
        }
        Ok(out)
    }

    pub fn sample_points(&self) -> Result<Vec<Point>, JobError> {
        if self.points.is_empty() {
            return Err(JobError::new("input", "at least one point is required").field("points"));
        }
        let none = BTreeMap::new();
        self.points
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let field = format!("points[{i}]");
                let Value::Array(xy) = v else {
                    return Err(JobError::new("input", "a point is a pair [x, y]").field(&field));
                };
                if xy.len() != 2 {
                    return Err(JobError::new("input", "a point is a pair [x, y]").field(&field));
                }
                let x = literal(&xy[0], &none).map_err(|e| e.field(&field))?;
                let y = literal(&xy[1], &none).map_err(|e| e.field(&field))?;
                Ok(Point::new(Scalar::Exact(x), Scalar::Exact(y)))
            })
            .collect()
    }

    /// The structure with parameters substituted (plus `extra` overrides).
    pub fn structure_with(
        &self,
        extra: &BTreeMap<String, BigRational>,
    ) -> Result<ProjectiveStructure, JobError> {
        let mut params = self.param_values()?;
        params.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        let parse = |field: &str, src: &Option<String>| -> Result<Expr, JobError> {
            let src = src
                .as_deref()
                .ok_or_else(|| JobError::new("input", "missing expression").field(field))?;
            parse_expr_with(src, &params)
                .map_err(|e| JobError::new("parse", format!("`{src}`: {e}")).field(field))
        };
        match self.kind {
            JobKind::Ode => {
                let a = [
                    parse("A0", &self.a0)?,
                    parse("A1", &self.a1)?,
                    parse("A2", &self.a2)?,
                    parse("A3", &self.a3)?,
                ];
                ProjectiveStructure::new(a).map_err(|e| JobError::new("model", e.to_string()))
            }
            JobKind::Metric => {
                let m = MetricInput::new(parse("E", &self.e)?, parse("F", &self.f)?, parse("G", &self.g)?);
                ode_from_metric(&m, &self.sample_points()?, self.arithmetic)
                    .map_err(|e| JobError::new("model", e.to_string()).field("E,F,G"))
            }
            JobKind::Lambda => {
                let srcs = self
                    .p_coeffs
                    .as_ref()
                    .ok_or_else(|| JobError::new("input", "missing coefficients").field("p_coeffs"))?;
                let coeffs = srcs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse(&format!("p_coeffs[{i}]"), &Some(s.clone())))
                    .collect::<Result<Vec<_>, _>>()?;
                let l = LambdaPoly::from_coeffs(coeffs)
                    .map_err(|e| JobError::new("model", e.to_string()).field("p_coeffs"))?;
                ode_from_lambda(&l).map_err(|e| JobError::new("model", e.to_string()).field("p_coeffs"))
            }
        }
    }

    pub fn structure(&self) -> Result<ProjectiveStructure, JobError> {
        self.structure_with(&BTreeMap::new())
    }

    /// One `(label, structure)` per sweep value, or a single unlabelled run.
    pub fn runs(&self) -> Result<Vec<(Option<String>, ProjectiveStructure)>, JobError> {
        match &self.sweep {
            None => Ok(vec![(None, self.structure()?)]),
            Some(sw) => sw
                .values
                .iter()
                .map(|v| {
                    let r = literal(v, &BTreeMap::new()).map_err(|e| e.field("sweep.values"))?;
                    let label = format!("{}={}", sw.param, Scalar::Exact(r.clone()));
                    let extra = BTreeMap::from([(sw.param.clone(), r)]);
                    Ok((Some(label), self.structure_with(&extra)?))
                })
                .collect(),
        }
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            order: self.order,
            tolerance: self.tolerance,
            mode: self.arithmetic,
            ..AnalysisConfig::default()
        }
    }

    fn require_order(&self, min: usize, what: &str) -> Result<(), JobError> {
        if self.order < min {
            return Err(JobError::new(
                "order",
                format!("{what} needs order at least {min}, job has {}", self.order),
            )
            .field("order"));
        }
        Ok(())
    }
}

fn jets_at(s: &ProjectiveStructure, p: &Point, job: &JobSpec) -> Result<JetStructure, JobError> {
    JetStructure::at(s, p, job.order, job.arithmetic)
        .map_err(|e| JobError::new("domain", e.to_string()).at(p))
}

/// The common envelope of every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report<T: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub input: JobSpec,
    pub runs: Vec<Run<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Run<T: Serialize> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub results: T,
}

fn envelope<T: Serialize>(command: &'static str, job: &JobSpec, runs: Vec<Run<T>>) -> Report<T> {
    Report {
        command,
        version: env!("CARGO_PKG_VERSION"),
        input: job.clone(),
        runs,
        summary: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantValues {
    pub point: Point,
    pub l1: Scalar,
    pub l2: Scalar,
    pub i1_coeffs: [Scalar; 2],
    pub nu5: Scalar,
    pub v: Vec<Scalar>,
    pub det_m: Scalar,
    pub rank_m: usize,
}

pub fn cmd_invariants(job: &JobSpec) -> Result<Report<Vec<InvariantValues>>, JobError> {
    job.require_order(5, "the matrix M")?;
    let points = job.sample_points()?;
    let mut runs = Vec::new();
    for (label, s) in job.runs()? {
        let mut results = Vec::new();
        for p in &points {
            let js = jets_at(&s, p, job)?;
            let err = |e: crate::jets::JetError| JobError::new("order", e.to_string()).at(p);
            let (l1, l2) = liouville_l(&js).map_err(err)?;
            let mut tower = DerivativeTower::new(&js).map_err(err)?;
            let m = matrix_m(&mut tower).map_err(err)?;
            let rank_m = linalg::rank_kernel(&m.rows, job.tolerance).rank;
            results.push(InvariantValues {
                point: p.clone(),
                i1_coeffs: [l1.value() * &Scalar::int(-6), l2.value() * &Scalar::int(-6)],
                l1: l1.value().clone(),
                l2: l2.value().clone(),
                nu5: nu5(&js).map_err(err)?,
                v: tower.word_value(&[]).map_err(err)?,
                det_m: m.det,
                rank_m,
            });
        }
        runs.push(Run { label, results });
    }
    Ok(envelope("invariants", job, runs))
}

pub fn cmd_check(job: &JobSpec) -> Result<Report<Vec<ObstructionReport>>, JobError> {
    job.require_order(8, "the verdict")?;
    let points = job.sample_points()?;
    let cfg = job.analysis_config();
    let mut runs = Vec::new();
    let mut verdicts = Vec::new();
    for (label, s) in job.runs()? {
        let mut results = Vec::new();
        for p in &points {
            let js = jets_at(&s, p, job)?;
            let r = analyze_jets(&js, &cfg).map_err(|e| JobError::new("domain", e.to_string()).at(p))?;
            verdicts.push(r.verdict);
            results.push(r);
        }
        runs.push(Run { label, results });
    }
    let mut report = envelope("check", job, runs);
    // runs of a sweep are different structures, so only a single run has a
    // summary verdict
    if job.sweep.is_none() {
        report.summary = Some(summarize(&verdicts));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeCheck {
    pub f: String,
    pub det_theta_hat: Scalar,
    /// `det Θ̂ / det Θ̄`, or `None` when `det Θ̄` vanishes.
    pub ratio: Option<Scalar>,
    pub invariant: bool,
    /// `Θ̂` recomputed from the changed connection agrees with `Θ̄` after the
    /// row and column operations.
    pub operations_agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TractorPoint {
    pub data: TractorData,
    pub det_by_contraction: Scalar,
    pub contraction_agrees: bool,
    pub det_m: Scalar,
    /// `det Θ̄ = 0` exactly when `det M = 0`.
    pub vanishing_agrees: bool,
    pub changes: Vec<ChangeCheck>,
}

/// Agreement of two determinants of `m`: exact equality, or a float
/// difference small against the Hadamard bound of `m`.
fn dets_agree(a: &Scalar, b: &Scalar, m: &linalg::Matrix, tol: f64) -> bool {
    match (a, b) {
        (Scalar::Exact(_), Scalar::Exact(_)) => a == b,
        _ => (a.to_f64() - b.to_f64()).abs() <= tol * linalg::hadamard_bound(m),
    }
}

fn matrices_close(a: &linalg::Matrix, b: &linalg::Matrix, tol: f64) -> bool {
    let scale = a
        .iter()
        .flatten()
        .map(|v| v.to_f64().abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| match (x, y) {
        (Scalar::Exact(_), Scalar::Exact(_)) => x == y,
        _ => (x.to_f64() - y.to_f64()).abs() <= tol * scale,
    })
}

/// Whether a determinant counts as zero for the vanishing comparison.
fn det_vanishes(det: &Scalar, m: &linalg::Matrix, tol: f64) -> bool {
    linalg::det_is_zero(det, m, tol)
}

pub fn cmd_tractor(job: &JobSpec) -> Result<Report<Vec<TractorPoint>>, JobError> {
    job.require_order(5, "the tractor matrix")?;
    let points = job.sample_points()?;
    let params = job.param_values()?;
    let changes: Vec<Expr> = job
        .changes
        .iter()
        .map(|f| {
            parse_expr_with(f, &params)
                .map_err(|e| JobError::new("parse", format!("`{f}`: {e}")).field("changes"))
        })
        .collect::<Result<_, _>>()?;
    let tol = job.tolerance;
    let mut runs = Vec::new();
    for (label, s) in job.runs()? {
        let mut results = Vec::new();
        for p in &points {
            let js = jets_at(&s, p, job)?;
            let derr = |e: String| JobError::new("domain", e).at(p);
            let data = tractor_data(&js).map_err(|e| derr(e.to_string()))?;
            let contraction =
                det_by_contraction(&data.theta, &VolumeForm::standard()).map_err(|e| derr(e.to_string()))?;
            let mut tower = DerivativeTower::new(&js).map_err(|e| derr(e.to_string()))?;
            let m = matrix_m(&mut tower).map_err(|e| derr(e.to_string()))?;
            let theta_zero = det_vanishes(&data.det_theta, &data.theta, tol);
            let m_zero = det_vanishes(&m.det, &m.rows, tol);
            let mut checks = Vec::new();
            for (src, f) in job.changes.iter().zip(&changes) {
                let hat = projective_change(&js, f, job.arithmetic).map_err(|e| derr(e.to_string()))?;
                let omega = gradient_at(f, p, job.arithmetic).map_err(|e| derr(e.to_string()))?;
                let transformed = transform_theta(&data.theta, omega);
                let ratio = (!theta_zero).then(|| &hat.det_theta / &data.det_theta);
                let invariant = if theta_zero {
                    det_vanishes(&hat.det_theta, &hat.theta, tol)
                } else {
                    dets_agree(&hat.det_theta, &data.det_theta, &data.theta, tol)
                };
                checks.push(ChangeCheck {
                    f: src.clone(),
                    det_theta_hat: hat.det_theta.clone(),
                    ratio,
                    invariant,
                    operations_agree: matrices_close(&transformed, &hat.theta, tol),
                });
            }
            results.push(TractorPoint {
                contraction_agrees: dets_agree(&contraction, &data.det_theta, &data.theta, tol),
                det_by_contraction: contraction,
                det_m: m.det,
                vanishing_agrees: theta_zero == m_zero,
                data,
                changes: checks,
            });
        }
        runs.push(Run { label, results });
    }
    Ok(envelope("tractor", job, runs))
}

/// Recovery outcome: a metric, or the reason none was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RecoveryOutcome {
    Recovered(Box<RecoveryReport>),
    Refused { verdict: Verdict, reason: String },
    Failed { reason: String },
}

impl RecoveryOutcome {
    fn exit_code(&self) -> i32 {
        match self {
            RecoveryOutcome::Recovered(_) => EXIT_OK,
            RecoveryOutcome::Refused { verdict, .. } => verdict.exit_code(),
            RecoveryOutcome::Failed { .. } => EXIT_INCONCLUSIVE,
        }
    }
}

pub fn cmd_recover(job: &JobSpec) -> Result<Report<RecoveryOutcome>, JobError> {
    job.require_order(8, "recovery")?;
    let points = job.sample_points()?;
    let grid = job.grid.clone().unwrap_or_else(|| GridSpec {
        center: (points[0].x.to_f64(), points[0].y.to_f64()),
        h: 0.05,
        n: 21,
    });
    let acfg = job.analysis_config();
    let mut runs = Vec::new();
    for (label, s) in job.runs()? {
        let outcome = match recover(&s, &grid, &acfg, &RecoveryConfig::default()) {
            Ok(r) => RecoveryOutcome::Recovered(Box::new(r)),
            Err(RecoveryError::Refused(v)) => RecoveryOutcome::Refused {
                verdict: v,
                reason: format!("verdict at the grid centre is {v:?}"),
            },
            Err(RecoveryError::Invariant(e)) => {
                return Err(JobError::new("domain", e.to_string()).field("grid.center"))
            }
            Err(RecoveryError::InvalidGrid) => {
                return Err(JobError::new("input", RecoveryError::InvalidGrid.to_string()).field("grid"))
            }
            Err(e) => RecoveryOutcome::Failed { reason: e.to_string() },
        };
        runs.push(Run { label, results: outcome });
    }
    Ok(envelope("recover", job, runs))
}

/// Exit status of a recovery report: the worst over its runs.
pub fn recovery_exit_code(report: &Report<RecoveryOutcome>) -> i32 {
    report
        .runs
        .iter()
        .map(|r| r.results.exit_code())
        .max()
        .unwrap_or(EXIT_OK)
}

/// Exit status of a check report.
pub fn check_exit_code(report: &Report<Vec<ObstructionReport>>) -> i32 {
    match report.summary {
        Some(v) => v.exit_code(),
        None => report
            .runs
            .iter()
            .flat_map(|r| r.results.iter().map(|o| o.verdict.exit_code()))
            .max()
            .unwrap_or(EXIT_OK),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestItem {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick built-in checks on the reference structures.
pub fn cmd_selftest() -> Vec<SelfTestItem> {
    let mut out = Vec::new();
    let mut push = |name, passed, detail: String| out.push(SelfTestItem { name, passed, detail });
    let cfg = AnalysisConfig::default();
    let flat = ProjectiveStructure::flat();
    match crate::invariants::analyze_point(&flat, &Point::origin(), &cfg) {
        Ok(r) => push(
            "flat structure",
            r.verdict == Verdict::MetrisableFlat && r.cartan.as_ref().and_then(|c| c.s_dim) == Some(6),
            format!("verdict {:?}", r.verdict),
        ),
        Err(e) => push("flat structure", false, e.to_string()),
    }
    let painleve = crate::expr::parse_expr("6*y^2+x")
        .ok()
        .and_then(|a0| ProjectiveStructure::new([a0, Expr::num(0), Expr::num(0), Expr::num(0)]).ok());
    if let Some(s) = painleve {
        match crate::invariants::analyze_point(&s, &Point::exact((1, 2), (1, 3)), &cfg) {
            Ok(r) => push(
                "Painleve I",
                r.verdict == Verdict::DegenerateKernel && r.rank_m == 3 && r.nu5.is_zero(),
                format!("verdict {:?}, rank M {}", r.verdict, r.rank_m),
            ),
            Err(e) => push("Painleve I", false, e.to_string()),
        }
    }
    let metric = MetricInput::new(
        crate::expr::parse_expr("1+x^2").expect("literal"),
        crate::expr::parse_expr("x*y").expect("literal"),
        crate::expr::parse_expr("2+y^2").expect("literal"),
    );
    let p = Point::exact((1, 3), (2, 5));
    match JetStructure::at(&metric.structure(), &p, 8, EvalMode::Rational) {
        Ok(js) => {
            let ok = (|| -> Option<bool> {
                let mut t = DerivativeTower::new(&js).ok()?;
                let m = matrix_m(&mut t).ok()?;
                let td = tractor_data(&js).ok()?;
                Some(m.det.is_zero() && td.det_theta.is_zero())
            })();
            push(
                "polynomial metric obstructions vanish",
                ok == Some(true),
                "det M and det Theta at (1/3, 2/5)".into(),
            );
        }
        Err(e) => push("polynomial metric obstructions vanish", false, e.to_string()),
    }
    out
}
