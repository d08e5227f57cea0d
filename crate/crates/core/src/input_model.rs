//! Projective structures `y″ = A₀ + A₁y′ + A₂y′² + A₃y′³` and the ways to
//! obtain one: directly, from a metric, or from a right-hand side polynomial
//! in the slope `p = y′`.

use std::ops::{Add, Div, Mul, Sub};

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, EvalMode, Expr, Var};
use crate::jets::{Axis, Jet, Point};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Direct,
    FromMetric,
    FromLambda,
}

/// The four coefficients `A₀ … A₃` of the cubic right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveStructure {
    pub a: [Expr; 4],
    pub provenance: Provenance,
}

/// A symmetric form `E dx² + 2F dx dy + G dy²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricInput {
    pub e: Expr,
    pub f: Expr,
    pub g: Expr,
}

/// A right-hand side `Λ = c₀ + c₁p + … + c_d p^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaPoly {
    pub coeffs: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("right-hand side has degree {0} in the slope; a projective structure needs degree at most 3")]
    NotCubic(usize),
    #[error("right-hand side is not a polynomial in the slope: {0}")]
    NotPolynomial(String),
    #[error("degenerate metric at {0}: EG - F^2 = 0")]
    DegenerateMetric(Point),
    #[error("coefficient {0} must not contain the slope symbol p")]
    SlopeInCoefficient(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl ProjectiveStructure {
    pub fn new(a: [Expr; 4]) -> Result<Self, ModelError> {
        for (i, e) in a.iter().enumerate() {
            if e.mentions_slope() {
                return Err(ModelError::SlopeInCoefficient(format!("A{i}")));
            }
        }
        Ok(ProjectiveStructure {
            a,
            provenance: Provenance::Direct,
        })
    }

    pub fn flat() -> Self {
        ProjectiveStructure {
            a: std::array::from_fn(|_| Expr::num(0)),
            provenance: Provenance::Direct,
        }
    }

    /// Jets of `A₀ … A₃` at `base`.
    pub fn jets(&self, base: &Point, order: usize, mode: EvalMode) -> Result<[Jet; 4], EvalError> {
        let v: Vec<Jet> = self
            .a
            .iter()
            .map(|e| e.eval_jet(base, order, mode))
            .collect::<Result<_, _>>()?;
        Ok(v.try_into().expect("four coefficients"))
    }

    /// `Λ(p) = A₀ + A₁p + A₂p² + A₃p³` as an expression in `p`.
    pub fn lambda(&self) -> Expr {
        let p = Expr::p;
        self.a[0].clone()
            + self.a[1].clone() * p()
            + self.a[2].clone() * p().pow(2)
            + self.a[3].clone() * p().pow(3)
    }
}

/// The Levi-Civita projective structure of `E dx² + 2F dx dy + G dy²`,
/// generic over the carrier so expression trees and plain floats share one
/// transcription of the formulas.
#[allow(clippy::too_many_arguments)]
pub fn levi_civita_coeffs<T>(e: T, f: T, g: T, ex: T, ey: T, fx: T, fy: T, gx: T, gy: T) -> [T; 4]
where
    T: Clone + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T> + From<i32>,
{
    let k = |n: i32| T::from(n);
    let delta = e.clone() * g.clone() - f.clone() * f.clone();
    let two_delta = k(2) * delta;
    let a0 = (e.clone() * ey.clone() - k(2) * e.clone() * fx.clone() + f.clone() * ex.clone())
        / two_delta.clone();
    let a1 = (k(3) * f.clone() * ey.clone() + g.clone() * ex.clone()
        - k(2) * f.clone() * fx.clone()
        - k(2) * e.clone() * gx.clone())
        / two_delta.clone();
    let a2 = (k(2) * f.clone() * fy.clone() + k(2) * g.clone() * ey
        - k(3) * f.clone() * gx.clone()
        - e * gy.clone())
        / two_delta.clone();
    let a3 = (k(2) * g.clone() * fy - g * gx - f * gy) / two_delta;
    [a0, a1, a2, a3]
}

impl MetricInput {
    pub fn new(e: Expr, f: Expr, g: Expr) -> Self {
        MetricInput { e, f, g }
    }

    pub fn determinant(&self) -> Expr {
        self.e.clone() * self.g.clone() - self.f.clone() * self.f.clone()
    }

    /// Fails if `EG − F²` vanishes at `p`.
    pub fn check_nondegenerate(&self, p: &Point, mode: EvalMode) -> Result<(), ModelError> {
        let d = self.determinant().eval_jet(p, 0, mode)?;
        if d.value().is_zero() {
            return Err(ModelError::DegenerateMetric(p.clone()));
        }
        Ok(())
    }

    /// The projective structure of the metric; each coefficient costs one
    /// derivative of the metric.
    pub fn structure(&self) -> ProjectiveStructure {
        let d = |e: &Expr, a| e.clone().deriv(a);
        let (e, f, g) = (&self.e, &self.f, &self.g);
        ProjectiveStructure {
            a: levi_civita_coeffs(
                e.clone(),
                f.clone(),
                g.clone(),
                d(e, Axis::X),
                d(e, Axis::Y),
                d(f, Axis::X),
                d(f, Axis::Y),
                d(g, Axis::X),
                d(g, Axis::Y),
            ),
            provenance: Provenance::FromMetric,
        }
    }
}

/// Checks non-degeneracy at each sample point, then converts.
pub fn ode_from_metric(
    m: &MetricInput,
    points: &[Point],
    mode: EvalMode,
) -> Result<ProjectiveStructure, ModelError> {
    for p in points {
        m.check_nondegenerate(p, mode)?;
    }
    Ok(m.structure())
}

impl LambdaPoly {
    /// Builds from coefficient expressions, dropping trailing literal zeros.
    pub fn from_coeffs(mut coeffs: Vec<Expr>) -> Result<Self, ModelError> {
        for (i, c) in coeffs.iter().enumerate() {
            if c.mentions_slope() {
                return Err(ModelError::SlopeInCoefficient(format!("c{i}")));
            }
        }
        while coeffs.last().is_some_and(Expr::is_literal_zero) {
            coeffs.pop();
        }
        Ok(LambdaPoly { coeffs })
    }

    /// Expands an expression in `x`, `y`, `p` as a polynomial in `p`.
    pub fn from_expr(e: &Expr) -> Result<Self, ModelError> {
        LambdaPoly::from_coeffs(expand_in_slope(e)?)
    }

    /// Degree after trailing literal zeros are dropped (`0` for `Λ = 0`).
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Reads off `A_α = c_α`; degree above 3 is rejected.
pub fn ode_from_lambda(l: &LambdaPoly) -> Result<ProjectiveStructure, ModelError> {
    if l.coeffs.len() > 4 {
        return Err(ModelError::NotCubic(l.degree()));
    }
    let a = std::array::from_fn(|i| l.coeffs.get(i).cloned().unwrap_or_else(|| Expr::num(0)));
    Ok(ProjectiveStructure {
        a,
        provenance: Provenance::FromLambda,
    })
}

fn poly_add(a: Vec<Expr>, b: Vec<Expr>, sign: i32) -> Vec<Expr> {
    let n = a.len().max(b.len());
    let mut a = a.into_iter();
    let mut b = b.into_iter();
    (0..n)
        .map(|_| {
            let x = a.next().unwrap_or_else(|| Expr::num(0));
            let y = b.next().unwrap_or_else(|| Expr::num(0));
            if sign > 0 {
                x + y
            } else {
                x - y
            }
        })
        .collect()
}

fn poly_mul(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Expr::num(0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let t = std::mem::replace(&mut out[i + j], Expr::num(0));
            out[i + j] = t + x.clone() * y.clone();
        }
    }
    out
}

fn expand_in_slope(e: &Expr) -> Result<Vec<Expr>, ModelError> {
    if !e.mentions_slope() {
        return Ok(vec![e.clone()]);
    }
    let bad = || ModelError::NotPolynomial(e.to_string());
    Ok(match e {
        Expr::Var(Var::P) => vec![Expr::num(0), Expr::num(1)],
        Expr::Neg(a) => expand_in_slope(a)?.into_iter().map(|c| -c).collect(),
        Expr::Add(a, b) => poly_add(expand_in_slope(a)?, expand_in_slope(b)?, 1),
        Expr::Sub(a, b) => poly_add(expand_in_slope(a)?, expand_in_slope(b)?, -1),
        Expr::Mul(a, b) => poly_mul(&expand_in_slope(a)?, &expand_in_slope(b)?),
        Expr::Div(a, b) if !b.mentions_slope() => expand_in_slope(a)?
            .into_iter()
            .map(|c| c / (**b).clone())
            .collect(),
        Expr::Pow(a, k) if *k >= 0 => {
            let base = expand_in_slope(a)?;
            let mut acc = vec![Expr::num(1)];
            for _ in 0..*k {
                acc = poly_mul(&acc, &base);
            }
            acc
        }
        _ => return Err(bad()),
    })
}

/// Left-minus-right residuals of the four linear equations for `(ψ₁, ψ₂, ψ₃)`
/// whose non-degenerate solutions correspond to compatible metrics.
pub fn liouville_residual(
    psi: &[Expr; 3],
    s: &ProjectiveStructure,
    p: &Point,
    mode: EvalMode,
) -> Result<[Scalar; 4], ModelError> {
    let j: Vec<Jet> = psi
        .iter()
        .map(|e| e.eval_jet(p, 1, mode))
        .collect::<Result<_, _>>()?;
    let a: Vec<Scalar> = s
        .a
        .iter()
        .map(|e| Ok(e.eval_jet(p, 0, mode)?.value().clone()))
        .collect::<Result<_, EvalError>>()?;
    let val = |k: usize| j[k].value().clone();
    let dx = |k: usize| j[k].coeff(1, 0).clone();
    let dy = |k: usize| j[k].coeff(0, 1).clone();
    let r = |n, d| Scalar::ratio(n, d);
    let (p1, p2, p3) = (val(0), val(1), val(2));
    Ok([
        dx(0) - (r(2, 3) * &a[1] * &p1 - r(2, 1) * &a[0] * &p2),
        dy(2) - (r(2, 1) * &a[3] * &p2 - r(2, 3) * &a[2] * &p3),
        dy(0) + r(2, 1) * dx(1)
            - (r(4, 3) * &a[2] * &p1 - r(2, 3) * &a[1] * &p2 - r(2, 1) * &a[0] * &p3),
        dx(2) + r(2, 1) * dy(1)
            - (r(2, 1) * &a[3] * &p1 - r(4, 3) * &a[1] * &p3 + r(2, 3) * &a[2] * &p2),
    ])
}

/// The metric `E = ψ₁/Δ², F = ψ₂/Δ², G = ψ₃/Δ²` with `Δ = ψ₁ψ₃ − ψ₂²`;
/// its structure admits `ψ` as a solution of the linear system.
pub fn metric_from_psi(psi: &[Expr; 3]) -> MetricInput {
    let delta = psi[0].clone() * psi[2].clone() - psi[1].clone() * psi[1].clone();
    let d2 = delta.pow(2);
    MetricInput::new(
        psi[0].clone() / d2.clone(),
        psi[1].clone() / d2.clone(),
        psi[2].clone() / d2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn value(ex: &Expr, p: &Point) -> Scalar {
        ex.eval_jet(p, 0, EvalMode::Auto).unwrap().value().clone()
    }

    #[test]
    fn flat_metric_gives_flat_structure() {
        let s = MetricInput::new(e("1"), e("0"), e("1")).structure();
        for a in &s.a {
            assert!(value(a, &Point::exact((1, 3), (2, 7))).is_zero());
        }
    }

    #[test]
    fn exponential_metric_family() {
        // E = e^{xy}, F = 0, G = 1
        let s = MetricInput::new(e("exp(x*y)"), e("0"), e("1")).structure();
        let p = Point::exact((1, 2), (1, 3));
        let want = [
            e("1/2*x*exp(x*y)"),
            e("y/2"),
            e("x"),
            e("0"),
        ];
        for (a, w) in s.a.iter().zip(&want) {
            assert!((value(a, &p).to_f64() - value(w, &p).to_f64()).abs() < 1e-14);
        }
    }

    #[test]
    fn liouville_type_metric() {
        let s = MetricInput::new(e("x + y"), e("0"), e("x + y")).structure();
        let p = Point::exact((1, 1), (2, 1));
        assert_eq!(value(&s.a[0], &p), Scalar::ratio(1, 6));
        assert_eq!(value(&s.a[1], &p), Scalar::ratio(-1, 6));
        assert_eq!(value(&s.a[2], &p), Scalar::ratio(1, 6));
        assert_eq!(value(&s.a[3], &p), Scalar::ratio(-1, 6));
    }

    #[test]
    fn lambda_conversion() {
        let l = LambdaPoly::from_expr(&e("6*y^2 + x")).unwrap();
        let s = ode_from_lambda(&l).unwrap();
        assert_eq!(s.a[0], e("6*y^2 + x"));
        assert!(s.a[1..].iter().all(Expr::is_literal_zero));

        let l = LambdaPoly::from_expr(&e("x*p^3 - (p + y)^2")).unwrap();
        let s = ode_from_lambda(&l).unwrap();
        let pt = Point::exact((2, 1), (3, 1));
        let got: Vec<Scalar> = s.a.iter().map(|a| value(a, &pt)).collect();
        assert_eq!(got, vec![Scalar::int(-9), Scalar::int(-6), Scalar::int(-1), Scalar::int(2)]);

        let quartic = LambdaPoly::from_expr(&e("p^4 + x")).unwrap();
        assert_eq!(ode_from_lambda(&quartic), Err(ModelError::NotCubic(4)));

        assert!(matches!(
            LambdaPoly::from_expr(&e("exp(p)")),
            Err(ModelError::NotPolynomial(_))
        ));
        assert_eq!(LambdaPoly::from_expr(&e("0")).unwrap().degree(), 0);
    }

    #[test]
    fn residuals_of_simple_candidates() {
        let flat = ProjectiveStructure::flat();
        let p = Point::exact((1, 2), (1, 5));
        let r = liouville_residual(&[e("1"), e("0"), e("1")], &flat, &p, EvalMode::Auto).unwrap();
        assert!(r.iter().all(Scalar::is_zero));
        let r = liouville_residual(&[e("x"), e("0"), e("0")], &flat, &p, EvalMode::Auto).unwrap();
        assert_eq!(r[0], Scalar::one());
    }

    #[test]
    fn metric_built_from_psi_satisfies_the_linear_system() {
        let psi = [e("2 + x^2"), e("x*y - 1"), e("3 + y^2 + x")];
        let s = metric_from_psi(&psi).structure();
        for p in [Point::exact((1, 2), (1, 3)), Point::exact((-2, 1), (5, 7))] {
            let r = liouville_residual(&psi, &s, &p, EvalMode::Rational).unwrap();
            assert!(r.iter().all(Scalar::is_zero), "{r:?}");
        }
    }
}
