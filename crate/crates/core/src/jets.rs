//! Truncated bivariate Taylor expansions ("jets") at a fixed base point.
//!
//! A jet of order `N` stores `c[i][j] = ∂ₓⁱ∂ᵧʲ f / (i! j!)` for `i + j ≤ N`,
//! densely, in lexicographic `(i, j)` order. With factorial scaling the
//! product of two jets is a plain truncated Cauchy product.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{Mode, Scalar};

/// A point of the plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub x: Scalar,
    pub y: Scalar,
}

impl Point {
    pub fn new(x: Scalar, y: Scalar) -> Self {
        Point { x, y }
    }

    pub fn exact(x: (i64, i64), y: (i64, i64)) -> Self {
        Point::new(Scalar::ratio(x.0, x.1), Scalar::ratio(y.0, y.1))
    }

    pub fn float(x: f64, y: f64) -> Self {
        Point::new(Scalar::float(x), Scalar::float(y))
    }

    pub fn origin() -> Self {
        Point::new(Scalar::zero(), Scalar::zero())
    }

    pub fn to_float(&self) -> Point {
        Point::new(self.x.to_float(), self.y.to_float())
    }

    pub fn same_as(&self, other: &Point) -> bool {
        self.x.value_eq(&other.x) && self.y.value_eq(&other.y)
    }

    pub fn coord(&self, axis: Axis) -> &Scalar {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        if i == 0 {
            Axis::X
        } else {
            Axis::Y
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jets do not share a base point: {0} vs {1}")]
    BasePointMismatch(Point, Point),
    #[error("jets do not share a truncation order: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("derivative of order {required} requested but the jet carries order {available}")]
    InsufficientOrder { required: usize, available: usize },
    #[error("singular evaluation at {point}: {reason}")]
    Singular { point: Point, reason: String },
}

/// Elementary univariate functions that can be composed with a jet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Elementary {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Elementary {
    pub fn name(self) -> &'static str {
        match self {
            Elementary::Exp => "exp",
            Elementary::Log => "log",
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Elementary::Exp,
            "log" => Elementary::Log,
            "sin" => Elementary::Sin,
            "cos" => Elementary::Cos,
            "sqrt" => Elementary::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    base: Point,
    order: usize,
    coeffs: Vec<Scalar>,
}

/// Number of coefficients of an order-`n` jet.
pub fn table_len(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

#[inline]
fn idx(order: usize, i: usize, j: usize) -> usize {
    // row i starts after rows 0..i, which hold (order + 1 - k) entries each
    i * (order + 1) - i * i.saturating_sub(1) / 2 + j
}

impl Jet {
    pub fn constant(value: Scalar, order: usize, base: Point) -> Jet {
        let mut coeffs = vec![Scalar::zero(); table_len(order)];
        coeffs[0] = value;
        Jet {
            base,
            order,
            coeffs,
        }
    }

    pub fn zero(order: usize, base: Point) -> Jet {
        Jet::constant(Scalar::zero(), order, base)
    }

    /// The coordinate function `x` or `y` expanded about `base`.
    pub fn variable(axis: Axis, order: usize, base: Point) -> Jet {
        let mut j = Jet::constant(base.coord(axis).clone(), order, base);
        if order >= 1 {
            let (i, k) = match axis {
                Axis::X => (1, 0),
                Axis::Y => (0, 1),
            };
            j.set(i, k, Scalar::one());
        }
        j
    }

    /// Builds a jet from raw table entries `c[i][j]` in lexicographic order.
    pub fn from_coeffs(base: Point, order: usize, coeffs: Vec<Scalar>) -> Jet {
        assert_eq!(coeffs.len(), table_len(order), "coefficient table size");
        Jet {
            base,
            order,
            coeffs,
        }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    /// Field value at the base point.
    pub fn value(&self) -> &Scalar {
        &self.coeffs[0]
    }

    pub fn coeff(&self, i: usize, j: usize) -> &Scalar {
        assert!(i + j <= self.order);
        &self.coeffs[idx(self.order, i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: Scalar) {
        let k = idx(self.order, i, j);
        self.coeffs[k] = v;
    }

    pub fn mode(&self) -> Mode {
        if self.coeffs.iter().all(Scalar::is_exact) {
            Mode::Rational
        } else {
            Mode::Float
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    /// All coefficients within `tol` of zero (exact comparison in rational mode).
    pub fn vanishes(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| match c {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Float(v) => v.abs() <= tol,
        })
    }

    pub fn to_float(&self) -> Jet {
        Jet {
            base: self.base.to_float(),
            order: self.order,
            coeffs: self.coeffs.iter().map(Scalar::to_float).collect(),
        }
    }

    /// The raw partial derivative `∂ₓⁱ∂ᵧʲ f` at the base point.
    pub fn partial(&self, i: usize, j: usize) -> Result<Scalar, JetError> {
        if i + j > self.order {
            return Err(JetError::InsufficientOrder {
                required: i + j,
                available: self.order,
            });
        }
        let scale = factorial(i) * factorial(j);
        Ok(self.coeff(i, j) * &Scalar::Exact(BigRational::from_integer(scale)))
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order, "cannot raise jet order by truncation");
        if order == self.order {
            return self.clone();
        }
        let mut out = Jet::zero(order, self.base.clone());
        for i in 0..=order {
            for j in 0..=(order - i) {
                out.set(i, j, self.coeff(i, j).clone());
            }
        }
        out
    }

    /// Jet of `∂f/∂x` or `∂f/∂y`; the order drops by one.
    pub fn diff(&self, axis: Axis) -> Result<Jet, JetError> {
        if self.order == 0 {
            return Err(JetError::InsufficientOrder {
                required: 1,
                available: 0,
            });
        }
        let n = self.order - 1;
        let mut out = Jet::zero(n, self.base.clone());
        for i in 0..=n {
            for j in 0..=(n - i) {
                let v = match axis {
                    Axis::X => self.coeff(i + 1, j) * Scalar::int((i + 1) as i64),
                    Axis::Y => self.coeff(i, j + 1) * Scalar::int((j + 1) as i64),
                };
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    fn check_compatible(&self, other: &Jet) -> Result<(), JetError> {
        if self.order != other.order {
            return Err(JetError::OrderMismatch(self.order, other.order));
        }
        if !self.base.same_as(&other.base) {
            return Err(JetError::BasePointMismatch(
                self.base.clone(),
                other.base.clone(),
            ));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_compatible(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_compatible(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    pub fn checked_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_compatible(other)?;
        Ok(self.cauchy(other))
    }

    /// The unique truncated series `q` with `q · other = self`.
    pub fn checked_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_compatible(other)?;
        let b0 = other.value();
        if b0.is_zero() {
            return Err(JetError::Singular {
                point: self.base.clone(),
                reason: "division by a jet with vanishing constant term".into(),
            });
        }
        let n = self.order;
        let inv_b0 = b0.recip();
        let mut q = Jet::zero(n, self.base.clone());
        for total in 0..=n {
            for i in (0..=total).rev() {
                let j = total - i;
                let mut acc = self.coeff(i, j).clone();
                for k in 0..=i {
                    for l in 0..=j {
                        if k == 0 && l == 0 {
                            continue;
                        }
                        let b = other.coeff(k, l);
                        if b.is_zero() {
                            continue;
                        }
                        acc = acc - b * q.coeff(i - k, j - l);
                    }
                }
                q.set(i, j, acc * &inv_b0);
            }
        }
        Ok(q)
    }

    pub fn scale(&self, s: &Scalar) -> Jet {
        Jet {
            base: self.base.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: &Scalar) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] = &out.coeffs[0] + s;
        out
    }

    fn zip(&self, other: &Jet, f: impl Fn(&Scalar, &Scalar) -> Scalar) -> Jet {
        Jet {
            base: self.base.clone(),
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    fn cauchy(&self, other: &Jet) -> Jet {
        let n = self.order;
        let mut out = Jet::zero(n, self.base.clone());
        // skip zero entries: products of sparse polynomial jets are common
        let nz = |j: &Jet| -> Vec<(usize, usize, Scalar)> {
            let mut v = Vec::new();
            for i in 0..=n {
                for k in 0..=(n - i) {
                    let c = j.coeff(i, k);
                    if !c.is_zero() {
                        v.push((i, k, c.clone()));
                    }
                }
            }
            v
        };
        let a = nz(self);
        let b = nz(other);
        let mut acc: Vec<Option<Scalar>> = vec![None; table_len(n)];
        for (i, j, ca) in &a {
            for (k, l, cb) in &b {
                if i + j + k + l > n {
                    continue;
                }
                let t = idx(n, i + k, j + l);
                let p = ca * cb;
                acc[t] = Some(match acc[t].take() {
                    Some(s) => s + p,
                    None => p,
                });
            }
        }
        // a float factor makes the whole product float, zero entries included
        let float = self.mode() == Mode::Float || other.mode() == Mode::Float;
        for (t, v) in acc.into_iter().enumerate() {
            out.coeffs[t] = match v {
                Some(s) => s,
                None if float => Scalar::float(0.0),
                None => Scalar::zero(),
            };
        }
        out
    }

    /// Integer power; exact for exact jets. Negative powers need a nonzero value.
    pub fn powi(&self, k: i64) -> Result<Jet, JetError> {
        if k < 0 {
            let one = Jet::constant(Scalar::one(), self.order, self.base.clone());
            return one.checked_div(&self.powi(-k)?);
        }
        let mut result = Jet::constant(Scalar::one(), self.order, self.base.clone());
        let mut base = self.clone();
        let mut e = k as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.cauchy(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.cauchy(&base);
            }
        }
        Ok(result)
    }

    /// Composition `f ∘ self` via `f(a₀ + h) = Σ f⁽ᵏ⁾(a₀)/k! · hᵏ`, `h` the non-constant part.
    ///
    /// Stays exact when every Taylor coefficient of `f` at `a₀` is rational
    /// (exp/sin/cos at 0, log at 1, sqrt at a rational square); otherwise the
    /// result is float.
    pub fn compose(&self, f: Elementary) -> Result<Jet, JetError> {
        let a0 = self.value().clone();
        let n = self.order;
        let singular = |reason: &str| JetError::Singular {
            point: self.base.clone(),
            reason: format!("{}: {reason} (argument value {a0})", f.name()),
        };
        let taylor: Vec<Scalar> = match f {
            Elementary::Exp => {
                let e0 = if a0.is_zero() && a0.is_exact() {
                    Scalar::one()
                } else {
                    Scalar::float(a0.to_f64().exp())
                };
                (0..=n)
                    .map(|k| &e0 * &inv_factorial(k))
                    .collect()
            }
            Elementary::Sin | Elementary::Cos => {
                let (s, c) = if a0.is_zero() && a0.is_exact() {
                    (Scalar::zero(), Scalar::one())
                } else {
                    let v = a0.to_f64();
                    (Scalar::float(v.sin()), Scalar::float(v.cos()))
                };
                // derivative cycle of sin: sin, cos, -sin, -cos
                let cycle = [s.clone(), c.clone(), -&s, -&c];
                let shift = if f == Elementary::Sin { 0 } else { 1 };
                (0..=n)
                    .map(|k| &cycle[(k + shift) % 4] * &inv_factorial(k))
                    .collect()
            }
            Elementary::Log => {
                if a0.signum() <= 0 {
                    return Err(singular("argument must be positive"));
                }
                let l0 = if a0.is_exact() && a0 == Scalar::one() {
                    Scalar::zero()
                } else {
                    Scalar::float(a0.to_f64().ln())
                };
                let a0 = if l0.is_exact() { a0.clone() } else { a0.to_float() };
                let mut out = vec![l0];
                for k in 1..=n {
                    // f^(k)/k! = (-1)^(k-1) / (k a0^k)
                    let sign = if k % 2 == 1 { 1 } else { -1 };
                    out.push(Scalar::ratio(sign, k as i64) / a0.powi(k as i32));
                }
                out
            }
            Elementary::Sqrt => {
                if a0.signum() <= 0 {
                    return Err(singular("argument must be positive"));
                }
                let r0 = exact_sqrt(&a0).unwrap_or_else(|| Scalar::float(a0.to_f64().sqrt()));
                let a0 = if r0.is_exact() { a0.clone() } else { a0.to_float() };
                // sqrt(a0) * binom(1/2, k) / a0^k
                let mut out = Vec::with_capacity(n + 1);
                let mut binom = Scalar::one();
                for k in 0..=n {
                    if k > 0 {
                        let kk = k as i64;
                        binom = binom * Scalar::ratio(3 - 2 * kk, 2 * kk);
                    }
                    out.push(&r0 * &binom / a0.powi(k as i32));
                }
                out
            }
        };
        let h = {
            let mut h = self.clone();
            h.coeffs[0] = if a0.is_exact() {
                Scalar::zero()
            } else {
                Scalar::float(0.0)
            };
            h
        };
        // Horner in h; h^k vanishes beyond the truncation order
        let mut acc = Jet::constant(taylor[n].clone(), n, self.base.clone());
        for k in (0..n).rev() {
            acc = acc.cauchy(&h).add_scalar(&taylor[k]);
        }
        Ok(acc)
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::from(1), |a, k| a * BigInt::from(k))
}

fn inv_factorial(n: usize) -> Scalar {
    Scalar::Exact(BigRational::new(BigInt::from(1), factorial(n)))
}

fn exact_sqrt(s: &Scalar) -> Option<Scalar> {
    let r = s.as_rational()?;
    if r.is_negative() {
        return None;
    }
    let (n, d) = (r.numer(), r.denom());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    if &(&sn * &sn) == n && &(&sd * &sd) == d {
        Some(Scalar::Exact(BigRational::new(sn, sd)))
    } else {
        None
    }
}

impl Add for &Jet {
    type Output = Jet;
    /// Panics on incompatible jets; see [`Jet::checked_add`].
    fn add(self, rhs: &Jet) -> Jet {
        self.checked_add(rhs).expect("jet addition")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.checked_sub(rhs).expect("jet subtraction")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.checked_mul(rhs).expect("jet multiplication")
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Mul<&Scalar> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Scalar) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(&Scalar::int(-1))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: (i64, i64), y: (i64, i64)) -> Point {
        Point::exact(x, y)
    }

    #[test]
    fn variable_has_unit_slope() {
        let p = at((1, 2), (1, 3));
        let x = Jet::variable(Axis::X, 3, p.clone());
        assert_eq!(x.value(), &Scalar::ratio(1, 2));
        assert_eq!(x.coeff(1, 0), &Scalar::one());
        assert!(x.coeff(0, 1).is_zero());
        assert!(x.coeff(2, 0).is_zero());
    }

    #[test]
    fn product_of_variables() {
        let p = at((2, 1), (3, 1));
        let x = Jet::variable(Axis::X, 4, p.clone());
        let y = Jet::variable(Axis::Y, 4, p);
        let xy2 = &x * &(&y * &y);
        assert_eq!(xy2.value(), &Scalar::int(18));
        assert_eq!(xy2.partial(1, 2).unwrap(), Scalar::int(2));
        assert_eq!(xy2.partial(1, 1).unwrap(), Scalar::int(6));
        assert!(xy2.partial(2, 0).unwrap().is_zero());
    }

    #[test]
    fn derivative_lowers_order() {
        let p = Point::origin();
        let x = Jet::variable(Axis::X, 2, p);
        let d = x.diff(Axis::X).unwrap();
        assert_eq!(d.order(), 1);
        assert_eq!(d.value(), &Scalar::one());
        let err = d.diff(Axis::X).unwrap().diff(Axis::X).unwrap_err();
        assert!(matches!(err, JetError::InsufficientOrder { .. }));
    }

    #[test]
    fn partial_beyond_order_is_an_error() {
        let j = Jet::zero(2, Point::origin());
        assert!(matches!(j.partial(2, 1), Err(JetError::InsufficientOrder { .. })));
    }

    #[test]
    fn division_by_vanishing_jet_is_singular() {
        let p = Point::origin();
        let one = Jet::constant(Scalar::one(), 2, p.clone());
        let x = Jet::variable(Axis::X, 2, p);
        assert!(matches!(one.checked_div(&x), Err(JetError::Singular { .. })));
    }

    #[test]
    fn exp_at_zero_is_exact() {
        let x = Jet::variable(Axis::X, 4, Point::origin());
        let e = x.compose(Elementary::Exp).unwrap();
        assert!(e.mode() == Mode::Rational);
        assert_eq!(e.coeff(3, 0), &Scalar::ratio(1, 6));
    }

    #[test]
    fn log_of_nonpositive_is_singular() {
        let x = Jet::variable(Axis::X, 2, Point::origin());
        assert!(matches!(x.compose(Elementary::Log), Err(JetError::Singular { .. })));
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let a = Jet::zero(2, Point::origin());
        let b = Jet::zero(2, at((1, 1), (0, 1)));
        assert!(matches!(a.checked_add(&b), Err(JetError::BasePointMismatch(..))));
    }
}
