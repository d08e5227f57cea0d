//! Scalar expressions in `x`, `y` (and the slope symbol `p`): parsing,
//! canonical printing and jet evaluation.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?          exponent must fold to an integer literal
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! number := digits ('.' digits)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! Identifiers are `x`, `y`, `p`, the functions `exp log sin cos sqrt`, the
//! derivative operators `dx` and `dy`, and caller-supplied parameters.
//! Decimal literals are read as exact rationals.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::{Axis, Elementary, Jet, JetError, Point};
use crate::scalar::{Mode, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    /// The slope `y′`; only meaningful inside a right-hand side `Λ(x, y, p)`.
    P,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(BigRational),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
    Func(Elementary, Box<Expr>),
    /// Partial derivative of the operand.
    Deriv(Axis, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("exponent must be an integer literal")]
    NonIntegerExponent,
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("the slope symbol `p` cannot be evaluated as a function of (x, y)")]
    SlopeSymbol,
    #[error("exact evaluation requested but {0} produces a non-rational value at {1}")]
    Inexact(String, Point),
}

/// How literals and elementary functions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Exact wherever possible; transcendental values switch to float.
    #[default]
    Auto,
    /// Exact only; any non-rational value is an error.
    Rational,
    /// Everything in floating point.
    Float,
}

impl Expr {
    pub fn num(n: i64) -> Expr {
        Expr::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::Num(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::Var(Var::Y)
    }

    pub fn p() -> Expr {
        Expr::Var(Var::P)
    }

    pub fn func(f: Elementary, e: Expr) -> Expr {
        Expr::Func(f, Box::new(e))
    }

    pub fn pow(self, k: i64) -> Expr {
        match self {
            Expr::Num(r) if k >= 0 || !r.is_zero() => Expr::Num(num_traits::pow::Pow::pow(&r, k as i32)),
            e => Expr::Pow(Box::new(e), k),
        }
    }

    pub fn deriv(self, axis: Axis) -> Expr {
        match self {
            Expr::Num(_) => Expr::num(0),
            e => Expr::Deriv(axis, Box::new(e)),
        }
    }

    pub fn is_literal_zero(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_zero())
    }

    fn is_literal_one(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_one())
    }

    /// Whether the slope symbol `p` occurs.
    pub fn mentions_slope(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == Var::P,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) | Expr::Deriv(_, a) => {
                a.mentions_slope()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.mentions_slope() || b.mentions_slope()
            }
        }
    }

    /// Jet of the expression at `base` to the given order.
    pub fn eval_jet(&self, base: &Point, order: usize, mode: EvalMode) -> Result<Jet, EvalError> {
        let base = match mode {
            EvalMode::Float => base.to_float(),
            _ => base.clone(),
        };
        let jet = self.eval_inner(&base, order, mode)?;
        if mode == EvalMode::Rational && jet.mode() == Mode::Float {
            return Err(EvalError::Inexact(self.to_string(), base));
        }
        Ok(jet)
    }

    fn eval_inner(&self, base: &Point, order: usize, mode: EvalMode) -> Result<Jet, EvalError> {
        let rec = |e: &Expr| e.eval_inner(base, order, mode);
        Ok(match self {
            Expr::Num(r) => {
                let s = if mode == EvalMode::Float {
                    Scalar::Exact(r.clone()).to_float()
                } else {
                    Scalar::Exact(r.clone())
                };
                let mut j = Jet::constant(s, order, base.clone());
                if mode == EvalMode::Float {
                    j = j.to_float();
                }
                j
            }
            Expr::Var(Var::X) => variable(Axis::X, order, base, mode),
            Expr::Var(Var::Y) => variable(Axis::Y, order, base, mode),
            Expr::Var(Var::P) => return Err(EvalError::SlopeSymbol),
            Expr::Neg(a) => -rec(a)?,
            Expr::Add(a, b) => rec(a)?.checked_add(&rec(b)?)?,
            Expr::Sub(a, b) => rec(a)?.checked_sub(&rec(b)?)?,
            Expr::Mul(a, b) => rec(a)?.checked_mul(&rec(b)?)?,
            Expr::Div(a, b) => rec(a)?.checked_div(&rec(b)?)?,
            Expr::Pow(a, k) => rec(a)?.powi(*k)?,
            Expr::Func(f, a) => {
                let inner = rec(a)?;
                let out = inner.compose(*f)?;
                if mode == EvalMode::Rational && out.mode() == Mode::Float {
                    return Err(EvalError::Inexact(self.to_string(), base.clone()));
                }
                out
            }
            Expr::Deriv(axis, a) => a.eval_inner(base, order + 1, mode)?.diff(*axis)?,
        })
    }

    /// Pointwise value as `f64` (used on dense grids where jets are unnecessary).
    pub fn eval_f64(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        let base = Point::float(x, y);
        Ok(self.eval_jet(&base, 0, EvalMode::Float)?.value().to_f64())
    }

    /// Replaces parameter-free occurrences: substitutes `p` by `value`.
    pub fn substitute_slope(&self, value: &Expr) -> Expr {
        let rec = |e: &Expr| Box::new(e.substitute_slope(value));
        match self {
            Expr::Var(Var::P) => value.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
            Expr::Pow(a, k) => Expr::Pow(rec(a), *k),
            Expr::Func(f, a) => Expr::Func(*f, rec(a)),
            Expr::Deriv(ax, a) => Expr::Deriv(*ax, rec(a)),
        }
    }
}

fn variable(axis: Axis, order: usize, base: &Point, mode: EvalMode) -> Jet {
    let j = Jet::variable(axis, order, base.clone());
    if mode == EvalMode::Float {
        j.to_float()
    } else {
        j
    }
}

// ---------------------------------------------------------------------------
// Arithmetic on expression trees, with light literal folding so that trees
// assembled programmatically stay small and exact zeros stay exact.

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a + b),
            (a, b) if a.is_literal_zero() => b,
            (a, b) if b.is_literal_zero() => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a - b),
            (a, b) if b.is_literal_zero() => a,
            (a, b) if a.is_literal_zero() => -b,
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a * b),
            (a, b) if a.is_literal_zero() || b.is_literal_zero() => Expr::num(0),
            (a, b) if a.is_literal_one() => b,
            (a, b) if b.is_literal_one() => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) if !b.is_zero() => Expr::Num(a / b),
            (a, b) if a.is_literal_zero() && !b.is_literal_zero() => Expr::num(0),
            (a, b) if b.is_literal_one() => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Num(a) => Expr::Num(-a),
            Expr::Neg(a) => *a,
            e => Expr::Neg(Box::new(e)),
        }
    }
}

impl From<i32> for Expr {
    fn from(n: i32) -> Expr {
        Expr::num(n as i64)
    }
}

// ---------------------------------------------------------------------------
// Canonical printer: every compound node is parenthesised, so printing then
// parsing reproduces the tree exactly.

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(r) => {
                let neg = r.is_negative();
                match (r.is_integer(), neg) {
                    (true, false) => write!(f, "{}", r.numer()),
                    (true, true) => write!(f, "(-{})", -r.numer()),
                    (false, false) => write!(f, "({}/{})", r.numer(), r.denom()),
                    (false, true) => write!(f, "(-{}/{})", -r.numer(), r.denom()),
                }
            }
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::P) => f.write_str("p"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) if *k < 0 => write!(f, "({a}^(-{}))", -k),
            Expr::Pow(a, k) => write!(f, "({a}^{k})"),
            Expr::Func(g, a) => write!(f, "{}({a})", g.name()),
            Expr::Deriv(Axis::X, a) => write!(f, "dx({a})"),
            Expr::Deriv(Axis::Y, a) => write!(f, "dy({a})"),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

// ---------------------------------------------------------------------------
// Parser

/// Parses an expression with no free parameters.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    parse_expr_with(src, &BTreeMap::new())
}

/// Parses an expression in which each key of `params` is replaced by its value.
pub fn parse_expr_with(
    src: &str,
    params: &BTreeMap<String, BigRational>,
) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        params,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(ParseErrorKind::Syntax(format!(
            "unexpected `{}`",
            p.src[p.pos] as char
        ))));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    params: &'a BTreeMap<String, BigRational>,
}

impl Parser<'_> {
    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            offset: self.pos,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = match self.peek() {
                Some(b) => format!("`{}`", b as char),
                None => "end of input".to_string(),
            };
            Err(self.error(ParseErrorKind::Syntax(format!(
                "expected `{}`, found {found}",
                c as char
            ))))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = match (lhs, rhs) {
                    (Expr::Num(a), Expr::Num(b)) if !b.is_zero() => Expr::Num(a / b),
                    (a, b) => Expr::Div(Box::new(a), Box::new(b)),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(match self.unary()? {
                Expr::Num(r) => Expr::Num(-r),
                e => Expr::Neg(Box::new(e)),
            });
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let exponent = self.unary()?;
        let k = match &exponent {
            Expr::Num(r) if r.is_integer() => r.numer().to_i64(),
            _ => None,
        };
        let Some(k) = k else {
            return Err(ParseError {
                kind: ParseErrorKind::NonIntegerExponent,
                offset: at,
            });
        };
        Ok(match base {
            Expr::Num(r) if k >= 0 || !r.is_zero() => {
                Expr::Num(num_traits::pow::Pow::pow(&r, k as i32))
            }
            b => Expr::Pow(Box::new(b), k),
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.error(ParseErrorKind::Syntax(format!(
                "unexpected `{}`",
                c as char
            )))),
            None => Err(self.error(ParseErrorKind::Syntax(
                "unexpected end of input".into(),
            ))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            std::str::from_utf8(&p.src[s..p.pos]).unwrap().to_string()
        };
        let int_part = digits(self);
        let mut frac_part = String::new();
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            frac_part = digits(self);
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(ParseError {
                kind: ParseErrorKind::Syntax("malformed number".into()),
                offset: start,
            });
        }
        let mut exp10: i64 = 0;
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                if self.src[self.pos] == b'-' {
                    sign = -1;
                }
                self.pos += 1;
            }
            let e = digits(self);
            if e.is_empty() {
                // not an exponent after all (e.g. `2exp` is still an error later)
                self.pos = save;
            } else {
                exp10 = sign
                    * e.parse::<i64>().map_err(|_| ParseError {
                        kind: ParseErrorKind::Syntax("exponent too large".into()),
                        offset: save,
                    })?;
            }
        }
        let mantissa: BigInt = format!("{int_part}{frac_part}").parse().unwrap_or_default();
        let scale = exp10 - frac_part.len() as i64;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Expr::Num(value))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "x" => return Ok(Expr::x()),
            "y" => return Ok(Expr::y()),
            "p" => return Ok(Expr::p()),
            _ => {}
        }
        if let Some(v) = self.params.get(name) {
            return Ok(Expr::Num(v.clone()));
        }
        let deriv = match name {
            "dx" => Some(Axis::X),
            "dy" => Some(Axis::Y),
            _ => None,
        };
        let func = Elementary::from_name(name);
        if func.is_none() && deriv.is_none() {
            return Err(ParseError {
                kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                offset: start,
            });
        }
        self.expect(b'(')?;
        let arg = self.expr()?;
        self.expect(b')')?;
        Ok(match (func, deriv) {
            (Some(f), _) => Expr::Func(f, Box::new(arg)),
            (None, Some(axis)) => Expr::Deriv(axis, Box::new(arg)),
            (None, None) => unreachable!(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(e: &str, x: i64, y: i64) -> Scalar {
        parse_expr(e)
            .unwrap()
            .eval_jet(&Point::exact((x, 1), (y, 1)), 0, EvalMode::Auto)
            .unwrap()
            .value()
            .clone()
    }

    #[test]
    fn evaluates_mixed_expression() {
        assert_eq!(at("x^2*y - exp(x)", 0, 1), Scalar::int(-1));
    }

    #[test]
    fn rational_literal_is_exact() {
        assert_eq!(parse_expr("2/3").unwrap(), Expr::ratio(2, 3));
        assert_eq!(parse_expr("0.25").unwrap(), Expr::ratio(1, 4));
        assert_eq!(parse_expr("1.5e-2").unwrap(), Expr::ratio(3, 200));
    }

    #[test]
    fn rejects_fractional_exponent() {
        let err = parse_expr("x^(1/2)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonIntegerExponent);
        assert_eq!(err.offset, 2);
        assert_eq!(
            parse_expr("x^y").unwrap_err().kind,
            ParseErrorKind::NonIntegerExponent
        );
    }

    #[test]
    fn reports_unknown_identifier_with_offset() {
        let err = parse_expr("1 + tan(x)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("tan".into()));
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at("-2^2", 0, 0), Scalar::int(-4));
        assert_eq!(at("2^-1", 0, 0), Scalar::ratio(1, 2));
        assert_eq!(at("8/2/2", 0, 0), Scalar::int(2));
        assert_eq!(at("1 - 2 - 3", 0, 0), Scalar::int(-4));
        assert_eq!(at("x*y + x", 2, 3), Scalar::int(8));
    }

    #[test]
    fn parameters_are_substituted() {
        let mut params = BTreeMap::new();
        params.insert("c".to_string(), BigRational::new(3.into(), 4.into()));
        let e = parse_expr_with("c*x", &params).unwrap();
        assert_eq!(e.to_string(), "((3/4) * x)");
    }

    #[test]
    fn printer_round_trips() {
        for s in ["-x^-2", "exp(-x*y)/(1 - 3/7*y)", "dx(x^3) + sin(x)^2", "(-2/3)"] {
            let e = parse_expr(s).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e, "{s}");
        }
    }

    #[test]
    fn derivative_operator() {
        assert_eq!(at("dx(x^3*y)", 2, 5), Scalar::int(60));
    }

    #[test]
    fn rational_mode_rejects_transcendental_values() {
        let e = parse_expr("exp(x)").unwrap();
        let r = e.eval_jet(&Point::exact((1, 1), (0, 1)), 2, EvalMode::Rational);
        assert!(matches!(r, Err(EvalError::Inexact(..))));
        let ok = e.eval_jet(&Point::origin(), 2, EvalMode::Rational).unwrap();
        assert_eq!(ok.coeff(2, 0), &Scalar::ratio(1, 2));
    }
}
