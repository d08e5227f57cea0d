//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's jet or linear-algebra code: the
//! polynomial type differentiates term by term, determinants are expanded by
//! cofactors, and interpolation uses Lagrange's formula.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write;

use metrisability::{parse_expr, EvalMode, Expr, Point, ProjectiveStructure, Scalar};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exponents of `x, y, sin y, cos y`.
type Monomial = [u32; 4];

/// A polynomial in `x`, `y`, `s = sin y` and `c = cos y` with rational
/// coefficients, closed under `∂ₓ` and `∂ᵧ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(BTreeMap<Monomial, BigRational>);

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Poly {
        let mut p = Poly::zero();
        p.add_term([0; 4], c);
        p
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(q(n, 1))
    }

    pub fn monomial(coeff: BigRational, m: Monomial) -> Poly {
        let mut p = Poly::zero();
        p.add_term(m, coeff);
        p
    }

    pub fn x() -> Poly {
        Poly::monomial(q(1, 1), [1, 0, 0, 0])
    }

    pub fn y() -> Poly {
        Poly::monomial(q(1, 1), [0, 1, 0, 0])
    }

    pub fn sin_y() -> Poly {
        Poly::monomial(q(1, 1), [0, 0, 1, 0])
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self.0.entry(m).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.0.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.0 {
            r.add_term(*m, c.clone());
        }
        r
    }

    pub fn scale(&self, s: &BigRational) -> Poly {
        let mut r = Poly::zero();
        for (m, c) in &self.0 {
            r.add_term(*m, c * s);
        }
        r
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(&q(-1, 1)))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &o.0 {
                let m = [m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2], m1[3] + m2[3]];
                r.add_term(m, c1 * c2);
            }
        }
        r
    }

    pub fn dx(&self) -> Poly {
        let mut r = Poly::zero();
        for (m, c) in &self.0 {
            if m[0] > 0 {
                r.add_term([m[0] - 1, m[1], m[2], m[3]], c * BigRational::from_integer(m[0].into()));
            }
        }
        r
    }

    pub fn dy(&self) -> Poly {
        let mut r = Poly::zero();
        for (m, c) in &self.0 {
            let k = |e: u32| BigRational::from_integer(e.into());
            if m[1] > 0 {
                r.add_term([m[0], m[1] - 1, m[2], m[3]], c * k(m[1]));
            }
            // d(sin) = cos, d(cos) = −sin
            if m[2] > 0 {
                r.add_term([m[0], m[1], m[2] - 1, m[3] + 1], c * k(m[2]));
            }
            if m[3] > 0 {
                r.add_term([m[0], m[1], m[2] + 1, m[3] - 1], -(c * k(m[3])));
            }
        }
        r
    }

    pub fn partial(&self, i: usize, j: usize) -> Poly {
        let mut p = self.clone();
        for _ in 0..i {
            p = p.dx();
        }
        for _ in 0..j {
            p = p.dy();
        }
        p
    }

    pub fn is_algebraic(&self) -> bool {
        self.0.keys().all(|m| m[2] == 0 && m[3] == 0)
    }

    /// Exact value; only for polynomials free of `sin y`, `cos y`.
    pub fn eval(&self, x: &BigRational, y: &BigRational) -> BigRational {
        assert!(self.is_algebraic(), "exact evaluation needs a polynomial");
        self.0
            .iter()
            .map(|(m, c)| c * pow(x, m[0]) * pow(y, m[1]))
            .fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn eval_f64(&self, x: f64, y: f64) -> f64 {
        self.0
            .iter()
            .map(|(m, c)| {
                c.to_f64().unwrap()
                    * x.powi(m[0] as i32)
                    * y.powi(m[1] as i32)
                    * y.sin().powi(m[2] as i32)
                    * y.cos().powi(m[3] as i32)
            })
            .sum()
    }

    /// The polynomial written in the expression grammar.
    pub fn to_source(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (m, c) in &self.0 {
            write!(out, "+({}/{})", c.numer(), c.denom()).unwrap();
            for (name, e) in ["x", "y", "sin(y)", "cos(y)"].iter().zip(m) {
                if *e > 0 {
                    write!(out, "*{name}^{e}").unwrap();
                }
            }
        }
        out
    }

    pub fn to_expr(&self) -> Expr {
        parse_expr(&self.to_source()).expect("generated source parses")
    }
}

fn pow(v: &BigRational, e: u32) -> BigRational {
    (0..e).fold(BigRational::one(), |a, _| a * v)
}

/// A random polynomial in `x, y` of total degree at most `deg` with small
/// integer coefficients; roughly half the monomials are present.
pub fn random_poly(rng: &mut ChaCha8Rng, deg: u32) -> Poly {
    let mut p = Poly::zero();
    for i in 0..=deg {
        for j in 0..=(deg - i) {
            if rng.gen_bool(0.5) {
                let c = rng.gen_range(-4i64..=4);
                p.add_term([i, j, 0, 0], q(c, 1));
            }
        }
    }
    p
}

pub fn random_rational(rng: &mut ChaCha8Rng, max_num: i64, max_den: i64) -> BigRational {
    q(rng.gen_range(-max_num..=max_num), rng.gen_range(1..=max_den))
}

pub fn random_point(rng: &mut ChaCha8Rng) -> (BigRational, BigRational) {
    (random_rational(rng, 5, 7), random_rational(rng, 5, 7))
}

pub fn point(x: &BigRational, y: &BigRational) -> Point {
    Point::new(Scalar::Exact(x.clone()), Scalar::Exact(y.clone()))
}

/// A random structure with polynomial coefficients of degree ≤ `deg`,
/// together with the oracle polynomials.
pub fn random_structure(rng: &mut ChaCha8Rng, deg: u32) -> (ProjectiveStructure, [Poly; 4]) {
    let a = [0; 4].map(|_| random_poly(rng, deg));
    let s = ProjectiveStructure::new(a.clone().map(|p| p.to_expr())).expect("valid structure");
    (s, a)
}

pub fn exact(v: &Scalar) -> BigRational {
    v.as_rational().expect("exact scalar").clone()
}

/// Determinant by Laplace expansion along the first row.
pub fn cofactor_det(m: &[Vec<BigRational>]) -> BigRational {
    let n = m.len();
    if n == 0 {
        return BigRational::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut total = BigRational::zero();
    for col in 0..n {
        if m[0][col].is_zero() {
            continue;
        }
        let minor: Vec<Vec<BigRational>> = m[1..]
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != col)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect();
        let term = &m[0][col] * cofactor_det(&minor);
        if col % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

/// Coefficients (constant term first) of the polynomial of degree
/// `< xs.len()` through the points `(xs[i], ys[i])`.
pub fn lagrange(xs: &[BigRational], ys: &[BigRational]) -> Vec<BigRational> {
    let n = xs.len();
    let mut out = vec![BigRational::zero(); n];
    for i in 0..n {
        // basis polynomial ∏_{j≠i} (t − x_j)/(x_i − x_j)
        let mut basis = vec![BigRational::one()];
        let mut denom = BigRational::one();
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut next = vec![BigRational::zero(); basis.len() + 1];
            for (k, b) in basis.iter().enumerate() {
                next[k + 1] += b;
                next[k] -= b * &xs[j];
            }
            basis = next;
            denom *= &xs[i] - &xs[j];
        }
        let w = &ys[i] / denom;
        for (k, b) in basis.iter().enumerate() {
            out[k] += b * &w;
        }
    }
    out
}

/// Evaluates coefficients (constant first) at `t`.
pub fn horner(coeffs: &[BigRational], t: &BigRational) -> BigRational {
    coeffs
        .iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * t + c)
}

/// Rewrites `p(c)` (constant first) as a polynomial in `ĉ = a·c + b`.
pub fn in_shifted_variable(p: &[BigRational], a: &BigRational, b: &BigRational) -> Vec<BigRational> {
    // c = (ĉ − b)/a; sample at enough ĉ values and interpolate
    let ts: Vec<BigRational> = (0..p.len() as i64).map(|k| q(k, 1)).collect();
    let vals: Vec<BigRational> = ts.iter().map(|t| horner(p, &((t - b) / a))).collect();
    lagrange(&ts, &vals)
}

/// Largest relative deviation between two coefficient vectors after scaling
/// `got` to match `want` in its largest-magnitude entry.
pub fn proportionality_error(got: &[BigRational], want: &[i64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let pivot = (0..want.len()).max_by_key(|&i| want[i].abs()).unwrap();
    if got[pivot].is_zero() {
        return f64::INFINITY;
    }
    let s = q(want[pivot], 1) / &got[pivot];
    got.iter()
        .zip(want)
        .map(|(g, &w)| {
            let diff = (g * &s - q(w, 1)).abs().to_f64().unwrap();
            diff / (w.unsigned_abs().max(1) as f64)
        })
        .fold(0.0, f64::max)
}

/// Number of sign changes of `p` (constant first) on `[lo, hi]` sampled at
/// `n` points, a cheap lower bound on its real roots there.
pub fn sign_changes(p: &[BigRational], lo: i64, hi: i64, n: i64) -> usize {
    let mut prev: Option<bool> = None;
    let mut count = 0;
    for k in 0..=n {
        let t = q(lo * n + (hi - lo) * k, n);
        let v = horner(p, &t);
        if v.is_zero() {
            continue;
        }
        let pos = v.is_positive();
        if prev.is_some_and(|p| p != pos) {
            count += 1;
        }
        prev = Some(pos);
    }
    count
}

pub const RATIONAL: EvalMode = EvalMode::Rational;
