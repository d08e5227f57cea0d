//! Invariants of a projective structure at a point: the Liouville expressions
//! `L₁, L₂`, Tresse's `I₁`, `ν₅`, the curvature row `V`, the connection
//! `Ω₁, Ω₂` of the prolonged linear system, the obstruction matrices `M` and
//! `M_max`, the sixth-order invariants `E₁, E₂`, the rank-stratified
//! obstructions, the Cartan rank test and the resulting verdict.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, EvalMode};
use crate::input_model::ProjectiveStructure;
use crate::jets::{Axis, Jet, JetError, Point};
use crate::linalg::{self, Matrix, RankKernel};
use crate::scalar::{Mode, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Jets of `A₀ … A₃` at one base point, all of the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct JetStructure {
    pub a: [Jet; 4],
}

/// A row vector of six scalar fields.
pub type Covector6 = Vec<Jet>;

/// A 6×6 matrix of scalar fields.
pub type JetMatrix = Vec<Vec<Jet>>;

impl JetStructure {
    pub fn new(a: [Jet; 4]) -> Result<Self, JetError> {
        for j in &a[1..] {
            if j.order() != a[0].order() {
                return Err(JetError::OrderMismatch(a[0].order(), j.order()));
            }
            if !j.base().same_as(a[0].base()) {
                return Err(JetError::BasePointMismatch(
                    a[0].base().clone(),
                    j.base().clone(),
                ));
            }
        }
        Ok(JetStructure { a })
    }

    pub fn at(
        s: &ProjectiveStructure,
        p: &Point,
        order: usize,
        mode: EvalMode,
    ) -> Result<Self, InvariantError> {
        Ok(JetStructure::new(s.jets(p, order, mode)?)?)
    }

    pub fn order(&self) -> usize {
        self.a[0].order()
    }

    pub fn base(&self) -> &Point {
        self.a[0].base()
    }

    pub fn mode(&self) -> Mode {
        self.a
            .iter()
            .map(Jet::mode)
            .fold(Mode::Rational, Mode::join)
    }

    fn need(&self, k: usize) -> Result<usize, JetError> {
        if self.order() < k {
            return Err(JetError::InsufficientOrder {
                required: k,
                available: self.order(),
            });
        }
        Ok(self.order() - k)
    }
}

fn q(n: i64, d: i64) -> Scalar {
    Scalar::ratio(n, d)
}

/// `Σ (n/d) · ∏ factors`, all factors at order `order`.
fn terms(order: usize, base: &Point, ts: &[(i64, i64, &[&Jet])]) -> Jet {
    let mut acc = Jet::zero(order, base.clone());
    for (n, d, fs) in ts {
        let mut prod = Jet::constant(q(*n, *d), order, base.clone());
        for f in fs.iter() {
            prod = &prod * *f;
        }
        acc = &acc + &prod;
    }
    acc
}

/// Values and first/second derivatives of the `A`s truncated to a common order.
struct Derivs {
    n: usize,
    base: Point,
    a: Vec<Jet>,
    x: Vec<Jet>,
    y: Vec<Jet>,
    xx: Vec<Jet>,
    xy: Vec<Jet>,
    yy: Vec<Jet>,
}

impl Derivs {
    fn new(s: &JetStructure) -> Result<Self, JetError> {
        let n = s.need(2)?;
        let d1 = |ax| -> Result<Vec<Jet>, JetError> {
            s.a.iter().map(|j| Ok(j.diff(ax)?.truncate(n))).collect()
        };
        let d2 = |a1, a2| -> Result<Vec<Jet>, JetError> {
            s.a.iter().map(|j| j.diff(a1)?.diff(a2)).collect()
        };
        Ok(Derivs {
            n,
            base: s.base().clone(),
            a: s.a.iter().map(|j| j.truncate(n)).collect(),
            x: d1(Axis::X)?,
            y: d1(Axis::Y)?,
            xx: d2(Axis::X, Axis::X)?,
            xy: d2(Axis::X, Axis::Y)?,
            yy: d2(Axis::Y, Axis::Y)?,
        })
    }

    fn t(&self, ts: &[(i64, i64, &[&Jet])]) -> Jet {
        terms(self.n, &self.base, ts)
    }
}

/// Liouville's `L₁, L₂`; the order drops by two.
pub fn liouville_l(s: &JetStructure) -> Result<(Jet, Jet), JetError> {
    let d = Derivs::new(s)?;
    let (a, x, y) = (&d.a, &d.x, &d.y);
    let l1 = d.t(&[
        (2, 3, &[&d.xy[1]]),
        (-1, 3, &[&d.xx[2]]),
        (-1, 1, &[&d.yy[0]]),
        (1, 1, &[&a[0], &y[2]]),
        (1, 1, &[&a[2], &y[0]]),
        (-1, 1, &[&a[3], &x[0]]),
        (-2, 1, &[&a[0], &x[3]]),
        (-2, 3, &[&a[1], &y[1]]),
        (1, 3, &[&a[1], &x[2]]),
    ]);
    let l2 = d.t(&[
        (2, 3, &[&d.xy[2]]),
        (-1, 3, &[&d.yy[1]]),
        (-1, 1, &[&d.xx[3]]),
        (-1, 1, &[&a[3], &x[1]]),
        (-1, 1, &[&a[1], &x[3]]),
        (1, 1, &[&a[0], &y[3]]),
        (2, 1, &[&a[3], &y[0]]),
        (2, 3, &[&a[2], &x[2]]),
        (-1, 3, &[&a[2], &y[1]]),
    ]);
    Ok((l1, l2))
}

/// Polynomials in the slope `p` with jet coefficients (all of one order).
#[derive(Clone)]
struct SlopePoly(Vec<Jet>);

impl SlopePoly {
    fn order(&self) -> usize {
        self.0[0].order()
    }

    fn base(&self) -> Point {
        self.0[0].base().clone()
    }

    fn truncate(&self, n: usize) -> SlopePoly {
        SlopePoly(self.0.iter().map(|j| j.truncate(n)).collect())
    }

    fn add(&self, o: &SlopePoly) -> SlopePoly {
        let n = self.order().min(o.order());
        let zero = Jet::zero(n, self.base());
        let len = self.0.len().max(o.0.len());
        SlopePoly(
            (0..len)
                .map(|i| {
                    let a = self.0.get(i).map_or(zero.clone(), |j| j.truncate(n));
                    let b = o.0.get(i).map_or(zero.clone(), |j| j.truncate(n));
                    &a + &b
                })
                .collect(),
        )
    }

    fn mul(&self, o: &SlopePoly) -> SlopePoly {
        let n = self.order().min(o.order());
        let a = self.truncate(n);
        let b = o.truncate(n);
        let mut out = vec![Jet::zero(n, self.base()); a.0.len() + b.0.len() - 1];
        for (i, x) in a.0.iter().enumerate() {
            for (j, y) in b.0.iter().enumerate() {
                out[i + j] = &out[i + j] + &(x * y);
            }
        }
        SlopePoly(out)
    }

    fn scale(&self, s: Scalar) -> SlopePoly {
        SlopePoly(self.0.iter().map(|j| j.scale(&s)).collect())
    }

    fn d_space(&self, ax: Axis) -> Result<SlopePoly, JetError> {
        Ok(SlopePoly(
            self.0.iter().map(|j| j.diff(ax)).collect::<Result<_, _>>()?,
        ))
    }

    fn d_slope(&self) -> SlopePoly {
        if self.0.len() == 1 {
            return SlopePoly(vec![Jet::zero(self.order(), self.base())]);
        }
        SlopePoly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(k, j)| j.scale(&Scalar::int(k as i64 + 1)))
                .collect(),
        )
    }

    fn slope_var(n: usize, base: Point) -> SlopePoly {
        SlopePoly(vec![
            Jet::zero(n, base.clone()),
            Jet::constant(Scalar::one(), n, base),
        ])
    }

    fn eval(&self, p: &Scalar) -> Scalar {
        self.0
            .iter()
            .rev()
            .fold(Scalar::zero(), |acc, c| acc * p + c.value())
    }
}

/// Tresse's relative invariant `I₁` of `y″ = Λ(x, y, y′)` at the given slope,
/// computed from its defining formula in total derivatives
/// `D = ∂ₓ + p∂ᵧ + Λ∂ₚ`. For cubic `Λ` it equals `−6L₁ − 6L₂p`.
pub fn tresse_i1(s: &JetStructure, slope: &Scalar) -> Result<Scalar, JetError> {
    s.need(2)?;
    let lam = SlopePoly(s.a.to_vec());
    let total = |f: &SlopePoly| -> Result<SlopePoly, JetError> {
        let p = SlopePoly::slope_var(f.order(), f.base());
        let fx = f.d_space(Axis::X)?;
        let fy = f.d_space(Axis::Y)?;
        Ok(fx.add(&p.mul(&fy)).add(&lam.mul(&f.d_slope())))
    };
    let l0 = lam.d_space(Axis::Y)?;
    let l1 = lam.d_slope();
    let l11 = l1.d_slope();
    let l01 = l0.d_slope();
    let l00 = l0.d_space(Axis::Y)?;
    let dl11 = total(&l11)?;
    let i1 = total(&dl11)?
        .add(&total(&l01)?.scale(Scalar::int(-4)))
        .add(&l1.mul(&dl11).scale(Scalar::int(-1)))
        .add(&l1.mul(&l01).scale(Scalar::int(4)))
        .add(&l0.mul(&l11).scale(Scalar::int(-3)))
        .add(&l00.scale(Scalar::int(6)));
    Ok(i1.eval(slope))
}

/// Liouville's relative invariant `ν₅`.
pub fn nu5(s: &JetStructure) -> Result<Scalar, JetError> {
    s.need(3)?;
    let (l1, l2) = liouville_l(s)?;
    let n = l1.order() - 1;
    let base = s.base().clone();
    let l1x = l1.diff(Axis::X)?;
    let l1y = l1.diff(Axis::Y)?;
    let l2x = l2.diff(Axis::X)?;
    let l2y = l2.diff(Axis::Y)?;
    let (l1, l2) = (l1.truncate(n), l2.truncate(n));
    let a: Vec<Jet> = s.a.iter().map(|j| j.truncate(n)).collect();
    let v = terms(
        n,
        &base,
        &[
            (1, 1, &[&l2, &l1, &l2x]),
            (-1, 1, &[&l2, &l2, &l1x]),
            (1, 1, &[&l1, &l2, &l1y]),
            (-1, 1, &[&l1, &l1, &l2y]),
            (1, 1, &[&a[3], &l1, &l1, &l1]),
            (-1, 1, &[&a[2], &l1, &l1, &l2]),
            (1, 1, &[&a[1], &l1, &l2, &l2]),
            (-1, 1, &[&a[0], &l2, &l2, &l2]),
        ],
    );
    Ok(v.value().clone())
}

/// The curvature row `V = (V₁, …, V₆)` of the prolonged system; order drops by three.
pub fn vector_v(s: &JetStructure) -> Result<Covector6, JetError> {
    s.need(3)?;
    let (l1, l2) = liouville_l(s)?;
    let n = l1.order() - 1;
    let base = s.base().clone();
    let l1x = l1.diff(Axis::X)?;
    let l1y = l1.diff(Axis::Y)?;
    let l2x = l2.diff(Axis::X)?;
    let l2y = l2.diff(Axis::Y)?;
    let (l1, l2) = (l1.truncate(n), l2.truncate(n));
    let a: Vec<Jet> = s.a.iter().map(|j| j.truncate(n)).collect();
    let t = |ts: &[(i64, i64, &[&Jet])]| terms(n, &base, ts);
    Ok(vec![
        t(&[(2, 1, &[&l2y]), (4, 1, &[&a[2], &l2]), (8, 1, &[&a[3], &l1])]),
        t(&[
            (-2, 1, &[&l1y]),
            (-2, 1, &[&l2x]),
            (-4, 3, &[&a[1], &l2]),
            (4, 3, &[&a[2], &l1]),
        ]),
        t(&[(2, 1, &[&l1x]), (-8, 1, &[&a[0], &l2]), (-4, 1, &[&a[1], &l1])]),
        t(&[(-5, 1, &[&l2])]),
        t(&[(-5, 1, &[&l1])]),
        Jet::zero(n, base.clone()),
    ])
}

/// The connection `D = d + Ω₁dx + Ω₂dy` of the prolonged system acting on
/// `Ψ = (ψ₁, ψ₂, ψ₃, μ, ν, ρ)`; entries are at order `N − 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionMatrices {
    pub omega1: JetMatrix,
    pub omega2: JetMatrix,
}

impl ConnectionMatrices {
    pub fn get(&self, axis: Axis) -> &JetMatrix {
        match axis {
            Axis::X => &self.omega1,
            Axis::Y => &self.omega2,
        }
    }

    pub fn order(&self) -> usize {
        self.omega1[0][0].order()
    }

    pub fn truncate(&self, n: usize) -> ConnectionMatrices {
        let tr = |m: &JetMatrix| -> JetMatrix {
            m.iter()
                .map(|r| r.iter().map(|j| j.truncate(n)).collect())
                .collect()
        };
        ConnectionMatrices {
            omega1: tr(&self.omega1),
            omega2: tr(&self.omega2),
        }
    }

    /// Values at the base point.
    pub fn values(&self, axis: Axis) -> Matrix {
        self.get(axis)
            .iter()
            .map(|r| r.iter().map(|j| j.value().clone()).collect())
            .collect()
    }
}

pub fn connection_matrices(s: &JetStructure) -> Result<ConnectionMatrices, JetError> {
    let d = Derivs::new(s)?;
    let (a, x, y) = (&d.a, &d.x, &d.y);
    let (xx, xy, yy) = (&d.xx, &d.xy, &d.yy);
    let zero = Jet::zero(d.n, d.base.clone());
    let mut o1 = vec![vec![zero.clone(); 6]; 6];
    let mut o2 = vec![vec![zero.clone(); 6]; 6];
    let t = |ts: &[(i64, i64, &[&Jet])]| d.t(ts);

    o1[0][0] = t(&[(-2, 3, &[&a[1]])]);
    o1[0][1] = t(&[(2, 1, &[&a[0]])]);
    o1[1][3] = t(&[(-1, 2, &[])]);
    o1[2][0] = t(&[(-2, 1, &[&a[3]])]);
    o1[2][1] = t(&[(-2, 3, &[&a[2]])]);
    o1[2][2] = t(&[(4, 3, &[&a[1]])]);
    o1[2][4] = t(&[(1, 1, &[])]);
    o1[3][0] = t(&[(-4, 3, &[&x[2]]), (4, 1, &[&a[0], &a[3]]), (2, 3, &[&y[1]])]);
    o1[3][1] = t(&[
        (-2, 1, &[&y[0]]),
        (2, 3, &[&x[1]]),
        (4, 1, &[&a[2], &a[0]]),
        (-4, 9, &[&a[1], &a[1]]),
    ]);
    o1[3][2] = t(&[(2, 1, &[&x[0]]), (-4, 1, &[&a[0], &a[1]])]);
    o1[3][3] = t(&[(-1, 3, &[&a[1]])]);
    o1[3][4] = t(&[(-3, 1, &[&a[0]])]);
    o1[4][5] = t(&[(-1, 1, &[])]);
    o1[5][0] = t(&[
        (-4, 3, &[&xy[2]]),
        (-20, 3, &[&a[0], &a[2], &a[3]]),
        (2, 3, &[&yy[1]]),
        (4, 1, &[&a[3], &y[0]]),
        (-2, 1, &[&a[0], &y[3]]),
        (-16, 9, &[&a[2], &x[2]]),
        (8, 9, &[&a[2], &y[1]]),
    ]);
    o1[5][1] = t(&[
        (2, 3, &[&xy[1]]),
        (-4, 3, &[&a[1], &y[1]]),
        (2, 1, &[&a[0], &y[2]]),
        (-2, 1, &[&yy[0]]),
        (4, 1, &[&a[2], &y[0]]),
        (4, 1, &[&a[3], &x[0]]),
        (6, 1, &[&a[0], &x[3]]),
        (8, 9, &[&a[1], &x[2]]),
        (4, 3, &[&a[0], &a[1], &a[3]]),
        (-4, 3, &[&a[0], &a[2], &a[2]]),
    ]);
    o1[5][2] = t(&[
        (2, 1, &[&xy[0]]),
        (2, 3, &[&a[0], &x[2]]),
        (-4, 3, &[&a[2], &x[0]]),
        (-4, 1, &[&a[1], &y[0]]),
        (-4, 3, &[&a[0], &y[1]]),
        (8, 3, &[&a[0], &a[1], &a[2]]),
        (4, 1, &[&a[3], &a[0], &a[0]]),
    ]);
    o1[5][3] = t(&[(4, 3, &[&x[2]]), (-1, 1, &[&y[1]]), (5, 1, &[&a[0], &a[3]])]);
    o1[5][4] = t(&[
        (1, 3, &[&x[1]]),
        (-4, 1, &[&y[0]]),
        (3, 1, &[&a[2], &a[0]]),
        (-2, 9, &[&a[1], &a[1]]),
    ]);
    o1[5][5] = t(&[(-1, 3, &[&a[1]])]);

    o2[0][0] = t(&[(-4, 3, &[&a[2]])]);
    o2[0][1] = t(&[(2, 3, &[&a[1]])]);
    o2[0][2] = t(&[(2, 1, &[&a[0]])]);
    o2[0][3] = t(&[(1, 1, &[])]);
    o2[1][4] = t(&[(-1, 2, &[])]);
    o2[2][1] = t(&[(-2, 1, &[&a[3]])]);
    o2[2][2] = t(&[(2, 3, &[&a[2]])]);
    o2[3][5] = t(&[(-1, 1, &[])]);
    o2[4][0] = t(&[(-2, 1, &[&y[3]]), (-4, 1, &[&a[3], &a[2]])]);
    o2[4][1] = t(&[
        (2, 1, &[&x[3]]),
        (-2, 3, &[&y[2]]),
        (4, 1, &[&a[1], &a[3]]),
        (-4, 9, &[&a[2], &a[2]]),
    ]);
    o2[4][2] = t(&[(4, 3, &[&y[1]]), (-2, 3, &[&x[2]]), (4, 1, &[&a[0], &a[3]])]);
    o2[4][3] = t(&[(3, 1, &[&a[3]])]);
    o2[4][4] = t(&[(1, 3, &[&a[2]])]);
    o2[5][0] = t(&[
        (-2, 1, &[&xy[3]]),
        (-4, 1, &[&a[2], &x[3]]),
        (-4, 3, &[&a[3], &x[2]]),
        (2, 3, &[&a[3], &y[1]]),
        (-4, 3, &[&a[1], &y[3]]),
        (-4, 1, &[&a[0], &a[3], &a[3]]),
        (-8, 3, &[&a[1], &a[2], &a[3]]),
    ]);
    o2[5][1] = t(&[
        (2, 1, &[&xx[3]]),
        (-4, 3, &[&a[2], &x[2]]),
        (-4, 3, &[&a[0], &a[2], &a[3]]),
        (-2, 3, &[&xy[2]]),
        (4, 1, &[&a[1], &x[3]]),
        (4, 1, &[&a[0], &y[3]]),
        (6, 1, &[&a[3], &y[0]]),
        (4, 3, &[&a[3], &a[1], &a[1]]),
        (2, 1, &[&a[3], &x[1]]),
        (8, 9, &[&a[2], &y[1]]),
    ]);
    o2[5][2] = t(&[
        (-2, 3, &[&xx[2]]),
        (8, 9, &[&a[1], &x[2]]),
        (4, 1, &[&a[0], &x[3]]),
        (-2, 1, &[&a[3], &x[0]]),
        (-16, 9, &[&a[1], &y[1]]),
        (4, 3, &[&xy[1]]),
        (20, 3, &[&a[0], &a[1], &a[3]]),
    ]);
    o2[5][3] = t(&[
        (4, 1, &[&x[3]]),
        (-1, 3, &[&y[2]]),
        (3, 1, &[&a[1], &a[3]]),
        (-2, 9, &[&a[2], &a[2]]),
    ]);
    o2[5][4] = t(&[(1, 1, &[&x[2]]), (-4, 3, &[&y[1]]), (5, 1, &[&a[0], &a[3]])]);
    o2[5][5] = t(&[(1, 3, &[&a[2]])]);

    Ok(ConnectionMatrices {
        omega1: o1,
        omega2: o2,
    })
}

fn check_row_order(row: &Covector6) -> Result<usize, JetError> {
    let n = row[0].order();
    if n == 0 {
        return Err(JetError::InsufficientOrder {
            required: 1,
            available: 0,
        });
    }
    Ok(n)
}

/// `D_a W = ∂_a W − W Ω_a` for a row `W`; the order drops by one.
pub fn cov_deriv(
    row: &Covector6,
    om: &ConnectionMatrices,
    axis: Axis,
) -> Result<Covector6, JetError> {
    let n = check_row_order(row)? - 1;
    if om.order() < n {
        return Err(JetError::InsufficientOrder {
            required: n,
            available: om.order(),
        });
    }
    let omega = om.get(axis);
    let w: Vec<Jet> = row.iter().map(|j| j.truncate(n)).collect();
    (0..6)
        .map(|j| {
            let mut acc = row[j].diff(axis)?;
            for (i, wi) in w.iter().enumerate() {
                let o = &omega[i][j];
                if o.is_zero() || wi.is_zero() {
                    continue;
                }
                acc = &acc - &(wi * &o.truncate(n));
            }
            Ok(acc)
        })
        .collect()
}

/// Covariant derivatives of `V` along words in `{x, y}`, memoised.
///
/// A word `w = (a₁, …, a_k)` stands for `D_{a₁} ⋯ D_{a_k} V`.
pub struct DerivativeTower {
    om: ConnectionMatrices,
    truncated: HashMap<usize, ConnectionMatrices>,
    words: HashMap<Vec<Axis>, Covector6>,
}

impl DerivativeTower {
    pub fn new(s: &JetStructure) -> Result<Self, JetError> {
        let v = vector_v(s)?;
        let om = connection_matrices(s)?;
        let mut words = HashMap::new();
        words.insert(Vec::new(), v);
        Ok(DerivativeTower {
            om,
            truncated: HashMap::new(),
            words,
        })
    }

    pub fn connection(&self) -> &ConnectionMatrices {
        &self.om
    }

    /// Highest word length available.
    pub fn max_length(&self) -> usize {
        self.words[&Vec::new()][0].order()
    }

    pub fn word(&mut self, w: &[Axis]) -> Result<&Covector6, JetError> {
        if !self.words.contains_key(w) {
            let inner = self.word(&w[1..])?.clone();
            let n = inner[0].order().saturating_sub(1);
            if !self.truncated.contains_key(&n) {
                let t = self.om.truncate(n.min(self.om.order()));
                self.truncated.insert(n, t);
            }
            let d = cov_deriv(&inner, &self.truncated[&n], w[0])?;
            self.words.insert(w.to_vec(), d);
        }
        Ok(&self.words[w])
    }

    /// Value at the base point of `D_{a₁}⋯D_{a_k}V` for one word.
    pub fn word_value(&mut self, w: &[Axis]) -> Result<Vec<Scalar>, JetError> {
        Ok(self.word(w)?.iter().map(|j| j.value().clone()).collect())
    }

    /// Symmetrised derivative of order `k` with `nx` derivatives in `x`:
    /// the average over all words with that letter content.
    pub fn sym_row(&mut self, k: usize, nx: usize) -> Result<Vec<Scalar>, JetError> {
        let words: Vec<Vec<Axis>> = all_words(k)
            .into_iter()
            .filter(|w| w.iter().filter(|&&a| a == Axis::X).count() == nx)
            .collect();
        let count = Scalar::int(words.len() as i64);
        let mut acc = vec![Scalar::zero(); 6];
        for w in &words {
            let v = self.word_value(w)?;
            for (a, b) in acc.iter_mut().zip(v) {
                *a = &*a + &b;
            }
        }
        Ok(acc.into_iter().map(|a| a / &count).collect())
    }

    /// Symmetrised rows of orders `0..=k_max`, ordered by order and then by
    /// decreasing number of `x` derivatives.
    pub fn stack(&mut self, k_max: usize) -> Result<Matrix, JetError> {
        let mut rows = Vec::new();
        for k in 0..=k_max {
            for nx in (0..=k).rev() {
                rows.push(self.sym_row(k, nx)?);
            }
        }
        Ok(rows)
    }
}

fn all_words(k: usize) -> Vec<Vec<Axis>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|w| {
                Axis::BOTH.iter().map(move |&a| {
                    let mut v = w.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

/// Row labels of the symmetrised stack, matching [`DerivativeTower::stack`].
pub fn stack_labels(k_max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for k in 0..=k_max {
        for nx in (0..=k).rev() {
            out.push(if k == 0 {
                "V".to_string()
            } else {
                format!("V_{}{}", "x".repeat(nx), "y".repeat(k - nx))
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixM {
    /// Rows `V, D_xV, D_yV, D_(xx)V, D_(xy)V, D_(yy)V` at the base point.
    pub rows: Matrix,
    pub det: Scalar,
}

pub fn matrix_m(tower: &mut DerivativeTower) -> Result<MatrixM, JetError> {
    let rows = tower.stack(2)?;
    let det = linalg::determinant(&rows);
    Ok(MatrixM { rows, det })
}

/// The 21×6 stack of symmetrised derivatives of `V` up to order five.
pub fn matrix_mmax(tower: &mut DerivativeTower) -> Result<Matrix, JetError> {
    tower.stack(5)
}

/// `P = W₁W₃ − W₂²`.
pub fn genericity_p(w: &[Scalar]) -> Scalar {
    &w[0] * &w[2] - &w[1] * &w[1]
}

fn q_nonzero(v: &Scalar, tol: f64) -> bool {
    match v {
        Scalar::Exact(_) => !v.is_zero(),
        Scalar::Float(f) => f.abs() > tol,
    }
}

/// Searches the span of `basis` for `W` with `W₁W₃ − W₂² ≠ 0`.
///
/// The form is quadratic, so it vanishes on the whole span exactly when it
/// vanishes on every basis vector and every pairwise sum.
pub fn kernel_has_nondegenerate(basis: &[Vec<Scalar>], tol: f64) -> Option<Vec<Scalar>> {
    for b in basis {
        if q_nonzero(&genericity_p(b), tol) {
            return Some(b.clone());
        }
    }
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            let w: Vec<Scalar> = basis[i].iter().zip(&basis[j]).map(|(a, b)| a + b).collect();
            if q_nonzero(&genericity_p(&w), tol) {
                return Some(w);
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SixthOrder {
    pub e1: Scalar,
    pub e2: Scalar,
    /// The five base rows used; the preferred choice is `V, V_x, V_y, V_xx, V_yy`.
    pub rows: Vec<String>,
    /// True when the preferred rows were dependent and a fallback was used.
    pub fallback: bool,
}

fn rank_of(rows: &[Vec<Scalar>], tol: f64) -> usize {
    linalg::rank_kernel(rows, tol).rank
}

/// `E₁ = det(V, V_x, V_y, V_xx, V_yy, V_xxx)` and `E₂` with `V_yyy`.
///
/// Returns `None` when no five independent rows exist among `V` and its
/// symmetrised derivatives of order at most two.
pub fn sixth_order_e(tower: &mut DerivativeTower, tol: f64) -> Result<Option<SixthOrder>, JetError> {
    use Axis::{X, Y};
    let named: Vec<(&str, Vec<Scalar>)> = vec![
        ("V", tower.sym_row(0, 0)?),
        ("V_x", tower.sym_row(1, 1)?),
        ("V_y", tower.sym_row(1, 0)?),
        ("V_xx", tower.sym_row(2, 2)?),
        ("V_xy", tower.sym_row(2, 1)?),
        ("V_yy", tower.sym_row(2, 0)?),
    ];
    let preferred = [0usize, 1, 2, 3, 5];
    let pick = |idx: &[usize]| -> Matrix { idx.iter().map(|&i| named[i].1.clone()).collect() };
    let (chosen, fallback) = if rank_of(&pick(&preferred), tol) == 5 {
        (preferred.to_vec(), false)
    } else {
        let mut chosen: Vec<usize> = Vec::new();
        for i in 0..named.len() {
            let mut trial = chosen.clone();
            trial.push(i);
            if rank_of(&pick(&trial), tol) == trial.len() {
                chosen = trial;
            }
            if chosen.len() == 5 {
                break;
            }
        }
        if chosen.len() < 5 {
            return Ok(None);
        }
        (chosen, true)
    };
    let base = pick(&chosen);
    let with = |extra: Vec<Scalar>| {
        let mut m = base.clone();
        m.push(extra);
        linalg::determinant(&m)
    };
    let e1 = with(tower.word_value(&[X, X, X])?);
    let e2 = with(tower.word_value(&[Y, Y, Y])?);
    Ok(Some(SixthOrder {
        e1,
        e2,
        rows: chosen.iter().map(|&i| named[i].0.to_string()).collect(),
        fallback,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Stratified {
    /// The determinant of the six-row stack for this rank case.
    Obstruction {
        rank_case: usize,
        rows: Vec<String>,
        det: Scalar,
        stack_rank: usize,
        kernel: Vec<Vec<Scalar>>,
    },
    /// The stipulated independent rows do not exist: no further condition.
    ClosedAtLowerRank { rank_case: usize },
}

fn word_of(letters: &str) -> Vec<Axis> {
    letters
        .chars()
        .map(|c| if c == 'x' { Axis::X } else { Axis::Y })
        .collect()
}

/// The order-8 (rank 3) or order-7 (rank 4) obstruction.
///
/// Rank 3 uses `V, V_x, V_xx, …, V_xxxxx` (or the `y` version when
/// `V, V_y, V_yy` are the independent rows); rank 4 uses
/// `V, V_x, V_y, V_xx, V_xxx, V_xxxx` (or its `x↔y` mirror).
pub fn stratified_obstruction(
    tower: &mut DerivativeTower,
    rank_case: usize,
    tol: f64,
) -> Result<Stratified, JetError> {
    let candidates: Vec<(Vec<&str>, Vec<&str>)> = match rank_case {
        3 => vec![
            (vec!["", "x", "xx"], vec!["", "x", "xx", "xxx", "xxxx", "xxxxx"]),
            (vec!["", "y", "yy"], vec!["", "y", "yy", "yyy", "yyyy", "yyyyy"]),
        ],
        4 => vec![
            (vec!["", "x", "y", "xx"], vec!["", "x", "y", "xx", "xxx", "xxxx"]),
            (vec!["", "y", "x", "yy"], vec!["", "y", "x", "yy", "yyy", "yyyy"]),
        ],
        _ => return Ok(Stratified::ClosedAtLowerRank { rank_case }),
    };
    if rank_case == 3 {
        // with V, V_x, V_y independent, further derivatives add nothing
        let basic: Matrix = ["", "x", "y"]
            .iter()
            .map(|w| tower.word_value(&word_of(w)))
            .collect::<Result<_, _>>()?;
        if rank_of(&basic, tol) == 3 {
            return Ok(Stratified::ClosedAtLowerRank { rank_case });
        }
    }
    for (indep, full) in candidates {
        let rows: Matrix = indep
            .iter()
            .map(|w| tower.word_value(&word_of(w)))
            .collect::<Result<_, _>>()?;
        if rank_of(&rows, tol) < indep.len() {
            continue;
        }
        let stack: Matrix = full
            .iter()
            .map(|w| tower.word_value(&word_of(w)))
            .collect::<Result<_, _>>()?;
        let rk = linalg::rank_kernel(&stack, tol);
        return Ok(Stratified::Obstruction {
            rank_case,
            rows: full.iter().map(|w| format!("V{}{w}", if w.is_empty() { "" } else { "_" })).collect(),
            det: linalg::determinant(&stack),
            stack_rank: rk.rank,
            kernel: rk.kernel,
        });
    }
    Ok(Stratified::ClosedAtLowerRank { rank_case })
}

fn mat_mul(a: &JetMatrix, b: &JetMatrix) -> JetMatrix {
    let n = a[0][0].order();
    let base = a[0][0].base().clone();
    (0..6)
        .map(|i| {
            (0..6)
                .map(|j| {
                    let mut acc = Jet::zero(n, base.clone());
                    for k in 0..6 {
                        if a[i][k].is_zero() || b[k][j].is_zero() {
                            continue;
                        }
                        acc = &acc + &(&a[i][k] * &b[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn mat_zip(a: &JetMatrix, b: &JetMatrix, f: impl Fn(&Jet, &Jet) -> Jet) -> JetMatrix {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| f(x, y)).collect())
        .collect()
}

fn mat_map(a: &JetMatrix, f: impl Fn(&Jet) -> Result<Jet, JetError>) -> Result<JetMatrix, JetError> {
    a.iter()
        .map(|r| r.iter().map(&f).collect())
        .collect()
}

/// Curvature `F = ∂ₓΩ₂ − ∂ᵧΩ₁ + [Ω₁, Ω₂]`; order drops by one.
pub fn curvature(om: &ConnectionMatrices) -> Result<JetMatrix, JetError> {
    let n = om.order().checked_sub(1).ok_or(JetError::InsufficientOrder {
        required: 1,
        available: 0,
    })?;
    let t = om.truncate(n);
    let dx2 = mat_map(&om.omega2, |j| j.diff(Axis::X))?;
    let dy1 = mat_map(&om.omega1, |j| j.diff(Axis::Y))?;
    let c12 = mat_mul(&t.omega1, &t.omega2);
    let c21 = mat_mul(&t.omega2, &t.omega1);
    let lin = mat_zip(&dx2, &dy1, |a, b| a - b);
    let br = mat_zip(&c12, &c21, |a, b| a - b);
    Ok(mat_zip(&lin, &br, |a, b| a + b))
}

/// `D_a X = ∂_a X + [Ω_a, X]` for an endomorphism-valued field.
fn end_deriv(x: &JetMatrix, om: &ConnectionMatrices, axis: Axis) -> Result<JetMatrix, JetError> {
    let n = x[0][0].order().checked_sub(1).ok_or(JetError::InsufficientOrder {
        required: 1,
        available: 0,
    })?;
    let o = om.truncate(n);
    let omega = o.get(axis);
    let xt = mat_map(x, |j| Ok(j.truncate(n)))?;
    let d = mat_map(x, |j| j.diff(axis))?;
    let ox = mat_mul(omega, &xt);
    let xo = mat_mul(&xt, omega);
    let br = mat_zip(&ox, &xo, |a, b| a - b);
    Ok(mat_zip(&d, &br, |a, b| a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CartanResult {
    /// `rank F_K` for `K = 0, 1, …` up to the cap.
    pub ranks: Vec<usize>,
    /// Smallest `K` with `rank F_K = rank F_{K+1}`.
    pub k0: Option<usize>,
    /// Dimension of the space of parallel sections, `6 − rank F_{K₀}`.
    pub s_dim: Option<usize>,
    /// Whether `S` lies in `{0, 1, 2, 3, 4, 6}`.
    pub koenigs_consistent: Option<bool>,
    pub marginal: bool,
}

/// Ranks of the stacks `F_K` of `F, DF, …, D^K F` until two consecutive
/// ranks agree. `F` is computed from `Ω` and differentiated as an
/// endomorphism, independently of the `V` tower.
pub fn cartan_stabilize(
    s: &JetStructure,
    k_cap: usize,
    tol: f64,
) -> Result<CartanResult, JetError> {
    let om = connection_matrices(s)?;
    let f = curvature(&om)?;
    let k_cap = k_cap.min(f[0][0].order());
    // canonical words D_x^i D_y^j F suffice: reordering derivatives changes
    // the result by commutators with F, whose rows lie in the stack already
    let mut y_chain = vec![f];
    for j in 1..=k_cap {
        let next = end_deriv(&y_chain[j - 1], &om, Axis::Y)?;
        y_chain.push(next);
    }
    let mut by_order: Vec<Vec<JetMatrix>> = vec![Vec::new(); k_cap + 1];
    for (j, m) in y_chain.into_iter().enumerate() {
        let mut cur = m;
        by_order[j].push(cur.clone());
        for i in 1..=(k_cap - j) {
            cur = end_deriv(&cur, &om, Axis::X)?;
            by_order[i + j].push(cur.clone());
        }
    }
    let mut rows: Matrix = Vec::new();
    let mut ranks = Vec::new();
    let mut marginal = false;
    let mut k0 = None;
    for (k, mats) in by_order.iter().enumerate() {
        for m in mats {
            for r in m {
                rows.push(r.iter().map(|j| j.value().clone()).collect());
            }
        }
        let rk: RankKernel = linalg::rank_kernel(&rows, tol);
        marginal |= rk.marginal;
        ranks.push(rk.rank);
        if k > 0 && ranks[k] == ranks[k - 1] {
            k0 = Some(k - 1);
            break;
        }
    }
    let s_dim = k0.map(|k| 6 - ranks[k]);
    Ok(CartanResult {
        ranks,
        k0,
        s_dim,
        koenigs_consistent: s_dim.map(|d| d != 5),
        marginal,
    })
}

/// For the structure `A₀ = −A(x, y)`, `A₁ = A₂ = A₃ = 0`: the sixth-order
/// necessary condition on `A`, written in `A_k = ∂ᵧᵏA` and `A_xk = ∂ₓ∂ᵧᵏA`:
///
/// `7A₃A₄A_x3 − 5A_x3A₅A₂ − 6A_x4A₃² + 6A₅A_x2A₃ − 7A₄²A_x2 + 5A_x4A₄A₂`.
pub fn degenerate_family_obstruction(a: &Jet) -> Result<Scalar, JetError> {
    let ay = |k| a.partial(0, k);
    let axy = |k| a.partial(1, k);
    let (a2, a3, a4, a5) = (ay(2)?, ay(3)?, ay(4)?, ay(5)?);
    let (x2, x3, x4) = (axy(2)?, axy(3)?, axy(4)?);
    let s = |n: i64| Scalar::int(n);
    Ok(s(7) * &a3 * &a4 * &x3 - s(5) * &x3 * &a5 * &a2 - s(6) * &x4 * &a3 * &a3
        + s(6) * &a5 * &x2 * &a3
        - s(7) * &a4 * &a4 * &x2
        + s(5) * &x4 * &a4 * &a2)
}

// ---------------------------------------------------------------------------
// Verdict

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    MetrisableFlat,
    Metrisable,
    NotMetrisable,
    DegenerateKernel,
    Inconclusive,
}

impl Verdict {
    /// Process exit status for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::MetrisableFlat | Verdict::Metrisable => 0,
            Verdict::NotMetrisable | Verdict::DegenerateKernel => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub order: usize,
    pub tolerance: f64,
    pub mode: EvalMode,
    /// Highest `K` tried in the Cartan rank test.
    pub cartan_cap: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            order: 10,
            tolerance: 1e-9,
            mode: EvalMode::Auto,
            cartan_cap: 6,
        }
    }
}

/// Everything computed at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub point: Point,
    pub mode: Mode,
    pub tolerance: f64,
    pub order: usize,
    pub l1: Scalar,
    pub l2: Scalar,
    /// `I₁ = c₀ + c₁y′` with `(c₀, c₁) = (−6L₁, −6L₂)`.
    pub i1_coeffs: [Scalar; 2],
    pub nu5: Scalar,
    pub v: Vec<Scalar>,
    pub m: Matrix,
    pub det_m: Scalar,
    pub rank_m: usize,
    pub kernel_m: Vec<Vec<Scalar>>,
    /// `W₁W₃ − W₂²` on the kernel of `M` when it is one-dimensional.
    pub p_value: Option<Scalar>,
    pub sixth_order: Option<SixthOrder>,
    pub stratified: Option<Stratified>,
    pub rank_mmax: Option<usize>,
    pub kernel_mmax: Option<Vec<Vec<Scalar>>>,
    pub witness: Option<Vec<Scalar>>,
    pub cartan: Option<CartanResult>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// Runs the full decision procedure at one point.
pub fn analyze_point(
    s: &ProjectiveStructure,
    p: &Point,
    cfg: &AnalysisConfig,
) -> Result<ObstructionReport, InvariantError> {
    let js = JetStructure::at(s, p, cfg.order, cfg.mode)?;
    analyze_jets(&js, cfg)
}

pub fn analyze_jets(js: &JetStructure, cfg: &AnalysisConfig) -> Result<ObstructionReport, InvariantError> {
    let tol = cfg.tolerance;
    let mut notes = Vec::new();
    let (l1, l2) = liouville_l(js)?;
    let flat = l1.vanishes(tol) && l2.vanishes(tol);
    let mut tower = DerivativeTower::new(js)?;
    let v: Vec<Scalar> = tower.word_value(&[])?;
    let mm = matrix_m(&mut tower)?;
    let rk_m = linalg::rank_kernel(&mm.rows, tol);
    let mut marginal = rk_m.marginal;
    let p_value = (rk_m.kernel.len() == 1).then(|| genericity_p(&rk_m.kernel[0]));

    let sixth_order = if !flat && tower.max_length() >= 3 {
        sixth_order_e(&mut tower, tol)?
    } else {
        None
    };
    if sixth_order.as_ref().is_some_and(|e| e.fallback) {
        notes.push("E1/E2 computed with fallback rows".into());
    }
    let stratified = if (rk_m.rank == 3 && tower.max_length() >= 5)
        || (rk_m.rank == 4 && tower.max_length() >= 4)
    {
        Some(stratified_obstruction(&mut tower, rk_m.rank, tol)?)
    } else {
        None
    };

    let have_mmax = tower.max_length() >= 5;
    let (rank_mmax, kernel_mmax) = if have_mmax && !flat {
        let rk = linalg::rank_kernel(&matrix_mmax(&mut tower)?, tol);
        marginal |= rk.marginal;
        (Some(rk.rank), Some(rk.kernel))
    } else {
        (None, None)
    };
    let cartan = if js.order() >= 4 {
        let c = cartan_stabilize(js, cfg.cartan_cap, tol)?;
        Some(c)
    } else {
        None
    };

    let m_witness = kernel_has_nondegenerate(&rk_m.kernel, tol);
    let mut witness = None;
    let verdict = if flat {
        witness = Some(vec![
            Scalar::one(),
            Scalar::zero(),
            Scalar::one(),
            Scalar::zero(),
            Scalar::zero(),
            Scalar::zero(),
        ]);
        Verdict::MetrisableFlat
    } else if rk_m.rank == 6 {
        Verdict::NotMetrisable
    } else if m_witness.is_none() {
        Verdict::DegenerateKernel
    } else if let (Some(r), Some(k)) = (rank_mmax, kernel_mmax.as_ref()) {
        if r == 6 {
            Verdict::NotMetrisable
        } else if let Some(w) = kernel_has_nondegenerate(k, tol) {
            witness = Some(w);
            Verdict::Metrisable
        } else {
            Verdict::DegenerateKernel
        }
    } else {
        notes.push(format!(
            "order {} is too low for the 21-row stack; need at least 8",
            js.order()
        ));
        Verdict::Inconclusive
    };
    let verdict = if marginal && !flat {
        notes.push("a rank decision was within the marginal band of the tolerance".into());
        Verdict::Inconclusive
    } else {
        verdict
    };
    if verdict == Verdict::Metrisable {
        notes.push("sufficiency holds for real-analytic structures".into());
    }

    Ok(ObstructionReport {
        point: js.base().clone(),
        mode: js.mode(),
        tolerance: tol,
        order: js.order(),
        l1: l1.value().clone(),
        l2: l2.value().clone(),
        i1_coeffs: [
            l1.value() * &Scalar::int(-6),
            l2.value() * &Scalar::int(-6),
        ],
        nu5: nu5(js)?,
        v,
        m: mm.rows,
        det_m: mm.det,
        rank_m: rk_m.rank,
        kernel_m: rk_m.kernel,
        p_value,
        sixth_order,
        stratified,
        rank_mmax,
        kernel_mmax,
        witness,
        cartan,
        verdict,
        notes,
    })
}

/// Combines per-point verdicts: unanimous agreement or `Inconclusive`.
pub fn summarize(verdicts: &[Verdict]) -> Verdict {
    match verdicts.split_first() {
        Some((first, rest)) if rest.iter().all(|v| v == first) => *first,
        _ => Verdict::Inconclusive,
    }
}
