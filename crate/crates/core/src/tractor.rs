//! Tractor-calculus form of the order-five obstruction.
//!
//! Tensors are computed from a torsion-free connection `Γ` whose volume form
//! `ε` is parallel. Because `∇ε = 0`, every derivative of an ε-contraction is
//! the contraction of a derivative, so all tensors below are built with lower
//! indices only and contracted against the constant `ε` at the base point.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, EvalMode, Expr};
use crate::invariants::JetStructure;
use crate::jets::{Axis, Jet, JetError, Point};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TractorError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("matrix violates the block layout: {0}")]
    Contract(String),
}

/// Connection coefficients `Γ^c_{ab}` as jets, indexed `[c][a][b]`.
pub type Christoffel = [[[Jet; 2]; 2]; 2];

/// The trace-free representative: `Π¹₁₁ = A₁/3`, `Π¹₁₂ = A₂/3`, `Π¹₂₂ = A₃`,
/// `Π²₁₁ = −A₀`, `Π²₁₂ = −A₁/3`, `Π²₂₂ = −A₂/3`.
pub fn pi_symbols(s: &JetStructure) -> Christoffel {
    let third = Scalar::ratio(1, 3);
    let a = &s.a;
    let p111 = a[1].scale(&third);
    let p112 = a[2].scale(&third);
    let p122 = a[3].clone();
    let p211 = -&a[0];
    let p212 = -&a[1].scale(&third);
    let p222 = -&a[2].scale(&third);
    [
        [[p111, p112.clone()], [p112, p122]],
        [[p211, p212.clone()], [p212, p222]],
    ]
}

/// A covariant tensor with all indices down. Component `(i₁, …, i_k)` is
/// stored at the binary number `i₁i₂…i_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rank: usize,
    comps: Vec<Jet>,
}

impl Tensor {
    pub fn rank(&self) -> usize {
        self.rank
    }

    fn offset(idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 2 + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Jet {
        debug_assert_eq!(idx.len(), self.rank);
        &self.comps[Self::offset(idx)]
    }

    pub fn value(&self, idx: &[usize]) -> Scalar {
        self.get(idx).value().clone()
    }

    fn order(&self) -> usize {
        self.comps[0].order()
    }

    /// `(∇_a T)_{a i₁…i_k} = ∂_a T_{i…} − Σ_m Γ^d_{a i_m} T_{…d…}`; the new
    /// index comes first and the order drops by one.
    pub fn covariant(&self, gamma: &Christoffel) -> Result<Tensor, JetError> {
        let n = self.order().checked_sub(1).ok_or(JetError::InsufficientOrder {
            required: 1,
            available: 0,
        })?;
        let size = 1usize << self.rank;
        let truncated: Vec<Jet> = self.comps.iter().map(|j| j.truncate(n)).collect();
        let mut comps = Vec::with_capacity(2 * size);
        for a in 0..2 {
            let axis = Axis::from_index(a);
            for off in 0..size {
                let mut acc = self.comps[off].diff(axis)?;
                for m in 0..self.rank {
                    let bit = self.rank - 1 - m;
                    let im = (off >> bit) & 1;
                    for d in 0..2 {
                        let g = &gamma[d][a][im];
                        let other = (off & !(1 << bit)) | (d << bit);
                        if g.is_zero() || truncated[other].is_zero() {
                            continue;
                        }
                        acc = &acc - &(&g.truncate(n) * &truncated[other]);
                    }
                }
                comps.push(acc);
            }
        }
        Ok(Tensor {
            rank: self.rank + 1,
            comps,
        })
    }
}

/// Schouten tensor `P_{bd} = R^c_{cbd}` of a connection whose `β` vanishes,
/// with `R^c_{abd} = ∂_aΓ^c_{bd} − ∂_bΓ^c_{ad} + Γ^c_{ae}Γ^e_{bd} − Γ^c_{be}Γ^e_{ad}`.
pub fn schouten(gamma: &Christoffel) -> Result<Tensor, JetError> {
    let n = gamma[0][0][0]
        .order()
        .checked_sub(1)
        .ok_or(JetError::InsufficientOrder {
            required: 1,
            available: 0,
        })?;
    let base = gamma[0][0][0].base().clone();
    let g = |c: usize, a: usize, b: usize| gamma[c][a][b].truncate(n);
    let mut comps = Vec::new();
    for b in 0..2 {
        for d in 0..2 {
            let mut acc = Jet::zero(n, base.clone());
            for c in 0..2 {
                acc = &acc + &gamma[c][b][d].diff(Axis::from_index(c))?;
                acc = &acc - &gamma[c][c][d].diff(Axis::from_index(b))?;
                for e in 0..2 {
                    acc = &acc + &(&g(c, c, e) * &g(e, b, d));
                    acc = &acc - &(&g(c, b, e) * &g(e, c, d));
                }
            }
            comps.push(acc);
        }
    }
    Ok(Tensor { rank: 2, comps })
}

/// Cotton tensor `Y_{abc} = ½(∇_aP_{bc} − ∇_bP_{ac})`.
pub fn cotton(dp: &Tensor) -> Tensor {
    let half = Scalar::ratio(1, 2);
    let mut comps = Vec::with_capacity(8);
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                comps.push((dp.get(&[a, b, c]) - dp.get(&[b, a, c])).scale(&half));
            }
        }
    }
    Tensor { rank: 3, comps }
}

/// The volume form `ε^{ab}` with `ε⁰¹ = λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeForm(pub Scalar);

impl VolumeForm {
    pub fn standard() -> Self {
        VolumeForm(Scalar::one())
    }

    pub fn get(&self, a: usize, b: usize) -> Scalar {
        match (a, b) {
            (0, 1) => self.0.clone(),
            (1, 0) => -&self.0,
            _ => Scalar::zero(),
        }
    }
}

/// The named blocks of the obstruction matrix, as values at the base point.
/// Pair indices `(ab)` use the order `00, 01, 11`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TractorData {
    pub point: Point,
    /// Schouten tensor `P_{ab}`.
    pub schouten: [[Scalar; 2]; 2],
    /// Cotton tensor `Y_{abc}`.
    pub cotton: [[[Scalar; 2]; 2]; 2],
    /// `Y_c = ε^{ab}Y_{abc}`.
    pub y: [Scalar; 2],
    /// `Z_{cd} = ∇_{(c}Y_{d)}`.
    pub z: [[Scalar; 2]; 2],
    /// The stacked matrix `Θ̄`.
    pub theta: Matrix,
    pub det_theta: Scalar,
    /// `D([Γ]) = det Θ̄ / 4320`.
    pub d_gamma: Scalar,
}

fn sym_pairs() -> [(usize, usize); 3] {
    [(0, 0), (0, 1), (1, 1)]
}

fn pair_index(a: usize, b: usize) -> usize {
    a + b
}

/// Computes all tractor quantities at the base point from a connection `Γ`
/// with `β = 0` and a parallel volume form whose value at the base is `eps`.
pub fn tractor_from_connection(
    gamma: &Christoffel,
    eps: &VolumeForm,
) -> Result<TractorData, JetError> {
    let point = gamma[0][0][0].base().clone();
    let p = schouten(gamma)?;
    let dp = p.covariant(gamma)?;
    let y3 = cotton(&dp);
    let dy = y3.covariant(gamma)?;
    let ddy = dy.covariant(gamma)?;
    let dddy = ddy.covariant(gamma)?;

    let e = |a, b| eps.get(a, b);
    let half = Scalar::ratio(1, 2);
    let contract = |t: &Tensor, prefix: &[usize], c: usize| -> Scalar {
        let mut acc = Scalar::zero();
        for pp in 0..2 {
            for qq in 0..2 {
                let ev = e(pp, qq);
                if ev.is_zero() {
                    continue;
                }
                let mut idx = prefix.to_vec();
                idx.extend([pp, qq, c]);
                acc = acc + ev * t.value(&idx);
            }
        }
        acc
    };
    let pv = |a: usize, b: usize| p.value(&[a, b]);
    let dpv = |a: usize, b: usize, c: usize| dp.value(&[a, b, c]);
    let y3v = |a: usize, b: usize, c: usize| y3.value(&[a, b, c]);
    let yc = |c: usize| contract(&y3, &[], c);
    // ∇_aY_c, ∇_a∇_bY_c, ∇_a∇_b∇_eY_c
    let d1 = |a: usize, c: usize| contract(&dy, &[a], c);
    let d2 = |a: usize, b: usize, c: usize| contract(&ddy, &[a, b], c);
    let d3 = |a: usize, b: usize, e_: usize, c: usize| contract(&dddy, &[a, b, e_], c);
    let z = |c: usize, d: usize| (d1(c, d) + d1(d, c)) * &half;
    let dz = |a: usize, c: usize, d: usize| (d2(a, c, d) + d2(a, d, c)) * &half;
    let ddz = |a: usize, b: usize, c: usize, d: usize| (d3(a, b, c, d) + d3(a, b, d, c)) * &half;

    let s = |n: i64| Scalar::int(n);
    let blk_p = |a: usize| s(5) * yc(a);
    let blk_q = |a: usize, b: usize| s(12) * z(a, b);
    let blk_r = |c: usize| s(5) * yc(c);
    let blk_s = |c: usize, a: usize| s(5) * d1(a, c) + s(2) * z(a, c);
    let blk_t = |c: usize, a: usize, b: usize| {
        s(5) * (d2(a, b, c) + d2(b, a, c)) * &half + s(4) * (dz(a, b, c) + dz(b, a, c)) * &half
            - s(5) * pv(a, b) * yc(c)
            - s(15) * (pv(c, a) * yc(b) + pv(c, b) * yc(a)) * &half
    };
    let blk_u = |c: usize, d: usize| z(c, d);
    let blk_v = |c: usize, d: usize, a: usize| {
        dz(a, c, d) - s(5) * (pv(a, c) * yc(d) + pv(a, d) * yc(c)) * &half
    };
    let blk_x = |c: usize, d: usize, a: usize, b: usize| {
        let quarter = Scalar::ratio(1, 4);
        let sym_ab = |f: &dyn Fn(usize, usize) -> Scalar| (f(a, b) + f(b, a)) * &half;
        let t1 = sym_ab(&|a, b| ddz(a, b, c, d));
        let t2 = (dpv(a, b, c) * yc(d) + dpv(b, a, c) * yc(d) + dpv(a, b, d) * yc(c)
            + dpv(b, a, d) * yc(c))
            * &quarter;
        let t3 = sym_ab(&|a, b| pv(c, a) * d1(b, d));
        let t4 = sym_ab(&|a, b| pv(d, a) * d1(b, c));
        let t5 = sym_ab(&|a, b| pv(c, a) * z(b, d));
        let t6 = sym_ab(&|a, b| pv(d, a) * z(b, c));
        let t7 = sym_ab(&|a, b| yc(a) * (y3v(b, c, d) + y3v(b, d, c)) * &half);
        t1 - s(5) * t2 - s(5) * t3 - s(5) * t4 - t5 - t6 + s(10) * t7
    };

    let mut theta = vec![vec![Scalar::zero(); 6]; 6];
    for a in 0..2 {
        theta[0][1 + a] = s(12) * blk_p(a);
    }
    for (k, (a, b)) in sym_pairs().into_iter().enumerate() {
        theta[0][3 + k] = blk_q(a, b);
    }
    for c in 0..2 {
        theta[1 + c][0] = s(30) * blk_r(c);
        for a in 0..2 {
            theta[1 + c][1 + a] = s(12) * blk_s(c, a);
        }
        for (k, (a, b)) in sym_pairs().into_iter().enumerate() {
            theta[1 + c][3 + k] = blk_t(c, a, b) - s(5) * pv(a, b) * blk_r(c);
        }
    }
    for (r, (c, d)) in sym_pairs().into_iter().enumerate() {
        theta[3 + r][0] = s(30) * blk_u(c, d);
        for a in 0..2 {
            theta[3 + r][1 + a] = s(12) * blk_v(c, d, a);
        }
        for (k, (a, b)) in sym_pairs().into_iter().enumerate() {
            theta[3 + r][3 + k] = blk_x(c, d, a, b) - s(5) * pv(a, b) * blk_u(c, d);
        }
    }
    let det_theta = linalg::determinant(&theta);
    let d_gamma = &det_theta / &Scalar::int(4320);
    Ok(TractorData {
        point,
        schouten: [[pv(0, 0), pv(0, 1)], [pv(1, 0), pv(1, 1)]],
        cotton: std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| y3v(a, b, c)))),
        y: [yc(0), yc(1)],
        z: [[z(0, 0), z(0, 1)], [z(1, 0), z(1, 1)]],
        theta,
        det_theta,
        d_gamma,
    })
}

/// Tractor data of the structure, computed from its trace-free representative.
pub fn tractor_data(s: &JetStructure) -> Result<TractorData, JetError> {
    tractor_from_connection(&pi_symbols(s), &VolumeForm::standard())
}

/// Recomputes the tractor data for the projectively equivalent connection
/// `Γ̂^c_{ab} = Π^c_{ab} + δ^c_aω_b + δ^c_bω_a` with `ω = df`.
///
/// The parallel volume form for `Γ̂` is `e^{−3(f − f(p))}ε`, which agrees with
/// `ε` at the base point `p`, so no transcendental factor enters.
pub fn projective_change(s: &JetStructure, f: &Expr, mode: EvalMode) -> Result<TractorData, TractorError> {
    let n = s.order();
    let fj = f.eval_jet(s.base(), n + 1, mode)?;
    let omega = [fj.diff(Axis::X)?, fj.diff(Axis::Y)?];
    let mut gamma = pi_symbols(s);
    for c in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                let mut g = gamma[c][a][b].clone();
                if c == a {
                    g = &g + &omega[b];
                }
                if c == b {
                    g = &g + &omega[a];
                }
                gamma[c][a][b] = g;
            }
        }
    }
    Ok(tractor_from_connection(&gamma, &VolumeForm::standard())?)
}

/// Applies the row operations and then the column operations by which `Θ̄`
/// transforms under `ω_a`, giving `Θ̂` directly from `Θ̄`.
pub fn transform_theta(theta: &Matrix, omega: [Scalar; 2]) -> Matrix {
    let w = |a: usize| omega[a].clone();
    let half = Scalar::ratio(1, 2);
    let pairs = sym_pairs();
    // rows: c ← c − 2ω_c·0;  (cd) ← (cd) − ω_(c·d) + ω_cω_d·0
    let mut t = theta.clone();
    for c in 0..2 {
        for j in 0..6 {
            t[1 + c][j] = &theta[1 + c][j] - &(Scalar::int(2) * w(c) * &theta[0][j]);
        }
    }
    for (r, (c, d)) in pairs.into_iter().enumerate() {
        for j in 0..6 {
            let sym = (w(c) * &theta[1 + d][j] + w(d) * &theta[1 + c][j]) * &half;
            t[3 + r][j] = &theta[3 + r][j] - &sym + w(c) * w(d) * &theta[0][j];
        }
    }
    // columns: a ← a − 2ω_a·0;  (ab) ← (ab) − ω_(a·b) + ω_aω_b·0
    let mut h = t.clone();
    for row in 0..6 {
        for a in 0..2 {
            h[row][1 + a] = &t[row][1 + a] - &(Scalar::int(2) * w(a) * &t[row][0]);
        }
        for (k, (a, b)) in pairs.into_iter().enumerate() {
            let sym = (w(a) * &t[row][1 + b] + w(b) * &t[row][1 + a]) * &half;
            h[row][3 + k] = &t[row][3 + k] - &sym + w(a) * w(b) * &t[row][0];
        }
    }
    h
}

/// The index letters of the contraction, in the order
/// `a b c d e f g h i j k l m n p q`; the eight `ε`s pair them as
/// `ab, cd, ef, gh, ij, kl, mn, pq`.
const LETTERS: usize = 16;

fn letter(ch: u8) -> usize {
    const ORDER: &[u8; LETTERS] = b"abcdefghijklmnpq";
    ORDER.iter().position(|&c| c == ch).expect("index letter")
}

/// The determinant of a matrix laid out as
///
/// ```text
///   0     P_a     Q_(ab)
///   R_c   S_ca    T_c(ab)
///   U_cd  V_cda   X_cd(ab)
/// ```
///
/// evaluated as the complete contraction of the blocks against eight copies
/// of `ε`. Of the 2¹⁶ index assignments only those with every `ε`-pair
/// off-diagonal contribute, so the sum runs over the 2⁸ pair orientations.
pub fn det_by_contraction(m: &Matrix, eps: &VolumeForm) -> Result<Scalar, TractorError> {
    if m.len() != 6 || m.iter().any(|r| r.len() != 6) {
        return Err(TractorError::Contract("matrix must be 6×6".into()));
    }
    if !m[0][0].is_zero() {
        return Err(TractorError::Contract("top-left entry must vanish".into()));
    }
    let pr = |a: usize, b: usize| pair_index(a, b);
    let get = |name: u8, ix: &[usize]| -> Scalar {
        match (name, ix.len()) {
            (b'P', 1) => m[0][1 + ix[0]].clone(),
            (b'Q', 2) => m[0][3 + pr(ix[0], ix[1])].clone(),
            (b'R', 1) => m[1 + ix[0]][0].clone(),
            (b'S', 2) => m[1 + ix[0]][1 + ix[1]].clone(),
            (b'T', 3) => m[1 + ix[0]][3 + pr(ix[1], ix[2])].clone(),
            (b'U', 2) => m[3 + pr(ix[0], ix[1])][0].clone(),
            (b'V', 3) => m[3 + pr(ix[0], ix[1])][1 + ix[2]].clone(),
            (b'X', 4) => m[3 + pr(ix[0], ix[1])][3 + pr(ix[2], ix[3])].clone(),
            _ => unreachable!("unknown block"),
        }
    };
    let terms: [(i64, i64, &[(u8, &str)]); 9] = [
        (1, 1, &[(b'Q', "gi"), (b'S', "mp"), (b'T', "njk"), (b'U', "ac"), (b'V', "deq"), (b'X', "bfhl")]),
        (-1, 6, &[(b'P', "p"), (b'R', "m"), (b'S', "nq"), (b'X', "acgi"), (b'X', "behk"), (b'X', "dfjl")]),
        (-1, 2, &[(b'P', "p"), (b'S', "mq"), (b'T', "njl"), (b'U', "ce"), (b'X', "adgk"), (b'X', "bfhi")]),
        (-1, 2, &[(b'P', "p"), (b'T', "mgi"), (b'T', "njk"), (b'U', "ac"), (b'V', "deq"), (b'X', "bfhl")]),
        (1, 2, &[(b'P', "p"), (b'R', "m"), (b'T', "ngi"), (b'V', "acq"), (b'X', "dejk"), (b'X', "bfhl")]),
        (-1, 2, &[(b'Q', "gi"), (b'R', "m"), (b'S', "np"), (b'V', "acq"), (b'X', "dejk"), (b'X', "bfhl")]),
        (-1, 2, &[(b'Q', "gi"), (b'R', "m"), (b'T', "njk"), (b'V', "acp"), (b'V', "deq"), (b'X', "bfhl")]),
        (-1, 4, &[(b'Q', "gi"), (b'S', "mp"), (b'S', "nq"), (b'U', "ac"), (b'X', "dejk"), (b'X', "bfhl")]),
        (-1, 4, &[(b'Q', "gi"), (b'T', "mjk"), (b'T', "nhl"), (b'U', "ac"), (b'V', "dep"), (b'V', "bfq")]),
    ];
    let e01 = eps.get(0, 1);
    let mut total = Scalar::zero();
    let mut idx = [0usize; LETTERS];
    for mask in 0u32..256 {
        let mut weight = Scalar::one();
        for pair in 0..8 {
            let flipped = (mask >> pair) & 1 == 1;
            idx[2 * pair] = usize::from(flipped);
            idx[2 * pair + 1] = usize::from(!flipped);
            weight = if flipped { -(weight * &e01) } else { weight * &e01 };
        }
        let mut inner = Scalar::zero();
        for (n, d, factors) in &terms {
            let mut prod = Scalar::ratio(*n, *d);
            for (name, letters) in factors.iter() {
                let ix: Vec<usize> = letters.bytes().map(|c| idx[letter(c)]).collect();
                let v = get(*name, &ix);
                if v.is_zero() {
                    prod = Scalar::zero();
                    break;
                }
                prod = prod * v;
            }
            inner = inner + prod;
        }
        total = total + weight * inner;
    }
    Ok(total)
}

/// Values of `ω = df` at the base point.
pub fn gradient_at(f: &Expr, p: &Point, mode: EvalMode) -> Result<[Scalar; 2], TractorError> {
    let j = f.eval_jet(p, 1, mode)?;
    Ok([j.partial(1, 0)?, j.partial(0, 1)?])
}
