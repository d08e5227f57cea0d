//! Dense linear algebra over [`Scalar`]: determinants, rank and kernels.
//!
//! Exact matrices use fraction-free elimination; float matrices use pivoted
//! elimination with a scale-relative zero test.

use serde::Serialize;

use crate::scalar::{Mode, Scalar};

pub type Matrix = Vec<Vec<Scalar>>;

pub fn matrix_mode(m: &[Vec<Scalar>]) -> Mode {
    if m.iter().flatten().all(Scalar::is_exact) {
        Mode::Rational
    } else {
        Mode::Float
    }
}

/// Determinant of a square matrix: Bareiss elimination when exact,
/// partial-pivot elimination otherwise.
pub fn determinant(m: &[Vec<Scalar>]) -> Scalar {
    let n = m.len();
    assert!(m.iter().all(|r| r.len() == n), "determinant needs a square matrix");
    if n == 0 {
        return Scalar::one();
    }
    match matrix_mode(m) {
        Mode::Rational => bareiss(m),
        Mode::Float => Scalar::float(float_det(
            &m.iter()
                .map(|r| r.iter().map(Scalar::to_f64).collect())
                .collect::<Vec<Vec<f64>>>(),
        )),
    }
}

fn bareiss(m: &[Vec<Scalar>]) -> Scalar {
    let n = m.len();
    let mut a: Matrix = m.to_vec();
    let mut sign = 1;
    let mut prev = Scalar::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let Some(r) = (k + 1..n).find(|&r| !a[r][k].is_zero()) else {
                return Scalar::zero();
            };
            a.swap(k, r);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if sign < 0 {
        -d
    } else {
        d
    }
}

pub fn float_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    det
}

/// Hadamard's bound `∏ ‖row‖`; a float determinant below `tol` times this is
/// indistinguishable from zero.
pub fn hadamard_bound(m: &[Vec<Scalar>]) -> f64 {
    m.iter()
        .map(|r| r.iter().map(|v| v.to_f64().powi(2)).sum::<f64>().sqrt())
        .product()
}

/// Whether a determinant value counts as zero: exactly, or relative to the
/// Hadamard bound of its matrix in float mode.
pub fn det_is_zero(det: &Scalar, m: &[Vec<Scalar>], tol: f64) -> bool {
    match det {
        Scalar::Exact(_) => det.is_zero(),
        Scalar::Float(v) => v.abs() <= tol * hadamard_bound(m),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankKernel {
    pub rank: usize,
    /// Basis of the right kernel; each vector's largest-magnitude entry is `1`.
    pub kernel: Vec<Vec<Scalar>>,
    pub mode: Mode,
    /// Float mode only: some pivot decision fell within a factor `1e4` of the
    /// threshold, so the rank is not trustworthy.
    pub marginal: bool,
}

/// Rank and kernel of an `r × n` matrix.
///
/// Float mode: rows whose max-norm is below `tol` times the largest row's are
/// treated as zero; the remaining rows are scaled to unit max-norm and a
/// pivot counts as zero when its magnitude is below `tol`. Exact mode
/// ignores `tol`.
pub fn rank_kernel(m: &[Vec<Scalar>], tol: f64) -> RankKernel {
    let ncols = m.first().map_or(0, Vec::len);
    match matrix_mode(m) {
        Mode::Rational => exact_rank_kernel(m, ncols),
        Mode::Float => float_rank_kernel(m, ncols, tol),
    }
}

fn exact_rank_kernel(m: &[Vec<Scalar>], ncols: usize) -> RankKernel {
    let mut a: Matrix = m.to_vec();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        let Some(p) = (row..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].recip();
        for j in col..ncols {
            a[row][j] = &a[row][j] * &inv;
        }
        for i in 0..a.len() {
            if i != row && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in col..ncols {
                    let v = &a[i][j] - &f * &a[row][j];
                    a[i][j] = v;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == a.len() {
            break;
        }
    }
    let kernel = kernel_from_rref(&a, &pivots, ncols, Scalar::zero, Scalar::one);
    RankKernel {
        rank: pivots.len(),
        kernel,
        mode: Mode::Rational,
        marginal: false,
    }
}

fn kernel_from_rref(
    a: &[Vec<Scalar>],
    pivots: &[usize],
    ncols: usize,
    zero: impl Fn() -> Scalar,
    one: impl Fn() -> Scalar,
) -> Vec<Vec<Scalar>> {
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![zero(); ncols];
            v[f] = one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -&a[r][f];
            }
            normalize_max(v)
        })
        .collect()
}

/// Scales so that the entry of largest magnitude (first one on ties) is `+1`.
pub fn normalize_max(v: Vec<Scalar>) -> Vec<Scalar> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs().cmp_value(&v[best].abs()) == Some(std::cmp::Ordering::Greater) {
            best = i;
        }
    }
    if v.is_empty() || v[best].is_zero() {
        return v;
    }
    let s = v[best].recip();
    v.iter().map(|x| x * &s).collect()
}

const MARGINAL_BAND: f64 = 1e4;

fn float_rank_kernel(m: &[Vec<Scalar>], ncols: usize, tol: f64) -> RankKernel {
    // rows negligible against the largest row are rounding noise; the rest
    // are equilibrated so that pivots are compared on a common scale
    let rows: Vec<(Vec<f64>, f64)> = m
        .iter()
        .map(|r| {
            let v: Vec<f64> = r.iter().map(Scalar::to_f64).collect();
            let s = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            (v, s)
        })
        .collect();
    let global = rows.iter().fold(0.0f64, |acc, (_, s)| acc.max(*s));
    let mut marginal = false;
    let mut a: Vec<Vec<f64>> = Vec::new();
    for (v, s) in rows {
        if s <= tol * global {
            if s >= tol * global / MARGINAL_BAND && s > 0.0 {
                marginal = true;
            }
            continue;
        }
        a.push(v.iter().map(|x| x / s).collect());
    }
    let mut pivots: Vec<usize> = Vec::new();
    let mut colperm: Vec<usize> = (0..ncols).collect();
    let mut row = 0;
    // complete pivoting: choose the largest remaining entry each step
    while row < a.len() && row < ncols {
        let mut best = (row, row, 0.0f64);
        for (i, r) in a.iter().enumerate().skip(row) {
            for (jj, &c) in colperm.iter().enumerate().skip(row) {
                if r[c].abs() > best.2 {
                    best = (i, jj, r[c].abs());
                }
            }
        }
        let (pi, pj, mag) = best;
        if mag < tol * MARGINAL_BAND && mag >= tol / MARGINAL_BAND {
            marginal = true;
        }
        if mag < tol {
            break;
        }
        a.swap(row, pi);
        colperm.swap(row, pj);
        let c = colperm[row];
        let piv = a[row][c];
        for j in 0..ncols {
            a[row][j] /= piv;
        }
        for i in 0..a.len() {
            if i != row {
                let f = a[i][c];
                if f != 0.0 {
                    for j in 0..ncols {
                        a[i][j] -= f * a[row][j];
                    }
                }
            }
        }
        pivots.push(c);
        row += 1;
    }
    if row < a.len() && row < ncols {
        // the best remaining entry after stopping may still be marginal
        let rest = a
            .iter()
            .skip(row)
            .flat_map(|r| colperm[row..].iter().map(move |&c| r[c].abs()))
            .fold(0.0f64, f64::max);
        if rest >= tol / MARGINAL_BAND {
            marginal = true;
        }
    }
    let exact_rows: Vec<Vec<Scalar>> = a
        .iter()
        .take(pivots.len())
        .map(|r| r.iter().map(|&v| Scalar::float(v)).collect())
        .collect();
    let kernel = kernel_from_rref(
        &exact_rows,
        &pivots,
        ncols,
        || Scalar::float(0.0),
        || Scalar::float(1.0),
    );
    RankKernel {
        rank: pivots.len(),
        kernel,
        mode: Mode::Float,
        marginal,
    }
}

pub fn mat_vec(m: &[Vec<Scalar>], v: &[Scalar]) -> Vec<Scalar> {
    m.iter()
        .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(rows: &[&[i64]]) -> Matrix {
        rows.iter()
            .map(|r| r.iter().map(|&v| Scalar::int(v)).collect())
            .collect()
    }

    #[test]
    fn exact_determinant() {
        let m = ints(&[&[2, 0, 1], &[1, 3, 2], &[1, 1, 2]]);
        assert_eq!(determinant(&m), Scalar::int(6));
        let m = ints(&[&[0, 1], &[1, 0]]);
        assert_eq!(determinant(&m), Scalar::int(-1));
    }

    #[test]
    fn zero_matrix_rank_and_kernel() {
        let m = ints(&[&[0, 0, 0], &[0, 0, 0]]);
        let rk = rank_kernel(&m, 1e-9);
        assert_eq!(rk.rank, 0);
        assert_eq!(rk.kernel, ints(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]));
    }

    #[test]
    fn kernel_is_normalised() {
        let m = ints(&[&[1, 2, 0], &[0, 0, 1]]);
        let rk = rank_kernel(&m, 1e-9);
        assert_eq!(rk.rank, 2);
        assert_eq!(
            rk.kernel,
            vec![vec![Scalar::int(1), Scalar::ratio(-1, 2), Scalar::zero()]]
        );
    }

    #[test]
    fn float_rank_detects_dependent_rows() {
        let f = |v: f64| Scalar::float(v);
        let m = vec![
            vec![f(1.0), f(2.0), f(3.0)],
            vec![f(2.0), f(4.0), f(6.0 + 1e-14)],
            vec![f(0.0), f(1.0), f(1.0)],
        ];
        let rk = rank_kernel(&m, 1e-9);
        assert_eq!(rk.rank, 2);
        assert!(!rk.marginal);
        let k = &rk.kernel[0];
        let r = mat_vec(&m, k);
        assert!(r.iter().all(|v| v.to_f64().abs() < 1e-12));
    }
}
