//! Reconstruction of a compatible metric: choose a parallel section at a base
//! point, transport it over a grid with `dΨ = −Ω_a Ψ dx^a`, and read off
//! `E, F, G = (ψ₁, ψ₂, ψ₃)/Δ²` with `Δ = ψ₁ψ₃ − ψ₂²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, EvalMode};
use crate::input_model::{levi_civita_coeffs, ProjectiveStructure};
use crate::invariants::{
    analyze_point, cartan_stabilize, connection_matrices, genericity_p, AnalysisConfig,
    InvariantError, JetStructure, Verdict,
};
use crate::jets::{Axis, JetError, Point};
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("seed is degenerate: W1*W3 - W2^2 = {0}")]
    DegenerateSeed(f64),
    #[error("transport is path dependent: loop defect {defect:e} at ({x}, {y})")]
    PathDependent { defect: f64, x: f64, y: f64 },
    #[error("the recovered form is degenerate at every grid node")]
    AllDegenerate,
    #[error("no metric to recover: verdict {0:?}")]
    Refused(Verdict),
    #[error("rank sequence {0:?} did not stabilise")]
    NotStabilised(Vec<usize>),
    #[error("solution space of dimension 5 contradicts Koenigs' theorem")]
    KoenigsViolation,
    #[error("grid needs an odd number of nodes per side and a positive spacing")]
    InvalidGrid,
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A square lattice of `n × n` nodes with spacing `h` centred on `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: (f64, f64),
    pub h: f64,
    pub n: usize,
}

impl GridSpec {
    fn validate(&self) -> Result<(), RecoveryError> {
        if self.n % 2 == 0 || self.h <= 0.0 || !self.h.is_finite() {
            return Err(RecoveryError::InvalidGrid);
        }
        Ok(())
    }

    fn mid(&self) -> usize {
        self.n / 2
    }

    pub fn coord(&self, i: usize, j: usize) -> (f64, f64) {
        let off = |k: usize| (k as f64 - self.mid() as f64) * self.h;
        (self.center.0 + off(i), self.center.1 + off(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryConfig {
    /// Maximum allowed difference between the two sweep orders at any node.
    pub loop_tolerance: f64,
    /// Runge–Kutta steps per grid spacing.
    pub substeps: usize,
    /// `|Δ|` below this excludes a node.
    pub degeneracy_tolerance: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            loop_tolerance: 1e-7,
            substeps: 4,
            degeneracy_tolerance: 1e-12,
        }
    }
}

pub type Psi = [f64; 6];

/// `Ψ` on every grid node, indexed `[i][j]` with `i` along `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiSection {
    pub grid: GridSpec,
    pub values: Vec<Vec<Psi>>,
    /// `‖Ψ_{x then y} − Ψ_{y then x}‖_∞` per node.
    pub loop_defect: Vec<Vec<f64>>,
    pub max_defect: f64,
}

/// The seed `Ψ(p₀) = W`; refuses `W` with `W₁W₃ − W₂² = 0`.
pub fn initial_section(w: &[Scalar], tol: f64) -> Result<Psi, RecoveryError> {
    let q = genericity_p(w).to_f64();
    if q.abs() <= tol {
        return Err(RecoveryError::DegenerateSeed(q));
    }
    Ok(std::array::from_fn(|i| w[i].to_f64()))
}

/// `Ω_a` at a point, in floating point.
pub fn omega_at(s: &ProjectiveStructure, x: f64, y: f64, axis: Axis) -> Result<[[f64; 6]; 6], RecoveryError> {
    let js = JetStructure::at(s, &Point::float(x, y), 2, EvalMode::Float)?;
    let om = connection_matrices(&js)?;
    let vals = om.values(axis);
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| vals[i][j].to_f64())))
}

fn apply(m: &[[f64; 6]; 6], v: &Psi) -> Psi {
    std::array::from_fn(|i| -(0..6).map(|j| m[i][j] * v[j]).sum::<f64>())
}

fn axpy(v: &Psi, k: &Psi, s: f64) -> Psi {
    std::array::from_fn(|i| v[i] + s * k[i])
}

/// One classical Runge–Kutta step of `dΨ/dt = −Ω_axis Ψ` from `(x, y)`.
fn rk4_step(
    s: &ProjectiveStructure,
    (x, y): (f64, f64),
    axis: Axis,
    dt: f64,
    v: &Psi,
) -> Result<Psi, RecoveryError> {
    let at = |t: f64| match axis {
        Axis::X => (x + t, y),
        Axis::Y => (x, y + t),
    };
    let f = |t: f64, w: &Psi| -> Result<Psi, RecoveryError> {
        let (px, py) = at(t);
        Ok(apply(&omega_at(s, px, py, axis)?, w))
    };
    let k1 = f(0.0, v)?;
    let k2 = f(dt / 2.0, &axpy(v, &k1, dt / 2.0))?;
    let k3 = f(dt / 2.0, &axpy(v, &k2, dt / 2.0))?;
    let k4 = f(dt, &axpy(v, &k3, dt))?;
    Ok(std::array::from_fn(|i| {
        v[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Transports `v` by the signed distance `h` along `axis` from `start`.
fn grid_step(
    s: &ProjectiveStructure,
    start: (f64, f64),
    axis: Axis,
    h: f64,
    substeps: usize,
    v: &Psi,
) -> Result<Psi, RecoveryError> {
    let dt = h / substeps as f64;
    let mut cur = *v;
    let mut pos = start;
    for _ in 0..substeps {
        cur = rk4_step(s, pos, axis, dt, &cur)?;
        match axis {
            Axis::X => pos.0 += dt,
            Axis::Y => pos.1 += dt,
        }
    }
    Ok(cur)
}

/// Values along one grid line through the node `anchor`, filled outward.
fn sweep(
    s: &ProjectiveStructure,
    grid: &GridSpec,
    anchor: (usize, usize),
    axis: Axis,
    seed: &Psi,
    substeps: usize,
) -> Result<Vec<Psi>, RecoveryError> {
    let mid = grid.mid();
    let mut line = vec![[0.0; 6]; grid.n];
    line[mid] = *seed;
    let node = |k: usize| match axis {
        Axis::X => grid.coord(k, anchor.1),
        Axis::Y => grid.coord(anchor.0, k),
    };
    for k in mid + 1..grid.n {
        line[k] = grid_step(s, node(k - 1), axis, grid.h, substeps, &line[k - 1])?;
    }
    for k in (0..mid).rev() {
        line[k] = grid_step(s, node(k + 1), axis, -grid.h, substeps, &line[k + 1])?;
    }
    Ok(line)
}

fn route(
    s: &ProjectiveStructure,
    grid: &GridSpec,
    seed: &Psi,
    first: Axis,
    substeps: usize,
) -> Result<Vec<Vec<Psi>>, RecoveryError> {
    let mid = grid.mid();
    let spine = sweep(s, grid, (mid, mid), first, seed, substeps)?;
    let mut out = vec![vec![[0.0; 6]; grid.n]; grid.n];
    for (k, v) in spine.iter().enumerate() {
        match first {
            Axis::X => {
                let col = sweep(s, grid, (k, mid), Axis::Y, v, substeps)?;
                for (j, w) in col.into_iter().enumerate() {
                    out[k][j] = w;
                }
            }
            Axis::Y => {
                let row = sweep(s, grid, (mid, k), Axis::X, v, substeps)?;
                for (i, w) in row.into_iter().enumerate() {
                    out[i][k] = w;
                }
            }
        }
    }
    Ok(out)
}

/// Transports the seed over the grid by RK4 sweeps in both orders and
/// records the loop-closure defect between them.
pub fn transport(
    seed: &Psi,
    s: &ProjectiveStructure,
    grid: &GridSpec,
    cfg: &RecoveryConfig,
) -> Result<PsiSection, RecoveryError> {
    grid.validate()?;
    let substeps = cfg.substeps.max(1);
    let xy = route(s, grid, seed, Axis::X, substeps)?;
    let yx = route(s, grid, seed, Axis::Y, substeps)?;
    let mut loop_defect = vec![vec![0.0; grid.n]; grid.n];
    let mut worst = (0.0f64, (0usize, 0usize));
    for i in 0..grid.n {
        for j in 0..grid.n {
            let d = (0..6)
                .map(|k| (xy[i][j][k] - yx[i][j][k]).abs())
                .fold(0.0, f64::max);
            loop_defect[i][j] = d;
            if d > worst.0 {
                worst = (d, (i, j));
            }
        }
    }
    if worst.0 > cfg.loop_tolerance {
        let (x, y) = grid.coord(worst.1 .0, worst.1 .1);
        return Err(RecoveryError::PathDependent {
            defect: worst.0,
            x,
            y,
        });
    }
    Ok(PsiSection {
        grid: grid.clone(),
        values: xy,
        loop_defect,
        max_defect: worst.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Signature {
    Riemannian,
    Lorentzian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricNode {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub delta: f64,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveredMetric {
    pub nodes: Vec<MetricNode>,
    /// Nodes with `Δ = 0`, as `(i, j)`.
    pub excluded: Vec<(usize, usize)>,
}

impl RecoveredMetric {
    pub fn node(&self, i: usize, j: usize) -> Option<&MetricNode> {
        self.nodes.iter().find(|n| n.i == i && n.j == j)
    }
}

/// `E, F, G = (ψ₁, ψ₂, ψ₃)/Δ²`. Since `EG − F² = Δ⁻³`, the sign of `Δ` is
/// the sign of the determinant of the form.
pub fn reconstruct_metric(sec: &PsiSection, cfg: &RecoveryConfig) -> Result<RecoveredMetric, RecoveryError> {
    let mut nodes = Vec::new();
    let mut excluded = Vec::new();
    for (i, col) in sec.values.iter().enumerate() {
        for (j, psi) in col.iter().enumerate() {
            let delta = psi[0] * psi[2] - psi[1] * psi[1];
            if delta.abs() <= cfg.degeneracy_tolerance {
                excluded.push((i, j));
                continue;
            }
            let d2 = delta * delta;
            let (x, y) = sec.grid.coord(i, j);
            nodes.push(MetricNode {
                i,
                j,
                x,
                y,
                e: psi[0] / d2,
                f: psi[1] / d2,
                g: psi[2] / d2,
                delta,
                signature: if delta > 0.0 {
                    Signature::Riemannian
                } else {
                    Signature::Lorentzian
                },
            });
        }
    }
    if nodes.is_empty() {
        return Err(RecoveryError::AllDegenerate);
    }
    Ok(RecoveredMetric { nodes, excluded })
}

fn a_values(s: &ProjectiveStructure, x: f64, y: f64) -> Result<[f64; 4], RecoveryError> {
    let js = s.jets(&Point::float(x, y), 0, EvalMode::Float)?;
    Ok(std::array::from_fn(|k| js[k].value().to_f64()))
}

/// Largest difference between the input `A`s and those of the recovered
/// metric, with metric derivatives from fourth-order central differences on
/// the grid. Only nodes two or more steps from the boundary (and whose
/// stencil avoids excluded nodes) are used; `None` if there are none.
///
/// Derivatives taken from `∂_aΨ = −Ω_aΨ` instead would satisfy the Liouville
/// system for any `Ψ` whatsoever, so they could not detect a bad transport.
pub fn round_trip_residual(
    s: &ProjectiveStructure,
    metric: &RecoveredMetric,
    grid: &GridSpec,
) -> Result<Option<f64>, RecoveryError> {
    let h = grid.h;
    let n = grid.n;
    let get = |i: usize, j: usize| metric.node(i, j).map(|m| [m.e, m.f, m.g]);
    let mut worst: Option<f64> = None;
    for node in &metric.nodes {
        let (i, j) = (node.i, node.j);
        if i < 2 || j < 2 || i + 2 >= n || j + 2 >= n {
            continue;
        }
        let stencil = |di: [isize; 4], dj: [isize; 4]| -> Option<[f64; 3]> {
            let w = [1.0, -8.0, 8.0, -1.0];
            let mut out = [0.0; 3];
            for k in 0..4 {
                let v = get((i as isize + di[k]) as usize, (j as isize + dj[k]) as usize)?;
                for c in 0..3 {
                    out[c] += w[k] * v[c] / (12.0 * h);
                }
            }
            Some(out)
        };
        let (Some(dx), Some(dy)) = (
            stencil([-2, -1, 1, 2], [0; 4]),
            stencil([0; 4], [-2, -1, 1, 2]),
        ) else {
            continue;
        };
        let a = levi_civita_coeffs(node.e, node.f, node.g, dx[0], dy[0], dx[1], dy[1], dx[2], dy[2]);
        let expected = a_values(s, node.x, node.y)?;
        let r = (0..4).map(|k| (a[k] - expected[k]).abs()).fold(0.0, f64::max);
        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
    }
    Ok(worst)
}

/// `S([Γ])` from the Cartan rank test at `p`.
pub fn solution_space_dim(
    s: &ProjectiveStructure,
    p: &Point,
    cfg: &AnalysisConfig,
) -> Result<usize, RecoveryError> {
    let js = JetStructure::at(s, p, cfg.order, cfg.mode)?;
    let c = cartan_stabilize(&js, cfg.cartan_cap, cfg.tolerance)?;
    match c.s_dim {
        None => Err(RecoveryError::NotStabilised(c.ranks)),
        Some(5) => Err(RecoveryError::KoenigsViolation),
        Some(d) => Ok(d),
    }
}

/// Independent vectors with `W₁W₃ − W₂² ≠ 0` among the basis vectors and
/// their pairwise sums and differences, up to `want` of them.
pub fn nondegenerate_sections(basis: &[Vec<Scalar>], want: usize, tol: f64) -> Vec<Vec<Scalar>> {
    let mut candidates: Vec<Vec<Scalar>> = basis.to_vec();
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            candidates.push(basis[i].iter().zip(&basis[j]).map(|(a, b)| a + b).collect());
            // a sum alone can miss: e₁ and e₃ are degenerate, e₁ ± e₃ are not
            candidates.push(basis[i].iter().zip(&basis[j]).map(|(a, b)| a - b).collect());
        }
    }
    let mut chosen: Vec<Vec<Scalar>> = Vec::new();
    for c in candidates {
        if chosen.len() == want {
            break;
        }
        if genericity_p(&c).to_f64().abs() <= tol {
            continue;
        }
        let mut trial = chosen.clone();
        trial.push(c.clone());
        if linalg::rank_kernel(&trial, tol).rank == trial.len() {
            chosen = trial;
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub verdict: Verdict,
    pub seed: Psi,
    pub grid: GridSpec,
    pub max_loop_defect: f64,
    pub round_trip_residual: Option<f64>,
    pub metric: RecoveredMetric,
}

/// Full pipeline at the grid centre: verdict, seed from the kernel witness,
/// transport, reconstruction and round trip.
pub fn recover(
    s: &ProjectiveStructure,
    grid: &GridSpec,
    acfg: &AnalysisConfig,
    rcfg: &RecoveryConfig,
) -> Result<RecoveryReport, RecoveryError> {
    grid.validate()?;
    let p = Point::float(grid.center.0, grid.center.1);
    let report = analyze_point(s, &p, acfg)?;
    let witness = match (report.verdict, report.witness) {
        (Verdict::Metrisable | Verdict::MetrisableFlat, Some(w)) => w,
        (v, _) => return Err(RecoveryError::Refused(v)),
    };
    let seed = initial_section(&witness, acfg.tolerance)?;
    let sec = transport(&seed, s, grid, rcfg)?;
    let metric = reconstruct_metric(&sec, rcfg)?;
    let residual = round_trip_residual(s, &metric, grid)?;
    Ok(RecoveryReport {
        verdict: report.verdict,
        seed,
        grid: grid.clone(),
        max_loop_defect: sec.max_defect,
        round_trip_residual: residual,
        metric,
    })
}
