//! Straight-dislocation model on a 2D periodic cell reduced to one
//! dimension along `x = x1 + x2`.
//!
//! Symmetric 2x2 matrices are handled as Mandel vectors
//! `[e11, e22, sqrt(2) e12]`, so the elasticity tensor acts as a symmetric
//! 3x3 matrix `C` and `e:Lambda:e = e^T C e`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix3x2, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::l1_distance;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::solver::{solve, solve_periodic_nonlocal, DomainSpec, InitialData, NonlocalSystem, PeriodicData};
use crate::solver::{SolverConfig, Trajectory};
use crate::system::{DiagonalSystem, StateBox};

const COERCIVITY_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Elasticity {
    Isotropic { lame_lambda: f64, lame_mu: f64 },
    /// `Lambda[i][j][k][l]`, zero-based.
    Full { tensor: [[[[f64; 2]; 2]; 2]; 2] },
}

impl Elasticity {
    /// Mandel matrix, after checking the minor and major symmetries.
    pub fn mandel(&self) -> Result<Matrix3<f64>> {
        match *self {
            Elasticity::Isotropic { lame_lambda: l, lame_mu: m } => {
                Ok(Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, 2.0 * m))
            }
            Elasticity::Full { tensor: t } => {
                let scale = t.iter().flatten().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            for l in 0..2 {
                                let v = t[i][j][k][l];
                                let sym = [t[j][i][k][l], t[i][j][l][k], t[k][l][i][j]];
                                if sym.iter().any(|s| (s - v).abs() > SYMMETRY_TOL * scale) {
                                    return Err(Error::InvalidInput(format!(
                                        "elasticity tensor lacks the symmetries at ({i},{j},{k},{l})"
                                    )));
                                }
                            }
                        }
                    }
                }
                let pairs = [(0, 0, 1.0), (1, 1, 1.0), (0, 1, SQRT_2)];
                Ok(Matrix3::from_fn(|a, b| {
                    let (i, j, sa) = pairs[a];
                    let (k, l, sb) = pairs[b];
                    sa * sb * t[i][j][k][l]
                }))
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Elasticity::Isotropic { lame_lambda, lame_mu } => {
                Elasticity::Isotropic { lame_lambda: c * lame_lambda, lame_mu: c * lame_mu }
            }
            Elasticity::Full { tensor } => {
                let mut t = *tensor;
                t.iter_mut().flatten().flatten().flatten().for_each(|v| *v *= c);
                Elasticity::Full { tensor: t }
            }
        }
    }
}

/// Slip systems `k = 1..N`; the partners `k + N` are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlipConfig {
    /// Burgers vectors; their magnitudes are kept and scale `A` and `Q`
    /// quadratically.
    pub b: Vec<[f64; 2]>,
    /// Slip-plane normals; projected orthogonal to `b` and normalized.
    pub n: Vec<[f64; 2]>,
    /// Unit line directions parallel to `b` with `tau1 + tau2 > 0`;
    /// derived from `b` when absent.
    #[serde(default)]
    pub tau: Option<Vec<[f64; 2]>>,
    /// Macroscopic slopes `l^k >= 0`, `L^k = (l^k, l^k)`.
    #[serde(default)]
    pub l: Option<Vec<f64>>,
    pub elasticity: Elasticity,
}

/// Validated slip data with normalized normals and the extension to `2N`
/// systems.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipSystems {
    pub b: Vec<[f64; 2]>,
    pub n: Vec<[f64; 2]>,
    pub tau: Vec<[f64; 2]>,
    pub l: Vec<f64>,
    pub c: Matrix3<f64>,
}

impl SlipConfig {
    pub fn canonical() -> Self {
        Self {
            b: vec![[1.0, 0.0]],
            n: vec![[0.0, 1.0]],
            tau: None,
            l: None,
            elasticity: Elasticity::Isotropic { lame_lambda: 1.0, lame_mu: 1.0 },
        }
    }

    pub fn count(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<SlipSystems> {
        let nn = self.b.len();
        if nn == 0 || self.n.len() != nn {
            return Err(Error::InvalidInput("need one normal per Burgers vector and at least one slip system".into()));
        }
        let mut normals = Vec::with_capacity(nn);
        let mut taus = Vec::with_capacity(nn);
        for k in 0..nn {
            let (b, n) = (self.b[k], self.n[k]);
            let bb = b[0] * b[0] + b[1] * b[1];
            if !(bb > 0.0) || !bb.is_finite() {
                return Err(Error::InvalidInput(format!("Burgers vector {k} is zero")));
            }
            let proj = (n[0] * b[0] + n[1] * b[1]) / bb;
            let m = [n[0] - proj * b[0], n[1] - proj * b[1]];
            let mm = (m[0] * m[0] + m[1] * m[1]).sqrt();
            if !(mm > 1e-12 * (n[0].hypot(n[1]))) || !mm.is_finite() {
                return Err(Error::InvalidInput(format!("normal {k} is zero or parallel to b")));
            }
            normals.push([m[0] / mm, m[1] / mm]);
            let tau = match &self.tau {
                Some(t) => {
                    if t.len() != nn {
                        return Err(Error::InvalidInput("need one tau per slip system".into()));
                    }
                    let t = t[k];
                    let norm = t[0].hypot(t[1]);
                    let cross = t[0] * b[1] - t[1] * b[0];
                    if (norm - 1.0).abs() > 1e-9 || cross.abs() > 1e-9 * bb.sqrt() {
                        return Err(Error::InvalidInput(format!("tau {k} must be a unit vector parallel to b")));
                    }
                    t
                }
                None => {
                    let s = bb.sqrt();
                    let t = [b[0] / s, b[1] / s];
                    if t[0] + t[1] < 0.0 {
                        [-t[0], -t[1]]
                    } else {
                        t
                    }
                }
            };
            if !(tau[0] + tau[1] > 1e-12) {
                return Err(Error::InvalidInput(format!("tau {k} needs tau1 + tau2 > 0")));
            }
            taus.push(tau);
        }
        let l = self.l.clone().unwrap_or_else(|| vec![0.0; nn]);
        if l.len() != nn || l.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("slopes l must be nonnegative, one per slip system".into()));
        }
        let c = self.elasticity.mandel()?;
        let eig = SymmetricEigen::new(c).eigenvalues.min();
        let scale = c.amax().max(f64::MIN_POSITIVE);
        if !(eig > COERCIVITY_TOL * scale) {
            return Err(Error::InvalidInput(format!("elasticity is not coercive (min eigenvalue {eig})")));
        }
        Ok(SlipSystems { b: self.b.clone(), n: normals, tau: taus, l, c })
    }
}

/// `(b n^T + n b^T) / 2`.
pub fn strain_matrix(b: [f64; 2], n: [f64; 2]) -> Result<Matrix2<f64>> {
    if b[0].hypot(b[1]) == 0.0 || n[0].hypot(n[1]) == 0.0 {
        return Err(Error::InvalidInput("strain_matrix needs nonzero vectors".into()));
    }
    Ok(Matrix2::from_fn(|i, j| 0.5 * (b[i] * n[j] + n[i] * b[j])))
}

pub fn mandel(m: &Matrix2<f64>) -> Vector3<f64> {
    Vector3::new(m[(0, 0)], m[(1, 1)], SQRT_2 * 0.5 * (m[(0, 1)] + m[(1, 0)]))
}

/// Total strain of `v(x1 + x2)` in terms of `v'`, as a Mandel map.
fn strain_of_displacement() -> Matrix3x2<f64> {
    let s = 0.5 * SQRT_2;
    Matrix3x2::new(1.0, 0.0, 0.0, 1.0, s, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub mu: Vec<f64>,
    /// First `N x N` blocks before the extension.
    pub a_hat: DMatrix<f64>,
    pub q_hat: DMatrix<f64>,
}

impl CouplingMatrices {
    pub fn d(&self) -> usize {
        self.mu.len()
    }
}

/// Extends an `N x N` block to `[[M, -M], [-M, M]]`.
pub fn extend_blocks(m: &DMatrix<f64>) -> DMatrix<f64> {
    let nn = m.nrows();
    DMatrix::from_fn(2 * nn, 2 * nn, |i, j| {
        let s = if (i < nn) == (j < nn) { 1.0 } else { -1.0 };
        s * m[(i % nn, j % nn)]
    })
}

/// Reduction of the elastic energy to the transport coefficients.
///
/// For plastic strain `p`, the periodic displacement solves
/// `min int (B v' - p)^T C (B v' - p)` with `int v' = 0`, giving
/// `v' = K^{-1} B^T C (p - <p>)`, `K = B^T C B`. With `P = B K^{-1} B^T C`
/// the resolved stress on system `i` is
/// `e_i^T C (I - P) p + e_i^T C P <p>`, so `A_hat = E^T C (I - P) E` and
/// `Q_hat = E^T C P E` for the strain columns `E`.
pub fn compute_coupling(slip: &SlipConfig) -> Result<CouplingMatrices> {
    let sys = slip.validate()?;
    let nn = sys.b.len();
    let bmat = strain_of_displacement();
    let k = bmat.transpose() * sys.c * bmat;
    let k_inv = k
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("reduced elastic energy is singular in v'".into()))?;
    let p = bmat * k_inv * bmat.transpose() * sys.c;
    let relaxed = sys.c * (Matrix3::identity() - p);
    let relaxed = 0.5 * (relaxed + relaxed.transpose());
    let stiff = sys.c * p;
    let stiff = 0.5 * (stiff + stiff.transpose());
    let eps: Vec<Vector3<f64>> = (0..nn).map(|k| mandel(&strain_matrix(sys.b[k], sys.n[k]).expect("validated"))).collect();
    let a_hat = DMatrix::from_fn(nn, nn, |i, j| eps[i].dot(&(relaxed * eps[j])));
    let q_hat = DMatrix::from_fn(nn, nn, |i, j| eps[i].dot(&(stiff * eps[j])));
    let a_hat = 0.5 * (&a_hat + a_hat.transpose());
    let q_hat = 0.5 * (&q_hat + q_hat.transpose());
    let mu_hat: Vec<f64> = sys.tau.iter().map(|t| 1.0 / (t[0] + t[1])).collect();
    let mu = mu_hat.iter().chain(&mu_hat).copied().collect();
    Ok(CouplingMatrices { a: extend_blocks(&a_hat), q: extend_blocks(&q_hat), mu, a_hat, q_hat })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub symmetry_error: f64,
    pub block_error_a: f64,
    pub block_error_q: f64,
    pub min_eigenvalue_a: f64,
}

impl StructureReport {
    pub fn holds(&self) -> bool {
        self.symmetry_error <= 1e-12 && self.block_error_a <= 1e-12 && self.block_error_q <= 1e-12
            && self.min_eigenvalue_a >= -1e-10
    }
}

fn block_error(m: &DMatrix<f64>) -> f64 {
    let nn = m.nrows() / 2;
    let mut err = 0.0f64;
    for i in 0..nn {
        for j in 0..nn {
            let base = m[(i, j)];
            err = err
                .max((m[(i + nn, j)] + base).abs())
                .max((m[(i, j + nn)] + base).abs())
                .max((m[(i + nn, j + nn)] - base).abs());
        }
    }
    err
}

/// Symmetry, the `[[M, -M], [-M, M]]` block pattern, and the spectrum of `A`.
pub fn check_structure(c: &CouplingMatrices) -> StructureReport {
    let symmetry_error = (&c.a - c.a.transpose()).amax().max((&c.q - c.q.transpose()).amax());
    let min_eigenvalue_a = SymmetricEigen::new(c.a.clone()).eigenvalues.min();
    StructureReport { symmetry_error, block_error_a: block_error(&c.a), block_error_q: block_error(&c.q), min_eigenvalue_a }
}

/// Periodic nonlocal model `mu u_t + (A u + Q <u>) u_x = eps u_xx`.
pub fn build_1d_periodic(coupling: &CouplingMatrices) -> Result<NonlocalSystem> {
    NonlocalSystem::new(coupling.a.clone(), coupling.q.clone(), coupling.mu.clone())
}

/// Local model `mu u_t + (A u) u_x = eps u_xx` on `state_box`
/// (default `[-1, 1]^d`).
pub fn build_1d_nonperiodic(coupling: &CouplingMatrices, state_box: Option<StateBox>) -> Result<DiagonalSystem> {
    DiagonalSystem::dislocation(coupling.a.clone(), coupling.mu.clone(), state_box)
}

/// Smallest box containing the profile limits.
pub fn data_box(u0: &InitialData) -> Result<StateBox> {
    let alpha = u0.profiles.iter().map(|p| p.left_value().min(p.right_value())).collect();
    let beta = u0.profiles.iter().map(|p| p.left_value().max(p.right_value())).collect();
    StateBox::new(alpha, beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    pub deltas: Vec<f64>,
    pub periods: Vec<f64>,
    /// `L^1` gap to the local model at the final time on the data core.
    pub gaps: Vec<f64>,
    /// `sup_t |Q <u>|_inf` per period.
    pub nonlocal_max: Vec<f64>,
    /// `|Q <u>|_inf` at `t = 0` per period.
    pub nonlocal_initial: Vec<f64>,
    /// Smallest forward difference seen in any run, across the period seam
    /// included.
    pub min_density: f64,
}

impl RescaleReport {
    pub fn gaps_decreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] < w[0])
    }
}

fn min_periodic_density(traj: &Trajectory) -> f64 {
    let jumps = traj.periodic.as_ref().map(|p| p.jumps.clone()).unwrap_or_default();
    traj.snapshots
        .iter()
        .map(|s| {
            let seam = (0..s.u.d())
                .map(|i| {
                    let c = s.u.component(i);
                    c[0] + jumps.get(i).copied().unwrap_or(0.0) - c[c.len() - 1]
                })
                .fold(f64::INFINITY, f64::min);
            s.u.min_forward_difference().min(seam)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Restriction of periodic samples to the nodes of `target` inside `[a, b]`.
fn align(periodic: &GridFunction, target: &GridFunction, a: f64, b: f64) -> Result<(GridFunction, GridFunction)> {
    let range = target.index_range(a, b);
    let mut p = Vec::with_capacity(periodic.d());
    let mut t = Vec::with_capacity(periodic.d());
    for i in 0..periodic.d() {
        let mut pc = Vec::with_capacity(range.len());
        for j in range.clone() {
            let jp = periodic
                .node_index(target.x(j))
                .ok_or_else(|| Error::GridMismatch(format!("node {} not on the periodic grid", target.x(j))))?;
            pc.push(periodic.component(i)[jp]);
        }
        p.push(pc);
        t.push(target.component(i)[range.clone()].to_vec());
    }
    let x0 = target.x(range.start);
    Ok((GridFunction::new(p, target.dx(), x0)?, GridFunction::new(t, target.dx(), x0)?))
}

/// For each `delta`, solves the periodic model on period `1/delta` and
/// compares it at `t_final` with the local model on the data core.
/// Runs for different `delta` are independent and execute in parallel.
pub fn rescale_experiment(
    coupling: &CouplingMatrices,
    u0: &InitialData,
    cfg: &SolverConfig,
    deltas: &[f64],
) -> Result<RescaleReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("delta_list must be positive and strictly decreasing".into()));
    }
    if u0.d() != coupling.d() {
        return Err(Error::InvalidInput(format!("data has {} components, model has {}", u0.d(), coupling.d())));
    }
    let local = build_1d_nonperiodic(coupling, Some(data_box(u0)?))?;
    let mut local_cfg = cfg.clone();
    local_cfg.domain = DomainSpec::Truncated { margin: None };
    let reference = solve(u0, &local, &local_cfg)?;
    let nonlocal = build_1d_periodic(coupling)?;
    let (a, b) = u0.core();
    let runs: Vec<(f64, f64, f64, f64, f64)> = deltas
        .par_iter()
        .map(|&delta| {
            let period = 1.0 / delta;
            let data = PeriodicData::from_initial(u0, period, cfg.dx, cfg.mollifier())?;
            let mut pcfg = cfg.clone();
            pcfg.domain = DomainSpec::Periodic { period };
            let traj = solve_periodic_nonlocal(&data, &nonlocal, &pcfg)?;
            let (p, r) = align(&traj.last().u, &reference.last().u, a, b)?;
            let gap = l1_distance(&p, &r, 0..p.n())?;
            let series = &traj.periodic.as_ref().expect("periodic run").nonlocal_term;
            let inf = |v: &Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let nl_max = series.iter().map(inf).fold(0.0, f64::max);
            Ok((period, gap, nl_max, inf(&series[0]), min_periodic_density(&traj)))
        })
        .collect::<Result<_>>()?;
    let ref_density = reference.snapshots.iter().map(|s| s.u.min_forward_difference()).fold(f64::INFINITY, f64::min);
    Ok(RescaleReport {
        deltas: deltas.to_vec(),
        periods: runs.iter().map(|r| r.0).collect(),
        gaps: runs.iter().map(|r| r.1).collect(),
        nonlocal_max: runs.iter().map(|r| r.2).collect(),
        nonlocal_initial: runs.iter().map(|r| r.3).collect(),
        min_density: runs.iter().map(|r| r.4).fold(ref_density, f64::min),
    })
}
