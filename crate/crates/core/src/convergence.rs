//! Vanishing-viscosity experiments: epsilon sweeps on a shared grid, Cauchy
//! checks in `L^1`, weak-form residuals and recovery of the initial data.

use std::sync::LazyLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{llogl_uniformity, ratio_spread, verify_entropy_budget, EntropyReport};
use crate::error::{Error, Result};
use crate::grid::{trapezoid, GridFunction};
use crate::solver::{bump, solve, DomainSpec, InitialData, SolverConfig, Trajectory};
use crate::system::{check_h1, check_h2, DiagonalSystem};

const H_SAMPLES: usize = 1024;
const UNIFORM_FACTOR: f64 = 2.0;

/// `L^1` distance of all components over the node range `range`.
pub fn l1_distance(a: &GridFunction, b: &GridFunction, range: std::ops::Range<usize>) -> Result<f64> {
    if a.d() != b.d() || a.n() != b.n() || a.dx() != b.dx() || a.x0() != b.x0() {
        return Err(Error::GridMismatch("l1_distance needs identical grids".into()));
    }
    Ok((0..a.d())
        .map(|i| {
            let diff: Vec<f64> =
                range.clone().map(|j| (a.component(i)[j] - b.component(i)[j]).abs()).collect();
            trapezoid(&diff, a.dx())
        })
        .sum())
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub epsilons: Vec<f64>,
    pub dx: f64,
    pub core: (f64, f64),
    pub pairwise_l1: Vec<f64>,
    pub observed_rates: Vec<f64>,
    pub weak_residuals: Vec<f64>,
    /// Per run, `sup_t sum_i |w^i|_LlogL`.
    pub uniform_bounds: Vec<f64>,
    pub entropy: Vec<EntropyReport>,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepVerdict {
    pub cauchy: bool,
    pub residual_decay: bool,
    pub uniform_llogl: bool,
}

impl SweepResult {
    /// Distances strictly decreasing along the sweep.
    pub fn cauchy(&self) -> bool {
        self.pairwise_l1.windows(2).all(|w| w[1] < w[0])
    }

    /// Finest-run residual no larger than the coarsest.
    pub fn residual_decay(&self) -> bool {
        match (self.weak_residuals.first(), self.weak_residuals.last()) {
            (Some(a), Some(b)) => b <= a,
            _ => true,
        }
    }

    pub fn uniform_llogl(&self) -> bool {
        ratio_spread(&self.uniform_bounds) < UNIFORM_FACTOR
    }

    pub fn verdict(&self) -> SweepVerdict {
        SweepVerdict { cauchy: self.cauchy(), residual_decay: self.residual_decay(), uniform_llogl: self.uniform_llogl() }
    }
}

/// Runs every epsilon on one grid: `dx <= eps_min/2` and a margin sized
/// for the largest epsilon.
pub fn epsilon_sweep(u0: &InitialData, sys: &DiagonalSystem, base: &SolverConfig, eps_list: &[f64]) -> Result<SweepResult> {
    if eps_list.is_empty() {
        return Err(Error::Config("eps_list is empty".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Config("eps_list must be nonnegative and strictly decreasing".into()));
    }
    let eps_min = eps_list[eps_list.len() - 1];
    let mut shared = base.clone();
    if eps_min > 0.0 {
        shared.dx = shared.dx.min(eps_min / 2.0);
    }
    let h1 = check_h1(sys, H_SAMPLES);
    let mu_min = sys.mu().iter().copied().fold(f64::INFINITY, f64::min);
    if let DomainSpec::Truncated { margin: None } = shared.domain {
        let mut widest = shared.clone();
        widest.epsilon = eps_list[0];
        if widest.mollifier_width.is_none() {
            widest.mollifier_width = Some(eps_list[0]);
        }
        shared.domain = DomainSpec::Truncated { margin: Some(widest.default_margin(h1.m0, mu_min)) };
    }
    let h2 = check_h2(sys, H_SAMPLES, 64);
    let runs: Vec<(Trajectory, f64, f64, EntropyReport)> = eps_list
        .par_iter()
        .map(|&eps| {
            let mut cfg = shared.clone();
            cfg.epsilon = eps;
            let traj = solve(u0, sys, &cfg)?;
            let residual = weak_residual(&traj, sys)?;
            let bound = llogl_uniformity(&traj, 1)?.sup;
            let report = verify_entropy_budget(&traj, sys, &h1, h2.holds());
            Ok((traj, residual, bound, report))
        })
        .collect::<Result<_>>()?;
    let core = u0.core();
    let range = runs[0].0.initial().index_range(core.0, core.1);
    let mut pairwise_l1 = Vec::new();
    for w in runs.windows(2) {
        pairwise_l1.push(l1_distance(&w[0].0.last().u, &w[1].0.last().u, range.clone())?);
    }
    let observed_rates = (0..pairwise_l1.len().saturating_sub(1))
        .map(|k| (pairwise_l1[k] / pairwise_l1[k + 1]).ln() / (eps_list[k] / eps_list[k + 1]).ln())
        .collect();
    let mut result = SweepResult {
        epsilons: eps_list.to_vec(),
        dx: shared.dx,
        core,
        pairwise_l1,
        observed_rates,
        weak_residuals: Vec::new(),
        uniform_bounds: Vec::new(),
        entropy: Vec::new(),
        trajectories: Vec::new(),
    };
    for (traj, residual, bound, report) in runs {
        result.weak_residuals.push(residual);
        result.uniform_bounds.push(bound);
        result.entropy.push(report);
        result.trajectories.push(traj);
    }
    Ok(result)
}

static BUMP_MASS: LazyLock<f64> = LazyLock::new(|| {
    let n = 20_000;
    let h = 2.0 / n as f64;
    let s: Vec<f64> = (0..=n).map(|k| bump(-1.0 + k as f64 * h)).collect();
    trapezoid(&s, h)
});

/// Bump of unit mass centred at `c` with half-width `s`.
fn unit_bump(x: f64, c: f64, s: f64) -> f64 {
    bump((x - c) / s) / (*BUMP_MASS * s)
}

/// One member of the frozen test bank, `phi(t, x) = eta_t(t) eta_x(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub t_center: f64,
    pub t_half_width: f64,
    pub x_center: f64,
    pub x_half_width: f64,
}

/// Three scales `m = 0, 1, 2` by five offsets `k = 0..5`:
/// `t_c = T (k+1)/6`, `s_t = T/(6 2^m)`, `x_c = x_mid + (k-2) R/4`,
/// `s_x = R/2^m` with `R` the half-width of the data core.
pub fn test_bank(t_final: f64, core: (f64, f64)) -> Vec<TestFunction> {
    let x_mid = 0.5 * (core.0 + core.1);
    let r = (0.5 * (core.1 - core.0)).max(1e-3);
    let mut bank = Vec::with_capacity(15);
    for m in 0..3 {
        let scale = 2f64.powi(m);
        for k in 0..5 {
            bank.push(TestFunction {
                t_center: t_final * (k + 1) as f64 / 6.0,
                t_half_width: t_final / (6.0 * scale),
                x_center: x_mid + (k as f64 - 2.0) * r / 4.0,
                x_half_width: r / scale,
            });
        }
    }
    bank
}

/// `max_{i, phi} |int int phi (mu^i D_t u^i + lambda^i(u) D_x u^i)|` over
/// the test bank. `D_t` is the difference between consecutive snapshots with
/// `phi` taken at the midpoint time, `D_x` is centred, and the transport
/// term is averaged over the two snapshots; space uses the trapezoid rule.
pub fn weak_residual(traj: &Trajectory, sys: &DiagonalSystem) -> Result<f64> {
    weak_residual_with(traj, sys, &test_bank(traj.last().t, traj.info.core))
}

pub fn weak_residual_with(traj: &Trajectory, sys: &DiagonalSystem, bank: &[TestFunction]) -> Result<f64> {
    let u0 = traj.initial();
    let (d, n, dx) = (u0.d(), u0.n(), u0.dx());
    let (xa, xb) = (u0.x(1), u0.x(n.saturating_sub(2)));
    for tf in bank {
        if tf.x_center - tf.x_half_width < xa || tf.x_center + tf.x_half_width > xb {
            return Err(Error::InvalidInput(format!(
                "test function support [{}, {}] leaves the domain [{xa}, {xb}]",
                tf.x_center - tf.x_half_width,
                tf.x_center + tf.x_half_width
            )));
        }
    }
    let snaps = &traj.snapshots;
    let mu = sys.mu();
    let mut transport = vec![vec![vec![0.0; n]; d]; snaps.len()];
    let mut state = vec![0.0; d];
    let mut lam = vec![0.0; d];
    for (k, sn) in snaps.iter().enumerate() {
        for j in 1..n - 1 {
            sn.u.state_at(j, &mut state);
            sys.velocity(&state, &mut lam);
            for i in 0..d {
                let c = sn.u.component(i);
                transport[k][i][j] = lam[i] * (c[j + 1] - c[j - 1]) / (2.0 * dx);
            }
        }
    }
    let mut worst = 0.0f64;
    let mut integrand = vec![0.0; n];
    for tf in bank {
        let px: Vec<f64> = (0..n).map(|j| unit_bump(u0.x(j), tf.x_center, tf.x_half_width)).collect();
        for i in 0..d {
            let mut total = 0.0;
            for k in 0..snaps.len().saturating_sub(1) {
                let (t0, t1) = (snaps[k].t, snaps[k + 1].t);
                let eta = unit_bump(0.5 * (t0 + t1), tf.t_center, tf.t_half_width);
                if eta == 0.0 {
                    continue;
                }
                let (a, b) = (snaps[k].u.component(i), snaps[k + 1].u.component(i));
                for j in 0..n {
                    let dt_u = mu[i] * (b[j] - a[j]) / (t1 - t0);
                    integrand[j] = px[j] * (dt_u + 0.5 * (transport[k][i][j] + transport[k + 1][i][j]));
                }
                total += (t1 - t0) * eta * trapezoid(&integrand, dx);
            }
            worst = worst.max(total.abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Least-squares `c` in `dist(t) ~ c sqrt(t)`.
    pub c_fit: f64,
    /// Smallest `c` with `dist(t) <= c sqrt(t)` at every used snapshot.
    pub c_envelope: f64,
    /// `max(dist(t) - c_fit sqrt(t))`.
    pub worst_violation: f64,
    /// `(t, |u(t) - u(0)|_1)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fits `|u(t) - u(0)|_{L^1} <= c t^{1/2}` over snapshots with
/// `0 < t <= 10 t_1`. This is an `L^1` proxy for the weaker dual-norm
/// statement.
pub fn initial_recovery(traj: &Trajectory) -> Result<RecoveryReport> {
    let u0 = traj.initial();
    let range = 0..u0.n();
    let mut points = Vec::new();
    if traj.snapshots.len() > 1 {
        let t1 = traj.snapshots[1].t;
        for sn in traj.snapshots.iter().skip(1) {
            if sn.t > 10.0 * t1 * (1.0 + 1e-12) {
                break;
            }
            points.push((sn.t, l1_distance(u0, &sn.u, range.clone())?));
        }
    }
    let num: f64 = points.iter().map(|(t, v)| v * t.sqrt()).sum();
    let den: f64 = points.iter().map(|(t, _)| t).sum();
    let c_fit = if den > 0.0 { num / den } else { 0.0 };
    let c_envelope = points.iter().map(|(t, v)| v / t.sqrt()).fold(0.0, f64::max);
    let worst_violation = points.iter().map(|(t, v)| v - c_fit * t.sqrt()).fold(0.0, f64::max);
    Ok(RecoveryReport { c_fit, c_envelope, worst_violation, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionLimit {
    pub productions: Vec<f64>,
    pub budgets: Vec<f64>,
    pub finest: f64,
    /// Largest budget among the coarser runs.
    pub bound: f64,
    pub holds: bool,
}

/// Final cumulative production of the finest run against the coarser runs'
/// budgets `S(0) + C0 T`.
pub fn entropy_production_limit(sweep: &SweepResult) -> ProductionLimit {
    let productions: Vec<f64> =
        sweep.entropy.iter().map(|r| r.production_cum.last().copied().unwrap_or(0.0)).collect();
    let budgets: Vec<f64> = sweep.entropy.iter().map(|r| r.budget).collect();
    let finest = productions.last().copied().unwrap_or(0.0);
    let coarse = &budgets[..budgets.len().saturating_sub(1)];
    let bound = if coarse.is_empty() { budgets.last().copied().unwrap_or(0.0) } else { coarse.iter().copied().fold(f64::NEG_INFINITY, f64::max) };
    let holds = finest <= bound + 1e-6 * (1.0 + bound.abs());
    ProductionLimit { productions, budgets, finest, bound, holds }
}
