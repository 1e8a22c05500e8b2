//! A-priori quantities along trajectories: gradient entropy and its
//! production, sup and mass bounds, `L log L` norms of the gradient and a
//! fitted modulus-of-continuity constant.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{trapezoid, GridFunction, ScalarGridFunction};
use crate::orlicz::{check_llogl_bounds, entropy_f_clamped, norm_llogl, LlogLBounds};
use crate::solver::{Trajectory, MONO_TOL};
use crate::system::{DiagonalSystem, H1Constants};

pub const LINF_TOL: f64 = 1e-12;
pub const MASS_REL_TOL: f64 = 1e-8;
pub const BUDGET_REL_TOL: f64 = 1e-6;

fn clamp_nonneg(h: ScalarGridFunction) -> ScalarGridFunction {
    let samples = h.samples().iter().map(|v| v.max(0.0)).collect();
    ScalarGridFunction::new(samples, h.dx(), h.x0()).expect("clamping keeps the grid valid")
}

/// `sum_i mu^i int f(w^i)` with `w` the forward-difference gradient.
pub fn gradient_entropy(u: &GridFunction, mu: &[f64]) -> f64 {
    (0..u.d()).map(|i| mu[i] * u.gradient(i).integral_of(entropy_f_clamped)).sum()
}

/// `int sum_ij lambda^i_{,j}(u) w^i w^j` at one time, with `u` averaged to
/// the midpoints where the differences live.
pub fn production_density(u: &GridFunction, sys: &DiagonalSystem) -> f64 {
    let (d, n) = (u.d(), u.n());
    if n < 2 {
        return 0.0;
    }
    let w: Vec<ScalarGridFunction> = (0..d).map(|i| u.gradient(i)).collect();
    let mut jac = vec![0.0; d * d];
    let mut state = vec![0.0; d];
    let integrand: Vec<f64> = (0..n - 1)
        .map(|j| {
            if (0..d).all(|i| w[i].samples()[j] == 0.0) {
                return 0.0;
            }
            for (i, s) in state.iter_mut().enumerate() {
                let c = u.component(i);
                *s = 0.5 * (c[j] + c[j + 1]);
            }
            sys.jacobian_into(&state, &mut jac);
            let mut acc = 0.0;
            for a in 0..d {
                for b in 0..d {
                    acc += jac[a * d + b] * w[a].samples()[j] * w[b].samples()[j];
                }
            }
            acc
        })
        .collect();
    trapezoid(&integrand, u.dx())
}

/// Cumulative time-trapezoid of [`production_density`] over the snapshots.
pub fn entropy_production(traj: &Trajectory, sys: &DiagonalSystem) -> Vec<f64> {
    let dens: Vec<f64> = traj.snapshots.iter().map(|s| production_density(&s.u, sys)).collect();
    cumulative_trapezoid(&traj.times(), &dens)
}

fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for k in 0..y.len() {
        if k > 0 {
            acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BudgetVerdict {
    Pass,
    Fail { snapshot: usize, t: f64, lhs: f64, bound: f64 },
    /// The production sign condition fails, so no budget is claimed.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub production_cum: Vec<f64>,
    pub lhs: Vec<f64>,
    /// `S(0) + C0 t` at each snapshot.
    pub budget_series: Vec<f64>,
    /// `S(0) + C0 T`.
    pub budget: f64,
    pub s0: f64,
    pub c0: f64,
    pub m1: f64,
    pub max_linf: Vec<f64>,
    pub mass: Vec<Vec<f64>>,
    /// Production nondecreasing up to rounding.
    pub production_monotone: bool,
    pub verdict: BudgetVerdict,
}

impl EntropyReport {
    pub fn passed(&self) -> bool {
        self.verdict == BudgetVerdict::Pass
    }

    pub fn sup_lhs(&self) -> f64 {
        self.lhs.iter().copied().fold(0.0, f64::max)
    }
}

/// `C0 = (2/e) d M1 sum_i |u0^i|_inf`.
pub fn budget_constant(d: usize, m1: f64, sup_norms: &[f64]) -> f64 {
    2.0 / E * d as f64 * m1 * sup_norms.iter().sum::<f64>()
}

/// Checks `S(t) + production(t) <= S(0) + C0 t` at every snapshot with
/// relative tolerance `1e-6 (1 + budget)`. Reported as not applicable when
/// `h2_holds` is false.
pub fn verify_entropy_budget(traj: &Trajectory, sys: &DiagonalSystem, h1: &H1Constants, h2_holds: bool) -> EntropyReport {
    let times = traj.times();
    let d = traj.d();
    let mu = sys.mu();
    let s: Vec<f64> = traj.snapshots.iter().map(|sn| gradient_entropy(&sn.u, mu)).collect();
    let production_cum = entropy_production(traj, sys);
    let lhs: Vec<f64> = s.iter().zip(&production_cum).map(|(a, b)| a + b).collect();
    let u0 = traj.initial();
    let sups: Vec<f64> = (0..d).map(|i| u0.sup_norm(i)).collect();
    let c0 = budget_constant(d, h1.m1, &sups);
    let s0 = s[0];
    let budget_series: Vec<f64> = times.iter().map(|t| s0 + c0 * t).collect();
    let budget = s0 + c0 * times.last().copied().unwrap_or(0.0);
    let tol = BUDGET_REL_TOL * (1.0 + budget);
    let max_linf = (0..d)
        .map(|i| traj.snapshots.iter().map(|sn| sn.u.sup_norm(i)).fold(0.0, f64::max))
        .collect();
    let mass = (0..d).map(|i| traj.snapshots.iter().map(|sn| sn.u.gradient(i).integral()).collect()).collect();
    let scale = production_cum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let production_monotone = production_cum.windows(2).all(|w| w[1] >= w[0] - 1e-12 * (1.0 + scale));
    let verdict = if !h2_holds {
        BudgetVerdict::NotApplicable
    } else {
        match (0..lhs.len()).find(|&k| lhs[k] > budget_series[k] + tol) {
            Some(k) => BudgetVerdict::Fail { snapshot: k, t: times[k], lhs: lhs[k], bound: budget_series[k] },
            None => BudgetVerdict::Pass,
        }
    };
    EntropyReport {
        times,
        s,
        production_cum,
        lhs,
        budget_series,
        budget,
        s0,
        c0,
        m1: h1.m1,
        max_linf,
        mass,
        production_monotone,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub initial_sup: Vec<f64>,
    pub max_linf: Vec<f64>,
    pub max_mass: Vec<f64>,
    pub min_forward_difference: f64,
    pub linf_ok: bool,
    pub mass_ok: bool,
    pub monotone_ok: bool,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.linf_ok && self.mass_ok && self.monotone_ok
    }
}

/// Sup bound, gradient mass bound `int w^i <= 2 |u0^i|_inf` and
/// monotonicity at every snapshot.
pub fn verify_linf_and_mass(traj: &Trajectory) -> BoundsReport {
    let d = traj.d();
    let u0 = traj.initial();
    let initial_sup: Vec<f64> = (0..d).map(|i| u0.sup_norm(i)).collect();
    let mut max_linf = vec![0.0f64; d];
    let mut max_mass = vec![0.0f64; d];
    let mut min_fd = f64::INFINITY;
    for sn in &traj.snapshots {
        for i in 0..d {
            max_linf[i] = max_linf[i].max(sn.u.sup_norm(i));
            max_mass[i] = max_mass[i].max(sn.u.gradient(i).integral());
        }
        min_fd = min_fd.min(sn.u.min_forward_difference());
    }
    let linf_ok = (0..d).all(|i| max_linf[i] <= initial_sup[i] + LINF_TOL);
    let mass_ok = (0..d).all(|i| max_mass[i] <= 2.0 * initial_sup[i] * (1.0 + MASS_REL_TOL) + 1e-14);
    BoundsReport {
        initial_sup,
        max_linf,
        max_mass,
        min_forward_difference: min_fd,
        linf_ok,
        mass_ok,
        monotone_ok: min_fd >= -MONO_TOL,
    }
}

/// `1/ln(1/delta + 1) + 1/ln(1/h + 1)`.
pub fn omega(delta: f64, h: f64) -> f64 {
    let part = |s: f64| if s > 0.0 { 1.0 / (1.0 / s + 1.0).ln() } else { 0.0 };
    part(delta) + part(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub fitted_c2: f64,
    pub worst_ratio: f64,
    pub sample_count: usize,
    /// `(t, x, delta, h)` realizing the worst ratio.
    pub argmax: (f64, f64, f64, f64),
}

fn log_grid_indices(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if hi <= lo || count <= 1 {
        return vec![lo.max(1)];
    }
    let (a, b) = ((lo.max(1) as f64).ln(), (hi as f64).ln());
    let mut v: Vec<usize> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    v.dedup();
    v
}

/// Worst `sum_i |u^i(t+delta, x+h) - u^i(t, x)| / omega(delta, h)` over
/// log-spaced `delta` (snapshot multiples, up to `T/4`) and `h` (cell
/// multiples, `dx` to `R`, both signs), all snapshot pairs and all `x` in the
/// data core. `n_grid` points are used per axis.
pub fn modulus_of_continuity(traj: &Trajectory, n_grid: usize) -> ContinuityReport {
    let snaps = &traj.snapshots;
    let mut report = ContinuityReport { fitted_c2: 0.0, worst_ratio: 0.0, sample_count: 0, argmax: (0.0, 0.0, 0.0, 0.0) };
    if snaps.len() < 2 {
        return report;
    }
    let u0 = &snaps[0].u;
    let (dx, d) = (u0.dx(), u0.d());
    let t_final = snaps[snaps.len() - 1].t;
    let stride = snaps[1].t - snaps[0].t;
    let max_lag = ((0.25 * t_final / stride + 1e-9).floor() as usize).clamp(1, snaps.len() - 1);
    let (a, b) = traj.info.core;
    let r = (0.5 * (b - a)).max(2.0 * dx);
    let max_shift = ((r / dx).round() as usize).max(1);
    let lags = log_grid_indices(1, max_lag, n_grid);
    let shifts = log_grid_indices(1, max_shift, n_grid);
    let core = u0.index_range(a, b);
    let n = u0.n();
    for &lag in &lags {
        for &shift in &shifts {
            for sign in [1isize, -1] {
                for k in 0..snaps.len() - lag {
                    let (s0, s1) = (&snaps[k], &snaps[k + lag]);
                    let delta = s1.t - s0.t;
                    let h = shift as f64 * dx;
                    let om = omega(delta, h);
                    for j in core.clone() {
                        let jj = j as isize + sign * shift as isize;
                        if jj < 0 || jj as usize >= n {
                            continue;
                        }
                        let mut diff = 0.0;
                        for i in 0..d {
                            diff += (s1.u.component(i)[jj as usize] - s0.u.component(i)[j]).abs();
                        }
                        let ratio = diff / om;
                        report.sample_count += 1;
                        if ratio > report.worst_ratio {
                            report.worst_ratio = ratio;
                            report.argmax = (s0.t, s0.u.x(j), delta, sign as f64 * h);
                        }
                    }
                }
            }
        }
    }
    report.fitted_c2 = report.worst_ratio;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlogLSeries {
    pub times: Vec<f64>,
    /// `sum_i |w^i|_LlogL` per snapshot.
    pub norms: Vec<f64>,
    pub sup: f64,
    /// Entropy / norm comparisons per snapshot and component.
    pub bounds: Vec<Vec<LlogLBounds>>,
}

impl LlogLSeries {
    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.bounds.iter().flatten().all(|b| b.holds(tol))
    }
}

/// `L log L` norms of the gradient along the trajectory, at every `stride`-th
/// snapshot (the last one is always included).
pub fn llogl_uniformity(traj: &Trajectory, stride: usize) -> Result<LlogLSeries> {
    let stride = stride.max(1);
    let last = traj.snapshots.len() - 1;
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let mut bounds = Vec::new();
    for (k, sn) in traj.snapshots.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let mut total = 0.0;
        let mut per = Vec::with_capacity(sn.u.d());
        for i in 0..sn.u.d() {
            let w = clamp_nonneg(sn.u.gradient(i));
            total += norm_llogl(&w)?.value;
            per.push(check_llogl_bounds(&w)?);
        }
        times.push(sn.t);
        norms.push(total);
        bounds.push(per);
    }
    let sup = norms.iter().copied().fold(0.0, f64::max);
    Ok(LlogLSeries { times, norms, sup, bounds })
}

/// Upper bound on `sup_t sum_i |w^i|_LlogL` implied by the entropy budget
/// and the mass bound: `d + budget/mu_min + ln(1+e^2) sum_i mass_i`.
pub fn llogl_bound_from_budget(report: &EntropyReport, mu: &[f64]) -> f64 {
    let d = report.mass.len();
    let mu_min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let mass: f64 = report.mass.iter().map(|m| m.iter().copied().fold(0.0, f64::max)).sum();
    d as f64 + report.budget / mu_min + (1.0 + E * E).ln() * mass
}

/// `(max - min) / min` of positive values; 0 for fewer than two values.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        (max - min) / min
    }
}

/// `max / min` of positive values; 1 for fewer than two values.
pub fn ratio_spread(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 1.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        1.0
    } else {
        max / min
    }
}
