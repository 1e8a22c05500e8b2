//! Periodic integrator for the nonlocal linear model
//! `mu^i u^i_t + ((A u)^i + (Q <u>)^i) u^i_x = eps u^i_xx`,
//! where `u^i - l^i x` is periodic and `<u>` is the mean over one period.

use nalgebra::DMatrix;

use super::{advance_component, courant_error, mollify_fns, DomainSpec, InitialData, PeriodicInfo, RunInfo};
use super::{Snapshot, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalSystem {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub mu: Vec<f64>,
}

impl NonlocalSystem {
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>, mu: Vec<f64>) -> Result<Self> {
        let d = a.nrows();
        if !a.is_square() || q.shape() != (d, d) || mu.len() != d {
            return Err(Error::InvalidInput("A, Q and mu must share one dimension".into()));
        }
        if a.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coupling matrices must be finite".into()));
        }
        if mu.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput("weights mu must be positive".into()));
        }
        Ok(Self { a, q, mu })
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }
}

/// One period of samples `u^i(x0 + j dx)`, `j < n`, continued by
/// `u^i(x + P) = u^i(x) + jumps[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicData {
    pub u: GridFunction,
    pub jumps: Vec<f64>,
}

impl PeriodicData {
    pub fn new(u: GridFunction, jumps: Vec<f64>) -> Result<Self> {
        if jumps.len() != u.d() {
            return Err(Error::InvalidInput("one jump per component required".into()));
        }
        Ok(Self { u, jumps })
    }

    /// Periodic continuation of data that is constant outside its core.
    /// The period must be a whole number of cells; nodes sit on multiples
    /// of `dx` and the window starts near `-period/2`.
    pub fn from_initial(u0: &InitialData, period: f64, dx: f64, mollifier_width: f64) -> Result<Self> {
        let n = grid_cells(period, dx)?;
        let x0 = -((n / 2) as f64) * dx;
        let (a, b) = u0.core();
        if a - mollifier_width < x0 || b + mollifier_width > x0 + period {
            return Err(Error::InvalidInput(format!(
                "data core [{a}, {b}] plus mollifier does not fit in one period starting at {x0}"
            )));
        }
        let jumps: Vec<f64> = u0.profiles.iter().map(|p| p.right_value() - p.left_value()).collect();
        let exts: Vec<Box<dyn Fn(f64) -> f64 + '_>> = u0
            .profiles
            .iter()
            .zip(&jumps)
            .map(|(p, &jump)| {
                Box::new(move |x: f64| {
                    let k = ((x - x0) / period).floor();
                    p.eval(x - k * period) + k * jump
                }) as Box<dyn Fn(f64) -> f64>
            })
            .collect();
        let refs: Vec<&dyn Fn(f64) -> f64> = exts.iter().map(|f| f.as_ref()).collect();
        let u = mollify_fns(&refs, mollifier_width, UniformGrid { n, dx, x0 })?;
        Ok(Self { u, jumps })
    }

    pub fn period(&self) -> f64 {
        self.u.n() as f64 * self.u.dx()
    }

    /// Trapezoid mean of component `i` over one period.
    pub fn mean(&self, i: usize) -> f64 {
        period_mean(self.u.component(i), self.jumps[i])
    }
}

fn grid_cells(period: f64, dx: f64) -> Result<usize> {
    let r = period / dx;
    let n = r.round();
    if !(n >= 2.0) || (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Config(format!("period {period} is not a whole number of cells of size {dx}")));
    }
    Ok(n as usize)
}

/// `(dx/P) (sum_j u_j + jump/2)` with `P = n dx`.
fn period_mean(c: &[f64], jump: f64) -> f64 {
    let sum: f64 = c.iter().sum();
    (sum + 0.5 * jump) / c.len() as f64
}

fn nonlocal_term(sys: &NonlocalSystem, u: &GridFunction, jumps: &[f64]) -> Vec<f64> {
    let d = sys.d();
    let means: Vec<f64> = (0..d).map(|i| period_mean(u.component(i), jumps[i])).collect();
    (0..d).map(|i| (0..d).map(|k| sys.q[(i, k)] * means[k]).sum()).collect()
}

/// Effective velocities at every node and their maximum modulus.
fn velocities(sys: &NonlocalSystem, u: &GridFunction, jumps: &[f64]) -> (Vec<Vec<f64>>, f64) {
    let (d, n) = (u.d(), u.n());
    let nl = nonlocal_term(sys, u, jumps);
    let mut vel = vec![vec![0.0; n]; d];
    let mut vmax = 0.0f64;
    for (i, row) in vel.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let mut s = nl[i];
            for k in 0..d {
                s += sys.a[(i, k)] * u.component(k)[j];
            }
            *v = s / sys.mu[i];
            vmax = vmax.max(v.abs());
        }
    }
    (vel, vmax)
}

/// Solves the periodic nonlocal model; the time step adapts to the
/// current maximal speed.
pub fn solve_periodic_nonlocal(data: &PeriodicData, sys: &NonlocalSystem, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let period = match cfg.domain {
        DomainSpec::Periodic { period } => period,
        DomainSpec::Truncated { .. } => return Err(Error::Config("periodic solve needs a periodic domain".into())),
    };
    if data.u.d() != sys.d() {
        return Err(Error::InvalidInput(format!("data has {} components, system has {}", data.u.d(), sys.d())));
    }
    if (data.u.dx() - cfg.dx).abs() > 1e-12 * cfg.dx || grid_cells(period, cfg.dx)? != data.u.n() {
        return Err(Error::GridMismatch("periodic data does not match the configured period and dx".into()));
    }
    let d = sys.d();
    let dx = cfg.dx;
    let mu_min = sys.mu.iter().copied().fold(f64::INFINITY, f64::min);
    let eps_eff = cfg.epsilon / mu_min;
    let jumps = &data.jumps;

    let mut u = data.u.clone();
    let mut next = u.clone();
    let mut snapshots = vec![Snapshot { t: 0.0, u: u.clone() }];
    let mut nl_series = vec![nonlocal_term(sys, &u, jumps)];
    let (mut t, mut steps, mut dt_max, mut v_seen) = (0.0f64, 0usize, 0.0f64, 0.0f64);
    let intervals = if cfg.t_final == 0.0 { 0 } else { (cfg.t_final / cfg.record_every - 1e-9).ceil().max(1.0) as usize };
    for k in 0..intervals {
        let t_next = if k + 1 == intervals { cfg.t_final } else { (k + 1) as f64 * cfg.record_every };
        while t < t_next {
            let (vel, vmax) = velocities(sys, &u, jumps);
            v_seen = v_seen.max(vmax);
            let bound = cfg.dt_bound(vmax, eps_eff);
            let mut h = match cfg.dt {
                Some(dt) if dt > bound * (1.0 + 1e-12) => {
                    return Err(Error::Cfl {
                        dt,
                        bound,
                        detail: format!("requested dt exceeds the bound for current speed {vmax}"),
                    })
                }
                Some(dt) => dt,
                None => bound,
            };
            let remaining = t_next - t;
            if h >= remaining {
                h = remaining;
            } else if remaining - h < 1e-6 * h {
                h = 0.5 * remaining;
            }
            for i in 0..d {
                let c = u.component(i);
                let ghost = (c[c.len() - 1] - jumps[i], c[0] + jumps[i]);
                let b = h * cfg.epsilon / (sys.mu[i] * dx * dx);
                let worst = advance_component(c, &vel[i], ghost, h / dx, b, &mut next.components_mut()[i]);
                if worst > 1.0 + 1e-12 {
                    return Err(courant_error(h, i, worst));
                }
            }
            if !next.is_finite() {
                return Err(Error::NonFinite { t: t + h, last_good: Box::new(u) });
            }
            std::mem::swap(&mut u, &mut next);
            dt_max = dt_max.max(h);
            steps += 1;
            t = if h == remaining { t_next } else { t + h };
        }
        nl_series.push(nonlocal_term(sys, &u, jumps));
        snapshots.push(Snapshot { t, u: u.clone() });
    }
    let grid = data.u.grid();
    Ok(Trajectory {
        snapshots,
        info: RunInfo {
            system: "dislocation-periodic".into(),
            config: cfg.clone(),
            m0: v_seen,
            dt_max,
            grid,
            core: (grid.x0, grid.x0 + period),
            steps,
        },
        notes: Vec::new(),
        periodic: Some(PeriodicInfo { period, jumps: jumps.clone(), nonlocal_term: nl_series }),
    })
}
