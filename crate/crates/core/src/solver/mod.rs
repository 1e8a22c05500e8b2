//! Explicit upwind solver for `mu^i u^i_t + lambda^i(u) u^i_x = eps u^i_xx`.
//!
//! Transport is upwinded by the local sign of the velocity, diffusion is the
//! centered second difference, time stepping is forward Euler. Each node's
//! update is a convex combination of its three neighbours once
//! `|c| + 2b <= 1`, which gives the discrete maximum principle and
//! preserves monotone data.

mod periodic;
mod profile;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::system::{check_h1, DiagonalSystem};

pub use periodic::{solve_periodic_nonlocal, NonlocalSystem, PeriodicData};
pub use profile::{bump, bump_cdf, mollifier_weights, mollify, mollify_fns, InitialData, Profile};

/// Slack added to the sampled velocity bound.
pub const KAPPA: f64 = 1e-6;
pub const DEFAULT_CFL: f64 = 0.45;
pub const MONO_TOL: f64 = 1e-12;
/// Cells at each end that must stay at their initial value.
pub const SENTINEL_CELLS: usize = 4;
pub const SENTINEL_TOL: f64 = 1e-9;
const BOX_TOL: f64 = 1e-9;
const H1_SAMPLES: usize = 1024;

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_domain() -> DomainSpec {
    DomainSpec::Truncated { margin: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Data core widened by `margin` on both sides; `None` picks a margin
    /// from the speed bound and the diffusion length.
    Truncated {
        #[serde(default)]
        margin: Option<f64>,
    },
    Periodic { period: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Half-width of the initial mollifier; defaults to `epsilon`.
    #[serde(default)]
    pub mollifier_width: Option<f64>,
    pub dx: f64,
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    pub record_every: f64,
    /// Fixed time step; must respect the stability bound.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl SolverConfig {
    pub fn new(epsilon: f64, dx: f64, t_final: f64) -> Self {
        Self {
            epsilon,
            mollifier_width: None,
            dx,
            t_final,
            cfl_safety: DEFAULT_CFL,
            domain: default_domain(),
            record_every: t_final / 20.0,
            dt: None,
        }
    }

    pub fn mollifier(&self) -> f64 {
        self.mollifier_width.unwrap_or(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return bad(format!("dx must be positive, got {}", self.dx));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return bad(format!("t_final must be finite and >= 0, got {}", self.t_final));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.record_every > 0.0) {
            return bad(format!("record_every must be positive, got {}", self.record_every));
        }
        if let Some(w) = self.mollifier_width {
            if !(w >= 0.0) {
                return bad(format!("mollifier_width must be >= 0, got {w}"));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        match self.domain {
            DomainSpec::Truncated { margin: Some(m) } if !(m >= 0.0) => bad(format!("margin must be >= 0, got {m}")),
            DomainSpec::Periodic { period } if !(period > 0.0) => bad(format!("period must be positive, got {period}")),
            _ => Ok(()),
        }
    }

    /// Largest stable step for effective speed `v` and diffusivity `eps_eff`:
    /// `cfl / (v/dx + 2 eps_eff/dx^2)`, which never exceeds
    /// `cfl * min(dx/v, dx^2/(2 eps_eff))`.
    pub fn dt_bound(&self, v: f64, eps_eff: f64) -> f64 {
        let rate = v / self.dx + 2.0 * eps_eff / (self.dx * self.dx);
        if rate > 0.0 {
            self.cfl_safety / rate
        } else {
            f64::INFINITY
        }
    }

    /// Default half-width added around the data core.
    pub fn default_margin(&self, m0: f64, mu_min: f64) -> f64 {
        let v = (m0 + KAPPA) / mu_min;
        let diffusivity = (self.epsilon + (m0 + KAPPA) * self.dx / 2.0) / mu_min;
        v * self.t_final + 10.0 * (diffusivity * self.t_final).sqrt() + self.mollifier() + 10.0 * self.dx
    }
}

/// Resolved run parameters, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub system: String,
    pub config: SolverConfig,
    pub m0: f64,
    pub dt_max: f64,
    pub grid: UniformGrid,
    pub core: (f64, f64),
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: GridFunction,
}

/// Per-snapshot extras of a periodic nonlocal run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicInfo {
    pub period: f64,
    /// Jump of each component across one period.
    pub jumps: Vec<f64>,
    /// `Q <u>` at every snapshot.
    pub nonlocal_term: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub info: RunInfo,
    pub notes: Vec<String>,
    pub periodic: Option<PeriodicInfo>,
}

impl Trajectory {
    pub fn initial(&self) -> &GridFunction {
        &self.snapshots[0].u
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has a first snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn d(&self) -> usize {
        self.initial().d()
    }

    /// Snapshot dump: header `t,x,u_1..u_d`, one row per node and snapshot,
    /// preceded by `#` comment lines.
    pub fn write_csv(&self, w: &mut impl Write, comments: &[String]) -> Result<()> {
        for c in comments {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        let d = self.d();
        let mut header = String::from("t,x");
        for i in 1..=d {
            header.push_str(&format!(",u_{i}"));
        }
        writeln!(w, "{header}")?;
        for s in &self.snapshots {
            for j in 0..s.u.n() {
                write!(w, "{},{}", s.t, s.u.x(j))?;
                for i in 0..d {
                    write!(w, ",{}", s.u.component(i)[j])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Called after every accepted step.
pub trait StepObserver {
    fn on_step(&mut self, t: f64, dt: f64, u: &GridFunction);
}

impl StepObserver for () {
    fn on_step(&mut self, _: f64, _: f64, _: &GridFunction) {}
}

/// One explicit update of component `u` with effective velocities `vel`
/// (already divided by `mu`). `ghost` holds the values beyond each end.
/// Returns the largest local `|c| + 2b`.
pub(crate) fn advance_component(u: &[f64], vel: &[f64], ghost: (f64, f64), dt_dx: f64, b: f64, out: &mut [f64]) -> f64 {
    let n = u.len();
    let mut worst = 0.0f64;
    for j in 0..n {
        let uj = u[j];
        let left = if j == 0 { ghost.0 } else { u[j - 1] };
        let right = if j + 1 == n { ghost.1 } else { u[j + 1] };
        let c = dt_dx * vel[j];
        let (a, up) = if c > 0.0 { (c, left) } else { (-c, right) };
        worst = worst.max(a + 2.0 * b);
        let diff = b * ((left - uj) + (right - uj));
        out[j] = if a >= 0.5 { up + (1.0 - a) * (uj - up) + diff } else { uj + a * (up - uj) + diff };
    }
    worst
}

pub(crate) fn courant_error(dt: f64, component: usize, worst: f64) -> Error {
    Error::Cfl {
        dt,
        bound: dt / worst,
        detail: format!("component {component}: local |c| + 2b = {worst} exceeds 1"),
    }
}

/// Effective velocities `lambda^i(u_j) / mu^i` at every node.
pub(crate) fn effective_velocities(u: &GridFunction, sys: &DiagonalSystem) -> Vec<Vec<f64>> {
    let (d, n) = (u.d(), u.n());
    let mut vel = vec![vec![0.0; n]; d];
    let mut state = vec![0.0; d];
    let mut lam = vec![0.0; d];
    let mu = sys.mu();
    for j in 0..n {
        u.state_at(j, &mut state);
        sys.velocity(&state, &mut lam);
        for i in 0..d {
            vel[i][j] = lam[i] / mu[i];
        }
    }
    vel
}

fn step_into(u: &GridFunction, vel: &[Vec<f64>], mu: &[f64], eps: f64, dt: f64, out: &mut GridFunction) -> Result<()> {
    let dx = u.dx();
    let dt_dx = dt / dx;
    for (i, o) in out.components_mut().iter_mut().enumerate() {
        let ui = u.component(i);
        let b = dt * eps / (mu[i] * dx * dx);
        let ghost = (ui[0], ui[ui.len() - 1]);
        let worst = advance_component(ui, &vel[i], ghost, dt_dx, b, o);
        if worst > 1.0 + 1e-12 {
            return Err(courant_error(dt, i, worst));
        }
    }
    Ok(())
}

/// One forward-Euler step with zero-gradient boundary cells.
pub fn step(u: &GridFunction, sys: &DiagonalSystem, eps: f64, dt: f64) -> Result<GridFunction> {
    if u.d() != sys.dim() {
        return Err(Error::InvalidInput(format!("state has {} components, system has {}", u.d(), sys.dim())));
    }
    if !(dt > 0.0) || !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and eps >= 0, got dt = {dt}, eps = {eps}")));
    }
    let vel = effective_velocities(u, sys);
    let mut out = u.clone();
    step_into(u, &vel, sys.mu(), eps, dt, &mut out)?;
    if !out.is_finite() {
        return Err(Error::NonFinite { t: dt, last_good: Box::new(u.clone()) });
    }
    Ok(out)
}

/// Step counts per recording interval so that every snapshot time is hit
/// exactly. With a fixed `dt`, recording happens every `round(record/dt)`
/// steps and the last step is shortened to land on `t_final`.
pub(crate) fn schedule(cfg: &SolverConfig, dt_max: f64) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    if cfg.t_final == 0.0 {
        return out;
    }
    if let Some(dt) = cfg.dt {
        let per = ((cfg.record_every / dt).round() as usize).max(1);
        let total = (cfg.t_final / dt - 1e-9).ceil().max(1.0) as usize;
        let mut done = 0;
        while done < total {
            let k = per.min(total - done);
            out.push((dt, k));
            done += k;
        }
        return out;
    }
    let intervals = (cfg.t_final / cfg.record_every - 1e-9).ceil().max(1.0) as usize;
    for k in 0..intervals {
        let t0 = k as f64 * cfg.record_every;
        let t1 = if k + 1 == intervals { cfg.t_final } else { (k + 1) as f64 * cfg.record_every };
        let len = t1 - t0;
        let m = if dt_max.is_finite() { (len / dt_max - 1e-12).ceil().max(1.0) as usize } else { 1 };
        out.push((len / m as f64, m));
    }
    out
}

/// Solves on a truncated domain to `t_final`.
pub fn solve(u0: &InitialData, sys: &DiagonalSystem, cfg: &SolverConfig) -> Result<Trajectory> {
    solve_observed(u0, sys, cfg, &mut ())
}

pub fn solve_observed(
    u0: &InitialData,
    sys: &DiagonalSystem,
    cfg: &SolverConfig,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    cfg.validate()?;
    let margin = match cfg.domain {
        DomainSpec::Truncated { margin } => margin,
        DomainSpec::Periodic { .. } => {
            return Err(Error::Config("periodic domains are handled by solve_periodic_nonlocal".into()))
        }
    };
    let d = sys.dim();
    if u0.d() != d {
        return Err(Error::InvalidInput(format!("initial data has {} components, system has {d}", u0.d())));
    }
    let m0 = check_h1(sys, H1_SAMPLES).m0;
    let mu_min = sys.mu().iter().copied().fold(f64::INFINITY, f64::min);
    let bound = cfg.dt_bound((m0 + KAPPA) / mu_min, cfg.epsilon / mu_min);
    let dt_max = match cfg.dt {
        Some(dt) if dt > bound * (1.0 + 1e-12) => {
            return Err(Error::Cfl {
                dt,
                bound,
                detail: format!(
                    "requested dt exceeds cfl/(v/dx + 2 eps/dx^2) with v = {}, cfl = {}",
                    (m0 + KAPPA) / mu_min,
                    cfg.cfl_safety
                ),
            })
        }
        Some(dt) => dt,
        None => bound,
    };
    let core = u0.core();
    let margin = margin.unwrap_or_else(|| cfg.default_margin(m0, mu_min));
    let dx = cfg.dx;
    let j0 = ((core.0 - margin) / dx).floor();
    let j1 = ((core.1 + margin) / dx).ceil();
    let n = (j1 - j0) as usize + 1;
    if n < 2 * SENTINEL_CELLS + 2 {
        return Err(Error::Config(format!("domain has only {n} nodes")));
    }
    let grid = UniformGrid { n, dx, x0: j0 * dx };
    let mut u = mollify(u0, cfg.mollifier(), grid)?;
    let mut state = vec![0.0; d];
    for j in 0..n {
        u.state_at(j, &mut state);
        if !sys.state_box().contains(&state, BOX_TOL) {
            return Err(Error::InvalidInput(format!(
                "initial state {state:?} at x = {} lies outside the system box",
                u.x(j)
            )));
        }
    }
    let sentinels: Vec<[f64; 2 * SENTINEL_CELLS]> = (0..d)
        .map(|i| {
            let c = u.component(i);
            let mut s = [0.0; 2 * SENTINEL_CELLS];
            s[..SENTINEL_CELLS].copy_from_slice(&c[..SENTINEL_CELLS]);
            s[SENTINEL_CELLS..].copy_from_slice(&c[n - SENTINEL_CELLS..]);
            s
        })
        .collect();

    let mut notes = Vec::new();
    let mut snapshots = vec![Snapshot { t: 0.0, u: u.clone() }];
    let mut next = u.clone();
    let mut t = 0.0;
    let mut steps = 0;
    let mut exited_box = false;
    let plan = schedule(cfg, dt_max);
    let plan_len = plan.len();
    for (k, (dt, m)) in plan.into_iter().enumerate() {
        for s in 0..m {
            let vel = effective_velocities(&u, sys);
            let is_last = k + 1 == plan_len && s + 1 == m;
            let h = if cfg.dt.is_some() && is_last { cfg.t_final - t } else { dt };
            step_into(&u, &vel, sys.mu(), cfg.epsilon, h, &mut next)?;
            if !next.is_finite() {
                return Err(Error::NonFinite { t: t + h, last_good: Box::new(u) });
            }
            std::mem::swap(&mut u, &mut next);
            t += h;
            steps += 1;
            observer.on_step(t, h, &u);
        }
        if cfg.dt.is_none() {
            t = if k + 1 == plan_len { cfg.t_final } else { (k + 1) as f64 * cfg.record_every };
        }
        check_sentinels(&u, &sentinels, t)?;
        if !exited_box && !within_box(&u, sys) {
            exited_box = true;
            notes.push(format!("state left the system box by t = {t}"));
        }
        snapshots.push(Snapshot { t, u: u.clone() });
    }
    Ok(Trajectory {
        snapshots,
        info: RunInfo { system: sys.name().to_string(), config: cfg.clone(), m0, dt_max, grid, core, steps },
        notes,
        periodic: None,
    })
}

fn within_box(u: &GridFunction, sys: &DiagonalSystem) -> bool {
    let mut state = vec![0.0; u.d()];
    (0..u.n()).all(|j| {
        u.state_at(j, &mut state);
        sys.state_box().contains(&state, BOX_TOL)
    })
}

fn check_sentinels(u: &GridFunction, sentinels: &[[f64; 2 * SENTINEL_CELLS]], t: f64) -> Result<()> {
    let n = u.n();
    for (i, s) in sentinels.iter().enumerate() {
        let c = u.component(i);
        let cells = c[..SENTINEL_CELLS].iter().chain(&c[n - SENTINEL_CELLS..]);
        for (v, v0) in cells.zip(s) {
            let drift = (v - v0).abs();
            if drift > SENTINEL_TOL {
                return Err(Error::Contaminated { t, component: i, drift });
            }
        }
    }
    Ok(())
}
