//! Command-line front end: `diaghyp <subcommand> --config run.json`.

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::convergence::{entropy_production_limit, epsilon_sweep, initial_recovery};
use crate::diagnostics::{
    llogl_bound_from_budget, llogl_uniformity, modulus_of_continuity, relative_spread, verify_entropy_budget,
    verify_linf_and_mass, BudgetVerdict,
};
use crate::dislocation::{build_1d_nonperiodic, check_structure, rescale_experiment};
use crate::error::{Error, Result};
use crate::grid::ScalarGridFunction;
use crate::orlicz::{check_holder, check_llogl_bounds};
use crate::solver::{solve, SolverConfig, KAPPA};
use crate::system::{check_h1, check_h2, check_h2_effective, DiagonalSystem};

pub use config::{DiagnosticsSpec, NormsSpec, RunConfig, SweepSpec, SystemSpec, SCHEMA_VERSION, SEED_ENV};
pub use output::{config_hash, emit_plot_data, to_sorted_json, write_plot_data, OutputDir, PlotData, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const H_SAMPLES: usize = 1024;
const DIR_SAMPLES: usize = 64;
const SLACK_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "diaghyp", version, about = "Vanishing-viscosity experiments for diagonal hyperbolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Single solve with diagnostics.
    Solve,
    /// Epsilon sweep on a shared grid.
    Sweep,
    /// Sup/Lipschitz constants and cone positivity of the Jacobian.
    CheckH2,
    /// Randomized checks of the Orlicz-norm inequalities.
    Norms,
    /// Coupling matrices of a slip configuration.
    Dislocation,
    /// Periodic versus local dislocation model over a list of periods.
    Rescale,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::CheckH2 => "check-h2",
            Command::Norms => "norms",
            Command::Dislocation => "dislocation",
            Command::Rescale => "rescale",
        }
    }
}

/// Parses arguments, runs, reports errors on stderr and returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("diaghyp: one or more assertions failed");
            EXIT_ASSERTION
        }
        Err(e) => {
            eprintln!("diaghyp: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.resolve_seed()?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    let hash = config_hash(&cfg)?;
    let comments = vec![
        format!("diaghyp {}", cli.command.name()),
        format!("config_hash {hash}"),
        format!("config {}", serde_json::to_string(&serde_json::to_value(&cfg)?)?),
    ];
    let out = OutputDir::create(std::path::Path::new(&cfg.output_dir), comments)?;
    let job = || dispatch(cli.command, &cfg, &out, &hash);
    match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(job),
        None => job(),
    }
}

fn dispatch(cmd: Command, cfg: &RunConfig, out: &OutputDir, hash: &str) -> Result<bool> {
    let (passed, checks) = match cmd {
        Command::Solve => run_solve(cfg, out)?,
        Command::Sweep => run_sweep(cfg, out)?,
        Command::CheckH2 => run_check_h2(cfg)?,
        Command::Norms => run_norms(cfg)?,
        Command::Dislocation => run_dislocation(cfg, out)?,
        Command::Rescale => run_rescale(cfg, out)?,
    };
    let summary = json!({
        "command": cmd.name(),
        "config_hash": hash,
        "passed": passed,
        "checks": checks,
        "config": cfg,
    });
    out.json("summary.json", &summary)?;
    Ok(passed)
}

/// Rejects a fixed time step above the stability bound before any run.
fn precheck_dt(sys: &DiagonalSystem, sc: &SolverConfig) -> Result<()> {
    if let Some(dt) = sc.dt {
        let m0 = check_h1(sys, H_SAMPLES).m0;
        let mu_min = sys.mu().iter().copied().fold(f64::INFINITY, f64::min);
        let v = (m0 + KAPPA) / mu_min;
        let bound = sc.dt_bound(v, sc.epsilon / mu_min);
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {dt} exceeds the stability bound cfl/(v/dx + 2 eps/dx^2) = {bound} (v = {v}, eps = {}, dx = {}, cfl = {})",
                sc.epsilon, sc.dx, sc.cfl_safety
            )));
        }
    }
    Ok(())
}

fn verdict_ok(v: &BudgetVerdict) -> bool {
    !matches!(v, BudgetVerdict::Fail { .. })
}

fn run_solve(cfg: &RunConfig, out: &OutputDir) -> Result<(bool, Value)> {
    let sys = cfg.system.build()?;
    let u0 = cfg.initial_data()?;
    let sc = cfg.solver()?;
    precheck_dt(&sys, sc)?;
    let traj = solve(u0, &sys, sc)?;
    let diag = &cfg.diagnostics;
    let h1 = check_h1(&sys, H_SAMPLES);
    let h2 = check_h2(&sys, H_SAMPLES, DIR_SAMPLES);
    let mut passed = true;
    let mut checks = serde_json::Map::new();
    checks.insert("h2".into(), json!({ "holds": h2.holds(), "report": h2 }));
    if let Some(expect) = diag.expect_h2 {
        let ok = h2.holds() == expect;
        passed &= ok;
        checks.insert("expect_h2".into(), json!({ "passed": ok, "expected": expect }));
    }
    if diag.bounds {
        let b = verify_linf_and_mass(&traj);
        passed &= b.passed();
        checks.insert("bounds".into(), json!({ "passed": b.passed(), "report": b }));
    }
    let report = verify_entropy_budget(&traj, &sys, &h1, h2.holds());
    if diag.entropy_budget {
        let ok = verdict_ok(&report.verdict);
        passed &= ok;
        checks.insert(
            "entropy_budget".into(),
            json!({ "passed": ok, "verdict": report.verdict, "budget": report.budget, "c0": report.c0, "s0": report.s0, "sup_lhs": report.sup_lhs() }),
        );
    }
    if diag.llogl {
        let ll = llogl_uniformity(&traj, 1)?;
        let bound = llogl_bound_from_budget(&report, sys.mu());
        let within = report.verdict != BudgetVerdict::Pass || ll.sup <= bound;
        let ok = ll.bounds_hold(SLACK_TOL) && within;
        passed &= ok;
        checks.insert("llogl".into(), json!({ "passed": ok, "sup": ll.sup, "bound_from_budget": bound }));
    }
    if diag.continuity {
        let mc = modulus_of_continuity(&traj, diag.continuity_grid);
        let ok = mc.worst_ratio.is_finite();
        passed &= ok;
        checks.insert("continuity".into(), json!({ "passed": ok, "report": mc }));
    }
    let recovery = initial_recovery(&traj)?;
    checks.insert("initial_recovery".into(), json!(recovery));
    checks.insert("notes".into(), json!(traj.notes));
    checks.insert("run".into(), json!(traj.info));

    let mut buf = Vec::new();
    traj.write_csv(&mut buf, out.comments())?;
    std::fs::write(out.path("trajectory.csv"), buf)?;
    let rows: Vec<String> = (0..report.times.len())
        .map(|k| {
            format!(
                "{},{},{},{},{}",
                report.times[k], report.s[k], report.production_cum[k], report.lhs[k], report.budget_series[k]
            )
        })
        .collect();
    out.csv("entropy.csv", "t,S,production,lhs,budget", &rows)?;
    out.plot("plot.csv", &[&report])?;
    Ok((passed, Value::Object(checks)))
}

fn run_sweep(cfg: &RunConfig, out: &OutputDir) -> Result<(bool, Value)> {
    let sys = cfg.system.build()?;
    let u0 = cfg.initial_data()?;
    let sc = cfg.solver()?;
    let eps = cfg.eps_list()?;
    precheck_dt(&sys, sc)?;
    let sweep = epsilon_sweep(u0, &sys, sc, eps)?;
    let diag = &cfg.diagnostics;
    let verdict = sweep.verdict();
    let mut passed = verdict.cauchy && verdict.residual_decay;
    if diag.llogl {
        passed &= verdict.uniform_llogl;
    }
    let budgets_ok = sweep.entropy.iter().all(|r| verdict_ok(&r.verdict));
    let limit = entropy_production_limit(&sweep);
    let h2_holds = sweep.entropy.iter().all(|r| r.verdict != BudgetVerdict::NotApplicable);
    if diag.entropy_budget {
        passed &= budgets_ok && (!h2_holds || limit.holds);
    }
    let mut bounds_ok = true;
    if diag.bounds {
        bounds_ok = sweep.trajectories.iter().all(|t| verify_linf_and_mass(t).passed());
        passed &= bounds_ok;
    }
    let c2: Vec<f64> = if diag.continuity {
        sweep.trajectories.iter().map(|t| modulus_of_continuity(t, diag.continuity_grid).fitted_c2).collect()
    } else {
        Vec::new()
    };
    let c2_spread = relative_spread(&c2);
    if diag.continuity {
        passed &= c2_spread < 0.5;
    }
    let rows: Vec<String> = (0..sweep.epsilons.len())
        .map(|k| {
            let dist = if k == 0 { String::new() } else { sweep.pairwise_l1[k - 1].to_string() };
            let c2k = c2.get(k).map(|v| v.to_string()).unwrap_or_default();
            let r = &sweep.entropy[k];
            format!(
                "{},{dist},{},{},{},{},{c2k}",
                sweep.epsilons[k],
                sweep.weak_residuals[k],
                sweep.uniform_bounds[k],
                r.sup_lhs(),
                r.budget
            )
        })
        .collect();
    out.csv("sweep.csv", "epsilon,pairwise_l1,weak_residual,llogl_sup,sup_lhs,budget,fitted_c2", &rows)?;
    out.plot("plot.csv", &[&sweep])?;
    let checks = json!({
        "verdict": verdict,
        "entropy_budgets_ok": budgets_ok,
        "production_limit": limit,
        "bounds_ok": bounds_ok,
        "fitted_c2": c2,
        "fitted_c2_spread": c2_spread,
        "dx": sweep.dx,
        "pairwise_l1": sweep.pairwise_l1,
        "observed_rates": sweep.observed_rates,
        "weak_residuals": sweep.weak_residuals,
        "uniform_bounds": sweep.uniform_bounds,
    });
    Ok((passed, checks))
}

fn run_check_h2(cfg: &RunConfig) -> Result<(bool, Value)> {
    let sys = cfg.system.build()?;
    let h1 = check_h1(&sys, H_SAMPLES);
    let h2 = check_h2(&sys, H_SAMPLES, DIR_SAMPLES);
    let weighted = sys.mu().iter().any(|m| *m != 1.0);
    let effective = weighted.then(|| check_h2_effective(&sys, H_SAMPLES, DIR_SAMPLES));
    let expect = cfg.diagnostics.expect_h2.unwrap_or(true);
    let passed = h2.holds() == expect;
    Ok((passed, json!({ "h1": h1, "h2": h2, "holds": h2.holds(), "expected": expect, "effective": effective })))
}

/// Nonnegative random step-and-bump function with heights spread over six
/// decades.
fn random_function(rng: &mut ChaCha8Rng, cells: usize) -> Result<ScalarGridFunction> {
    let dx = 10f64.powf(rng.random_range(-3.0..0.0));
    let n = cells + 1;
    let mut v = vec![0.0; n];
    for _ in 0..rng.random_range(1..5) {
        let height = 10f64.powf(rng.random_range(-3.0..3.0));
        let a = rng.random_range(0..n);
        let b = rng.random_range(a..n);
        let smooth = rng.random_bool(0.5);
        for (j, x) in v.iter_mut().enumerate().take(b + 1).skip(a) {
            let s = if smooth && b > a { (std::f64::consts::PI * (j - a) as f64 / (b - a) as f64).sin() } else { 1.0 };
            *x += height * s.max(0.0);
        }
    }
    ScalarGridFunction::new(v, dx, 0.0)
}

fn run_norms(cfg: &RunConfig) -> Result<(bool, Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let NormsSpec { samples, cells } = cfg.norms;
    let (mut min_entropy_slack, mut min_norm_slack, mut min_holder_slack) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..samples {
        let h = random_function(&mut rng, cells)?;
        let g = random_function(&mut rng, cells)?;
        let g = ScalarGridFunction::new(g.samples().to_vec(), h.dx(), h.x0())?;
        let b = check_llogl_bounds(&h)?;
        min_entropy_slack = min_entropy_slack.min(b.slack_entropy_upper);
        min_norm_slack = min_norm_slack.min(b.slack_norm_upper);
        min_holder_slack = min_holder_slack.min(check_holder(&h, &g)?.slack);
    }
    let passed = min_entropy_slack >= -SLACK_TOL && min_norm_slack >= -SLACK_TOL && min_holder_slack >= -SLACK_TOL;
    Ok((
        passed,
        json!({
            "samples": samples,
            "seed": cfg.seed,
            "min_slack_entropy_upper": min_entropy_slack,
            "min_slack_norm_upper": min_norm_slack,
            "min_slack_holder": min_holder_slack,
        }),
    ))
}

fn matrix_rows(name: &str, m: &nalgebra::DMatrix<f64>, rows: &mut Vec<String>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            rows.push(format!("{name},{i},{j},{}", m[(i, j)]));
        }
    }
}

fn run_dislocation(cfg: &RunConfig, out: &OutputDir) -> Result<(bool, Value)> {
    let coupling = cfg.system.coupling()?;
    let structure = check_structure(&coupling);
    let sys = build_1d_nonperiodic(&coupling, None)?;
    let h2 = check_h2(&sys, H_SAMPLES, DIR_SAMPLES);
    let h2_eff = check_h2_effective(&sys, H_SAMPLES, DIR_SAMPLES);
    let mut rows = Vec::new();
    matrix_rows("A", &coupling.a, &mut rows);
    matrix_rows("Q", &coupling.q, &mut rows);
    for (i, m) in coupling.mu.iter().enumerate() {
        rows.push(format!("mu,{i},{i},{m}"));
    }
    out.csv("coupling.csv", "matrix,i,j,value", &rows)?;
    let passed = structure.holds() && h2.holds();
    Ok((passed, json!({ "structure": structure, "structure_holds": structure.holds(), "h2": h2, "h2_effective": h2_eff })))
}

fn run_rescale(cfg: &RunConfig, out: &OutputDir) -> Result<(bool, Value)> {
    let coupling = cfg.system.coupling()?;
    let u0 = cfg.initial_data()?;
    let sc = cfg.solver()?;
    let deltas = cfg.delta_list()?;
    let report = rescale_experiment(&coupling, u0, sc, deltas)?;
    let rows: Vec<String> = (0..report.deltas.len())
        .map(|k| {
            format!(
                "{},{},{},{},{}",
                report.deltas[k], report.periods[k], report.gaps[k], report.nonlocal_max[k], report.nonlocal_initial[k]
            )
        })
        .collect();
    out.csv("rescale.csv", "delta,period,gap,nonlocal_max,nonlocal_initial", &rows)?;
    let gaps = Series { name: "gap".into(), points: report.deltas.iter().copied().zip(report.gaps.iter().copied()).collect() };
    out.plot("plot.csv", &[&gaps])?;
    let densities_ok = report.min_density >= -1e-12;
    let passed = report.gaps_decreasing() && densities_ok;
    Ok((passed, json!({ "report": report, "gaps_decreasing": report.gaps_decreasing(), "densities_ok": densities_ok })))
}
