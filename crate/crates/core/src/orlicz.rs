//! Zygmund-space numerics on grid functions.
//!
//! Provides the gradient-entropy density `f`, its companion `g`, and Luxemburg
//! norms for `L log L` and `EXP`. All integrals use [`crate::grid::trapezoid`]
//! with the grid function taken to vanish outside its grid. Because the
//! trapezoid weights are positive, every inequality below is an inequality for
//! a discrete measure and holds exactly up to root-finding tolerance.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarGridFunction;

pub const INV_E: f64 = 1.0 / E;

/// Relative stopping tolerance of the Luxemburg root finder.
pub const NORM_REL_TOL: f64 = 1e-10;
/// Iteration cap shared by bracket expansion and bisection.
pub const NORM_MAX_ITER: usize = 400;

/// `f(x) = x ln x + 1/e` for `x >= 1/e`, zero below.
pub fn entropy_f(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidInput(format!("entropy_f needs x >= 0, got {x}")));
    }
    Ok(entropy_f_clamped(x))
}

/// `g(x) = x - 1/e` for `x >= 1/e`, zero below.
pub fn entropy_g(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidInput(format!("entropy_g needs x >= 0, got {x}")));
    }
    Ok(if x >= INV_E { x - INV_E } else { 0.0 })
}

/// `f` extended by zero to negative arguments; used on discrete gradients that
/// may carry rounding-level negative values.
#[inline]
pub fn entropy_f_clamped(x: f64) -> f64 {
    if x >= INV_E {
        // Clamp the cancellation at the branch point to keep f >= 0.
        (x * x.ln() + INV_E).max(0.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl NormResult {
    fn zero() -> Self {
        Self { value: 0.0, converged: true, iterations: 0 }
    }
}

/// Root of a strictly decreasing function on `(0, inf)` given a starting
/// bracket; the bracket is widened geometrically until it straddles the root.
fn decreasing_root(phi: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<NormResult> {
    let mut iterations = 0;
    while phi(lo) < 0.0 {
        lo *= 0.5;
        iterations += 1;
        if iterations > NORM_MAX_ITER || lo == 0.0 {
            return Err(Error::NonConvergence { iterations, lo, hi });
        }
    }
    while phi(hi) > 0.0 {
        hi *= 2.0;
        iterations += 1;
        if iterations > NORM_MAX_ITER || !hi.is_finite() {
            return Err(Error::NonConvergence { iterations, lo, hi });
        }
    }
    while hi - lo > NORM_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > NORM_MAX_ITER {
            return Err(Error::NonConvergence { iterations, lo, hi });
        }
    }
    Ok(NormResult { value: 0.5 * (lo + hi), converged: true, iterations })
}

/// `Phi(mu) = int (|h|/mu) ln(e + |h|/mu) - 1`, decreasing in `mu`.
pub fn llogl_modular(h: &ScalarGridFunction, mu: f64) -> f64 {
    h.integral_of(|v| {
        let s = v.abs() / mu;
        s * (E + s).ln()
    }) - 1.0
}

/// `Psi(lambda) = int (exp(|h|/lambda) - 1) - 1`, decreasing in `lambda`.
pub fn exp_modular(h: &ScalarGridFunction, lambda: f64) -> f64 {
    h.integral_of(|v| (v.abs() / lambda).exp_m1()) - 1.0
}

/// Luxemburg norm of `L log L`.
pub fn norm_llogl(h: &ScalarGridFunction) -> Result<NormResult> {
    let l1 = h.l1_norm();
    if l1 == 0.0 {
        return Ok(NormResult::zero());
    }
    let max = h.sup_norm();
    let lo = l1 / (1.0 + (E + max).ln());
    let hi = l1 * (1.0 + max);
    decreasing_root(|mu| llogl_modular(h, mu), lo, hi.max(lo))
}

/// Luxemburg norm of `EXP`.
pub fn norm_exp(h: &ScalarGridFunction) -> Result<NormResult> {
    let l1 = h.l1_norm();
    if l1 == 0.0 {
        return Ok(NormResult::zero());
    }
    // exp(s) - 1 >= s, so at lambda = |h|_1 the modular is already >= 0.
    decreasing_root(|lam| exp_modular(h, lam), l1, 2.0 * l1.max(h.sup_norm()))
}

/// Both sides of the entropy / `L log L` norm comparisons for `h >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlogLBounds {
    pub entropy_integral: f64,
    pub llogl_norm: f64,
    pub l1_norm: f64,
    /// `1 + |h|_LlogL + |h|_1 ln(1 + |h|_LlogL) - int f(h)`
    pub slack_entropy_upper: f64,
    /// `1 + int f(h) + ln(1 + e^2)|h|_1 - |h|_LlogL`
    pub slack_norm_upper: f64,
}

impl LlogLBounds {
    pub fn holds(&self, tol: f64) -> bool {
        self.slack_entropy_upper >= -tol && self.slack_norm_upper >= -tol
    }
}

pub fn check_llogl_bounds(h: &ScalarGridFunction) -> Result<LlogLBounds> {
    if let Some(v) = h.samples().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidInput(format!("check_llogl_bounds needs h >= 0, found {v}")));
    }
    let entropy_integral = h.integral_of(entropy_f_clamped);
    let llogl_norm = norm_llogl(h)?.value;
    let l1_norm = h.l1_norm();
    let slack_entropy_upper = 1.0 + llogl_norm + l1_norm * (1.0 + llogl_norm).ln() - entropy_integral;
    let slack_norm_upper = 1.0 + entropy_integral + (1.0 + E * E).ln() * l1_norm - llogl_norm;
    Ok(LlogLBounds { entropy_integral, llogl_norm, l1_norm, slack_entropy_upper, slack_norm_upper })
}

/// Terms of the generalized Holder inequality `|hg|_1 <= 2 |h|_EXP |g|_LlogL`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub product_l1: f64,
    pub exp_norm: f64,
    pub llogl_norm: f64,
    pub slack: f64,
}

impl HolderReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

pub fn check_holder(h: &ScalarGridFunction, g: &ScalarGridFunction) -> Result<HolderReport> {
    let product_l1 = h.product(g)?.l1_norm();
    let exp_norm = norm_exp(h)?.value;
    let llogl_norm = norm_llogl(g)?.value;
    Ok(HolderReport { product_l1, exp_norm, llogl_norm, slack: 2.0 * exp_norm * llogl_norm - product_l1 })
}
