//! Diagonal hyperbolic systems `u^i_t + lambda^i(u) u^i_x = 0` and numerical
//! checks of the Lipschitz and positive-cone hypotheses on their velocities.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance under which a negative positive-cone minimum is treated as zero.
pub const H2_TOL: f64 = 1e-12;

/// A velocity map `lambda: U -> R^d`.
pub trait VelocityField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn eval(&self, u: &[f64], out: &mut [f64]);

    /// Writes the row-major Jacobian `d lambda^i / d u^j` into `out`.
    /// Returns `false` when no analytic form is available.
    fn jacobian(&self, _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl StateBox {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::InvalidInput("box bounds must have equal, nonzero length".into()));
        }
        for (i, (a, b)) in alpha.iter().zip(&beta).enumerate() {
            if !(a <= b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidInput(format!("box component {i}: need alpha <= beta, got [{a}, {b}]")));
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        Self { alpha: vec![lo; d], beta: vec![hi; d] }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.iter().zip(self.alpha.iter().zip(&self.beta)).all(|(v, (a, b))| *v >= a - tol && *v <= b + tol)
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(self.alpha.iter().zip(&self.beta)).map(|(t, (a, b))| a + t * (b - a)).collect()
    }

    /// Deterministic sample set: all `2^d` corners followed by the first
    /// `n` Halton points. Prefixes are nested, so maxima over the set are
    /// nondecreasing in `n`.
    pub fn samples(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut pts = Vec::with_capacity((1 << d) + n);
        for mask in 0..(1usize << d) {
            let s: Vec<f64> = (0..d).map(|k| ((mask >> k) & 1) as f64).collect();
            pts.push(self.from_unit(&s));
        }
        for k in 1..=n {
            let s: Vec<f64> = (0..d).map(|i| radical_inverse(k as u64, PRIMES[i % PRIMES.len()])).collect();
            pts.push(self.from_unit(&s));
        }
        pts
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += (k % base) as f64 * f;
        k /= base;
        f *= inv;
    }
    r
}

/// Scalar Burgers: `lambda(u) = u`.
#[derive(Debug, Clone, Copy)]
pub struct Burgers;

impl VelocityField for Burgers {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn jacobian(&self, _u: &[f64], out: &mut [f64]) -> bool {
        out[0] = 1.0;
        true
    }
}

/// Crossing-eigenvalue pair `lambda = (cos u2, u1 sin u2)`.
#[derive(Debug, Clone, Copy)]
pub struct Crossing;

impl VelocityField for Crossing {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let (s, c) = u[1].sin_cos();
        out[0] = c;
        out[1] = u[0] * s;
    }
    fn jacobian(&self, u: &[f64], out: &mut [f64]) -> bool {
        let (s, c) = u[1].sin_cos();
        out[0] = 0.0;
        out[1] = -s;
        out[2] = s;
        out[3] = u[0] * c;
        true
    }
}

/// `lambda(u) = A u`.
#[derive(Debug, Clone)]
pub struct Linear {
    a: DMatrix<f64>,
}

impl Linear {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidInput("linear velocity needs a nonempty square matrix".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("linear velocity matrix has non-finite entries".into()));
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl VelocityField for Linear {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let d = self.a.nrows();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = 0.0;
            for (j, uj) in u.iter().enumerate().take(d) {
                acc += self.a[(i, j)] * uj;
            }
            *o = acc;
        }
    }
    fn jacobian(&self, _u: &[f64], out: &mut [f64]) -> bool {
        let d = self.a.nrows();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.a[(i, j)];
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Polynomial velocities given as coefficient tables, one list of monomials
/// per component.
#[derive(Debug, Clone)]
pub struct Polynomial {
    components: Vec<Vec<Monomial>>,
}

impl Polynomial {
    pub fn new(components: Vec<Vec<Monomial>>) -> Result<Self> {
        let d = components.len();
        if d == 0 {
            return Err(Error::InvalidInput("polynomial velocity needs at least one component".into()));
        }
        for (i, terms) in components.iter().enumerate() {
            for m in terms {
                if m.powers.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "component {i}: monomial has {} powers, expected {d}",
                        m.powers.len()
                    )));
                }
                if !m.coeff.is_finite() {
                    return Err(Error::InvalidInput(format!("component {i}: non-finite coefficient")));
                }
            }
        }
        Ok(Self { components })
    }
}

fn monomial_value(m: &Monomial, u: &[f64]) -> f64 {
    m.powers.iter().zip(u).fold(m.coeff, |acc, (p, v)| acc * v.powi(*p as i32))
}

impl VelocityField for Polynomial {
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn eval(&self, u: &[f64], out: &mut [f64]) {
        for (o, terms) in out.iter_mut().zip(&self.components) {
            *o = terms.iter().map(|m| monomial_value(m, u)).sum();
        }
    }
    fn jacobian(&self, u: &[f64], out: &mut [f64]) -> bool {
        let d = self.components.len();
        for (i, terms) in self.components.iter().enumerate() {
            for j in 0..d {
                let mut acc = 0.0;
                for m in terms {
                    let p = m.powers[j];
                    if p == 0 {
                        continue;
                    }
                    let mut t = m.coeff * p as f64 * u[j].powi(p as i32 - 1);
                    for (k, (q, v)) in m.powers.iter().zip(u).enumerate() {
                        if k != j {
                            t *= v.powi(*q as i32);
                        }
                    }
                    acc += t;
                }
                out[i * d + j] = acc;
            }
        }
        true
    }
}

/// A velocity map together with its state box and time-derivative weights
/// `mu^i` (the equations read `mu^i u^i_t + lambda^i(u) u^i_x = eps u^i_xx`).
#[derive(Clone)]
pub struct DiagonalSystem {
    name: String,
    field: Arc<dyn VelocityField>,
    state_box: StateBox,
    mu: Vec<f64>,
}

impl fmt::Debug for DiagonalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiagonalSystem")
            .field("name", &self.name)
            .field("state_box", &self.state_box)
            .field("mu", &self.mu)
            .finish()
    }
}

impl DiagonalSystem {
    pub fn new(
        name: impl Into<String>,
        field: Arc<dyn VelocityField>,
        state_box: StateBox,
        mu: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = field.dim();
        if state_box.dim() != d {
            return Err(Error::InvalidInput(format!("box has dimension {}, velocity has {d}", state_box.dim())));
        }
        let mu = mu.unwrap_or_else(|| vec![1.0; d]);
        if mu.len() != d || mu.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput("weights mu must be positive, one per component".into()));
        }
        Ok(Self { name: name.into(), field, state_box, mu })
    }

    pub fn burgers() -> Self {
        Self::new("burgers", Arc::new(Burgers), StateBox::cube(1, -1.0, 1.0), None).expect("valid builtin")
    }

    /// Crossing system on `[1,2] x [-pi/2, pi/2]`.
    pub fn crossing() -> Self {
        let b = StateBox { alpha: vec![1.0, -std::f64::consts::FRAC_PI_2], beta: vec![2.0, std::f64::consts::FRAC_PI_2] };
        Self::new("crossing", Arc::new(Crossing), b, None).expect("valid builtin")
    }

    /// `lambda(u) = A u`; default box `[-1, 1]^d`.
    pub fn linear(a: DMatrix<f64>, state_box: Option<StateBox>) -> Result<Self> {
        let d = a.nrows();
        let b = state_box.unwrap_or_else(|| StateBox::cube(d, -1.0, 1.0));
        Self::new("linear", Arc::new(Linear::new(a)?), b, None)
    }

    /// Non-periodic dislocation model `mu^i u^i_t + (A u)^i u^i_x = 0`.
    pub fn dislocation(a: DMatrix<f64>, mu: Vec<f64>, state_box: Option<StateBox>) -> Result<Self> {
        let d = a.nrows();
        let b = state_box.unwrap_or_else(|| StateBox::cube(d, -1.0, 1.0));
        Self::new("dislocation", Arc::new(Linear::new(a)?), b, Some(mu))
    }

    pub fn polynomial(components: Vec<Vec<Monomial>>, state_box: StateBox) -> Result<Self> {
        Self::new("polynomial", Arc::new(Polynomial::new(components)?), state_box, None)
    }

    /// Constant velocities, i.e. uncoupled linear advection.
    pub fn constant_advection(speeds: &[f64], state_box: Option<StateBox>) -> Result<Self> {
        let d = speeds.len();
        let comps = speeds.iter().map(|&c| vec![Monomial { coeff: c, powers: vec![0; d] }]).collect();
        let b = state_box.unwrap_or_else(|| StateBox::cube(d, -1.0, 1.0));
        Self::new("advection", Arc::new(Polynomial::new(comps)?), b, None)
    }

    pub fn with_box(mut self, state_box: StateBox) -> Result<Self> {
        if state_box.dim() != self.dim() {
            return Err(Error::InvalidInput("box dimension mismatch".into()));
        }
        self.state_box = state_box;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        let d = self.dim();
        let mut buf = vec![0.0; d * d];
        let u = self.state_box.from_unit(&vec![0.5; d]);
        self.field.jacobian(&u, &mut buf)
    }

    #[inline]
    pub fn velocity(&self, u: &[f64], out: &mut [f64]) {
        self.field.eval(u, out);
    }

    /// Row-major Jacobian into `out`; falls back to finite differences.
    pub fn jacobian_into(&self, u: &[f64], out: &mut [f64]) {
        if !self.field.jacobian(u, out) {
            let fd = jacobian_fd(self, u, FD_STEP);
            out.copy_from_slice(fd.matrix.transpose().as_slice());
        }
    }

    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut buf = vec![0.0; d * d];
        self.jacobian_into(u, &mut buf);
        DMatrix::from_row_slice(d, d, &buf)
    }

    /// Jacobian of the effective velocities `lambda^i / mu^i`.
    pub fn effective_jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let mut j = self.jacobian(u);
        for (i, m) in self.mu.iter().enumerate() {
            j.row_mut(i).scale_mut(1.0 / m);
        }
        j
    }
}

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FdJacobian {
    pub matrix: DMatrix<f64>,
    /// Set when at least one column used a one-sided difference.
    pub one_sided: bool,
}

/// Centered-difference Jacobian; falls back to one-sided differences in the
/// directions where `u` is within `step` of the box boundary.
pub fn jacobian_fd(sys: &DiagonalSystem, u: &[f64], step: f64) -> FdJacobian {
    let d = sys.dim();
    let b = sys.state_box();
    let mut m = DMatrix::zeros(d, d);
    let mut one_sided = false;
    let mut up = u.to_vec();
    let mut lp = vec![0.0; d];
    let mut lm = vec![0.0; d];
    for j in 0..d {
        let room_hi = u[j] + step <= b.beta[j];
        let room_lo = u[j] - step >= b.alpha[j];
        let (hp, hm) = match (room_lo, room_hi) {
            (true, true) => (step, step),
            (false, true) => {
                one_sided = true;
                (step, 0.0)
            }
            (true, false) => {
                one_sided = true;
                (0.0, step)
            }
            (false, false) => (step, step),
        };
        up[j] = u[j] + hp;
        sys.velocity(&up, &mut lp);
        up[j] = u[j] - hm;
        sys.velocity(&up, &mut lm);
        up[j] = u[j];
        for i in 0..d {
            m[(i, j)] = (lp[i] - lm[i]) / (hp + hm);
        }
    }
    FdJacobian { matrix: m, one_sided }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H1Constants {
    pub m0: f64,
    pub m1: f64,
    pub samples_used: usize,
}

/// Sampled sup bound `M0` and Lipschitz bound `M1` (max Jacobian row sum,
/// matching the l1 vector norm).
pub fn check_h1(sys: &DiagonalSystem, n_samples: usize) -> H1Constants {
    let d = sys.dim();
    let pts = sys.state_box().samples(n_samples);
    let mut lam = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let (mut m0, mut m1) = (0.0f64, 0.0f64);
    for u in &pts {
        sys.velocity(u, &mut lam);
        m0 = lam.iter().fold(m0, |m, v| m.max(v.abs()));
        sys.jacobian_into(u, &mut jac);
        for row in jac.chunks(d) {
            m1 = m1.max(row.iter().map(|v| v.abs()).sum());
        }
    }
    H1Constants { m0, m1, samples_used: pts.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub m0: f64,
    pub m1: f64,
    /// Minimum of `xi^T J(u) xi` over sampled `u` and `xi` on the unit simplex.
    pub h2_min: f64,
    pub h2_witness_u: Vec<f64>,
    pub h2_witness_xi: Vec<f64>,
    pub samples_used: usize,
    /// True when the direction minimization is exact (d <= 2); otherwise the
    /// report is a sampled falsifier, not a certificate.
    pub exact: bool,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.h2_min >= -H2_TOL
    }
}

/// Exact copositivity test for a symmetric 2x2 matrix.
pub fn copositive_2x2(s11: f64, s12: f64, s22: f64) -> bool {
    s11 >= 0.0 && s22 >= 0.0 && s12 + (s11 * s22).sqrt() >= 0.0
}

/// Exact minimum of `xi^T J xi` over `xi = (t, 1 - t)`, `t in [0, 1]`.
pub fn simplex_min_2x2(j: &[f64]) -> (f64, [f64; 2]) {
    let (s11, s12, s22) = (j[0], 0.5 * (j[1] + j[2]), j[3]);
    let q = |t: f64| s11 * t * t + 2.0 * s12 * t * (1.0 - t) + s22 * (1.0 - t) * (1.0 - t);
    let mut best = (q(0.0), [0.0, 1.0]);
    let at_one = q(1.0);
    if at_one < best.0 {
        best = (at_one, [1.0, 0.0]);
    }
    let a = s11 - 2.0 * s12 + s22;
    if a > 0.0 {
        let t = (s22 - s12) / a;
        if t > 0.0 && t < 1.0 {
            let v = q(t);
            if v < best.0 {
                best = (v, [t, 1.0 - t]);
            }
        }
    }
    best
}

/// Minimum of `xi^T J xi` over a regular simplex grid with at least
/// `n_dir` directions.
pub fn simplex_min_sampled(j: &[f64], d: usize, n_dir: usize) -> (f64, Vec<f64>) {
    let m = simplex_resolution(d, n_dir.max(1));
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let mut k = vec![0usize; d];
    let mut xi = vec![0.0; d];
    compositions(&mut k, 0, m, &mut |k| {
        for (x, ki) in xi.iter_mut().zip(k) {
            *x = *ki as f64 / m as f64;
        }
        let mut q = 0.0;
        for a in 0..d {
            for b in 0..d {
                q += xi[a] * xi[b] * j[a * d + b];
            }
        }
        if q < best.0 {
            best = (q, xi.clone());
        }
    });
    best
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn simplex_resolution(d: usize, n_dir: usize) -> usize {
    if d == 1 {
        return 1;
    }
    let mut m = 1;
    while binomial(m + d - 1, d - 1) < n_dir as f64 {
        m += 1;
    }
    m
}

fn compositions(k: &mut [usize], pos: usize, remaining: usize, visit: &mut dyn FnMut(&[usize])) {
    if pos == k.len() - 1 {
        k[pos] = remaining;
        visit(k);
        return;
    }
    for v in 0..=remaining {
        k[pos] = v;
        compositions(k, pos + 1, remaining - v, visit);
    }
}

fn positive_cone_min(sys: &DiagonalSystem, jac: &[f64], n_dir: usize) -> (f64, Vec<f64>) {
    match sys.dim() {
        1 => (jac[0], vec![1.0]),
        2 => {
            let (v, xi) = simplex_min_2x2(jac);
            (v, xi.to_vec())
        }
        d => simplex_min_sampled(jac, d, n_dir),
    }
}

/// Positive-cone test of the velocity Jacobian over sampled states.
pub fn check_h2(sys: &DiagonalSystem, n_state_samples: usize, n_dir_samples: usize) -> HypothesisReport {
    check_h2_with(sys, n_state_samples, n_dir_samples, |u, out| sys.jacobian_into(u, out))
}

/// Same test on the Jacobian of `lambda^i / mu^i`, i.e. the unweighted
/// entropy. Coincides with [`check_h2`] when all `mu^i = 1`.
pub fn check_h2_effective(sys: &DiagonalSystem, n_state_samples: usize, n_dir_samples: usize) -> HypothesisReport {
    let d = sys.dim();
    check_h2_with(sys, n_state_samples, n_dir_samples, |u, out| {
        sys.jacobian_into(u, out);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] /= sys.mu()[i];
            }
        }
    })
}

fn check_h2_with(
    sys: &DiagonalSystem,
    n_state_samples: usize,
    n_dir_samples: usize,
    jac_of: impl Fn(&[f64], &mut [f64]),
) -> HypothesisReport {
    let d = sys.dim();
    let h1 = check_h1(sys, n_state_samples.max(1));
    let pts = sys.state_box().samples(n_state_samples.max(1));
    let mut jac = vec![0.0; d * d];
    let mut best = (f64::INFINITY, Vec::new(), Vec::new());
    for u in &pts {
        jac_of(u, &mut jac);
        let (v, xi) = positive_cone_min(sys, &jac, n_dir_samples);
        if v < best.0 {
            best = (v, u.clone(), xi);
        }
    }
    HypothesisReport {
        m0: h1.m0,
        m1: h1.m1,
        h2_min: best.0,
        h2_witness_u: best.1,
        h2_witness_xi: best.2,
        samples_used: pts.len(),
        exact: d <= 2,
    }
}

/// Parameter-free builtin systems by name.
pub fn builtin(name: &str) -> Result<DiagonalSystem> {
    match name {
        "burgers" => Ok(DiagonalSystem::burgers()),
        "crossing" => Ok(DiagonalSystem::crossing()),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}
