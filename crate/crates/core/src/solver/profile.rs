//! Monotone initial profiles and the mollifier.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};

/// Unnormalized bump `exp(-1 / (1 - x^2))` on `(-1, 1)`.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

const CDF_NODES: usize = 4097;

/// Cumulative distribution of the normalized bump, tabulated on `[-1, 1]`.
static BUMP_CDF: LazyLock<Vec<f64>> = LazyLock::new(|| {
    let h = 2.0 / (CDF_NODES - 1) as f64;
    let mut cdf = vec![0.0; CDF_NODES];
    for k in 1..CDF_NODES {
        let a = -1.0 + (k - 1) as f64 * h;
        cdf[k] = cdf[k - 1] + 0.5 * h * (bump(a) + bump(a + h));
    }
    let total = cdf[CDF_NODES - 1];
    for v in &mut cdf {
        *v /= total;
    }
    cdf[CDF_NODES - 1] = 1.0;
    cdf
});

/// Monotone smooth step from 0 to 1 on `[-1, 1]` (the integrated bump).
pub fn bump_cdf(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let r = (s + 1.0) * 0.5 * (CDF_NODES - 1) as f64;
    let k = (r.floor() as usize).min(CDF_NODES - 2);
    let f = r - k as f64;
    let t = &*BUMP_CDF;
    t[k] + f * (t[k + 1] - t[k])
}

/// One nondecreasing scalar profile, constant outside a compact core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `tanh((x - center)/width)` rescaled so it reaches `left`/`right`
    /// exactly at `center -/+ radius`.
    Tanh { left: f64, right: f64, center: f64, width: f64, radius: f64 },
    /// A step smoothed by the bump of half-width `width`.
    StepMollified { left: f64, right: f64, center: f64, width: f64 },
    /// Linear interpolation of `(x, y)` nodes, constant outside.
    PiecewiseLinear { points: Vec<[f64; 2]> },
    /// Discontinuous jump at `at`.
    Step { left: f64, right: f64, at: f64 },
    Constant { value: f64 },
}

impl Profile {
    pub fn tanh(left: f64, right: f64, center: f64, width: f64, radius: f64) -> Self {
        Profile::Tanh { left, right, center, width, radius }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        match self {
            Profile::Tanh { left, right, width, radius, .. } => {
                if !(left <= right) {
                    return bad(format!("tanh profile must be nondecreasing: left {left} > right {right}"));
                }
                if !(*width > 0.0) || !(*radius > 0.0) {
                    return bad("tanh profile needs width > 0 and radius > 0".into());
                }
            }
            Profile::StepMollified { left, right, width, .. } => {
                if !(left <= right) {
                    return bad(format!("step profile must be nondecreasing: left {left} > right {right}"));
                }
                if !(*width > 0.0) {
                    return bad("mollified step needs width > 0".into());
                }
            }
            Profile::PiecewiseLinear { points } => {
                if points.is_empty() {
                    return bad("piecewise-linear profile needs at least one node".into());
                }
                for w in points.windows(2) {
                    if !(w[1][0] > w[0][0]) || w[1][1] < w[0][1] {
                        return bad("piecewise-linear nodes need increasing x and nondecreasing y".into());
                    }
                }
            }
            Profile::Step { left, right, .. } => {
                if !(left <= right) {
                    return bad(format!("step must be nondecreasing: left {left} > right {right}"));
                }
            }
            Profile::Constant { .. } => {}
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Tanh { left, right, center, width, radius } => {
                let mid = 0.5 * (left + right);
                let half = 0.5 * (right - left);
                let s = ((x - center) / width).tanh() / (radius / width).tanh();
                mid + half * s.clamp(-1.0, 1.0)
            }
            Profile::StepMollified { left, right, center, width } => {
                left + (right - left) * bump_cdf((x - center) / width)
            }
            Profile::PiecewiseLinear { ref points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if x <= first[0] {
                    return first[1];
                }
                if x >= last[0] {
                    return last[1];
                }
                let k = points.partition_point(|p| p[0] <= x) - 1;
                let (a, b) = (points[k], points[k + 1]);
                a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
            }
            Profile::Step { left, right, at } => {
                if x < at {
                    left
                } else {
                    right
                }
            }
            Profile::Constant { value } => value,
        }
    }

    pub fn left_value(&self) -> f64 {
        match self {
            Profile::Tanh { left, .. } | Profile::StepMollified { left, .. } | Profile::Step { left, .. } => *left,
            Profile::PiecewiseLinear { points } => points[0][1],
            Profile::Constant { value } => *value,
        }
    }

    pub fn right_value(&self) -> f64 {
        match self {
            Profile::Tanh { right, .. } | Profile::StepMollified { right, .. } | Profile::Step { right, .. } => *right,
            Profile::PiecewiseLinear { points } => points[points.len() - 1][1],
            Profile::Constant { value } => *value,
        }
    }

    /// Interval outside of which the profile is constant.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Tanh { center, radius, .. } => Some((center - radius, center + radius)),
            Profile::StepMollified { center, width, .. } => Some((center - width, center + width)),
            Profile::PiecewiseLinear { ref points } => Some((points[0][0], points[points.len() - 1][0])),
            Profile::Step { at, .. } => Some((at, at)),
            Profile::Constant { .. } => None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.left_value().abs().max(self.right_value().abs())
    }
}

/// Componentwise initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub profiles: Vec<Profile>,
}

impl InitialData {
    pub fn new(profiles: Vec<Profile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::InvalidInput("initial data needs at least one component".into()));
        }
        for p in &profiles {
            p.validate()?;
        }
        Ok(Self { profiles })
    }

    pub fn constant(values: &[f64]) -> Self {
        Self { profiles: values.iter().map(|&value| Profile::Constant { value }).collect() }
    }

    pub fn d(&self) -> usize {
        self.profiles.len()
    }

    /// Smallest interval containing every profile's non-constant part.
    pub fn core(&self) -> (f64, f64) {
        self.profiles
            .iter()
            .filter_map(Profile::support)
            .fold(None, |acc: Option<(f64, f64)>, (a, b)| match acc {
                None => Some((a, b)),
                Some((lo, hi)) => Some((lo.min(a), hi.max(b))),
            })
            .unwrap_or((0.0, 0.0))
    }

    pub fn sup_norms(&self) -> Vec<f64> {
        self.profiles.iter().map(Profile::sup_norm).collect()
    }

    pub fn eval(&self, x: f64, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.profiles) {
            *o = p.eval(x);
        }
    }
}

/// Normalized discrete bump weights `w_k`, `k = -K..=K`, for half-width
/// `width` on spacing `dx`. Empty when the bump is narrower than a cell.
pub fn mollifier_weights(width: f64, dx: f64) -> Vec<f64> {
    let k_max = (width / dx).floor() as usize;
    if k_max == 0 {
        return Vec::new();
    }
    let mut w: Vec<f64> = (-(k_max as isize)..=k_max as isize).map(|k| bump(k as f64 * dx / width)).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Discrete convolution of each scalar function with the bump mollifier.
/// `funcs[i]` is evaluated off-grid, so the result is exact in flat regions.
pub fn mollify_fns(funcs: &[&dyn Fn(f64) -> f64], width: f64, grid: UniformGrid) -> Result<GridFunction> {
    if !(width >= 0.0) {
        return Err(Error::InvalidInput(format!("mollifier width must be >= 0, got {width}")));
    }
    let weights = mollifier_weights(width, grid.dx);
    if weights.len() > grid.n {
        return Err(Error::MollifierTooWide { support: weights.len(), n: grid.n });
    }
    let k_max = weights.len() / 2;
    let data = funcs
        .iter()
        .map(|f| {
            (0..grid.n)
                .map(|j| {
                    let x = grid.x(j);
                    let center = f(x);
                    let mut acc = 0.0;
                    for (m, w) in weights.iter().enumerate() {
                        let offset = (m as f64 - k_max as f64) * grid.dx;
                        acc += w * (f(x + offset) - center);
                    }
                    center + acc
                })
                .collect()
        })
        .collect();
    GridFunction::new(data, grid.dx, grid.x0)
}

/// Mollified initial data on `grid`; `width = 0` is plain sampling.
pub fn mollify(u0: &InitialData, width: f64, grid: UniformGrid) -> Result<GridFunction> {
    let closures: Vec<Box<dyn Fn(f64) -> f64 + '_>> =
        u0.profiles.iter().map(|p| Box::new(move |x| p.eval(x)) as Box<dyn Fn(f64) -> f64>).collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = closures.iter().map(|b| b.as_ref()).collect();
    mollify_fns(&refs, width, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> UniformGrid {
        UniformGrid { n, dx: 0.01, x0: -(n as f64 - 1.0) * 0.005 }
    }

    #[test]
    fn tanh_profile_hits_limits_at_radius() {
        let p = Profile::tanh(-1.0, 1.0, 0.0, 1.0, 2.0);
        assert_eq!(p.eval(-2.0), -1.0);
        assert_eq!(p.eval(5.0), 1.0);
        assert!((p.eval(0.5) - 0.5f64.tanh() / 2f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn bump_cdf_is_monotone_and_normalized() {
        let mut prev = 0.0;
        for k in 0..=2000 {
            let v = bump_cdf(-1.2 + 2.4 * k as f64 / 2000.0);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(bump_cdf(1.0), 1.0);
        assert!((bump_cdf(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_is_preserved_exactly() {
        let u0 = InitialData::constant(&[0.3, -7.25]);
        let g = mollify(&u0, 0.1, grid(201)).unwrap();
        assert!(g.component(0).iter().all(|v| *v == 0.3));
        assert!(g.component(1).iter().all(|v| *v == -7.25));
    }

    #[test]
    fn mollified_tanh_is_monotone() {
        let u0 = InitialData::new(vec![Profile::tanh(-1.0, 2.0, 0.1, 0.3, 1.0)]).unwrap();
        let g = mollify(&u0, 0.2, grid(401)).unwrap();
        assert!(g.min_forward_difference() >= -1e-15);
    }

    #[test]
    fn mollified_step_is_bounded_by_data() {
        let u0 = InitialData::new(vec![Profile::Step { left: -0.5, right: 1.5, at: 0.0 }]).unwrap();
        for width in [0.01, 0.05, 0.3] {
            let g = mollify(&u0, width, grid(401)).unwrap();
            assert!(g.sup_norm(0) <= 1.5 + 1e-15);
            assert!(g.component(0).iter().all(|v| *v >= -0.5 - 1e-15));
            assert!(g.min_forward_difference() >= -1e-15);
        }
    }

    #[test]
    fn zero_width_is_sampling() {
        let u0 = InitialData::new(vec![Profile::tanh(0.0, 1.0, 0.0, 0.5, 1.0)]).unwrap();
        let g = mollify(&u0, 0.0, grid(11)).unwrap();
        for j in 0..11 {
            assert_eq!(g.component(0)[j], u0.profiles[0].eval(g.x(j)));
        }
    }

    #[test]
    fn too_wide_mollifier_rejected() {
        let u0 = InitialData::constant(&[1.0]);
        assert!(matches!(mollify(&u0, 1.0, grid(21)), Err(Error::MollifierTooWide { .. })));
    }

    #[test]
    fn decreasing_profiles_rejected() {
        assert!(InitialData::new(vec![Profile::tanh(1.0, 0.0, 0.0, 1.0, 1.0)]).is_err());
        let pl = Profile::PiecewiseLinear { points: vec![[0.0, 1.0], [1.0, 0.5]] };
        assert!(InitialData::new(vec![pl]).is_err());
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let p = Profile::PiecewiseLinear { points: vec![[-1.0, 0.0], [0.0, 0.5], [2.0, 1.0]] };
        assert_eq!(p.eval(-3.0), 0.0);
        assert_eq!(p.eval(-0.5), 0.25);
        assert_eq!(p.eval(1.0), 0.75);
        assert_eq!(p.eval(4.0), 1.0);
        assert_eq!(p.support(), Some((-1.0, 2.0)));
    }
}
