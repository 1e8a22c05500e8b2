//! Uniform 1D grids and the single quadrature rule used throughout the crate.
//!
//! Every integral in the crate goes through [`trapezoid`]: composite trapezoid
//! on the uniform grid, with the function taken to vanish outside the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(samples: &[f64], dx: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

/// Composite trapezoid rule applied to `g(samples[j])` without allocating.
pub fn trapezoid_map(samples: &[f64], dx: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let mut acc = 0.5 * (g(samples[0]) + g(samples[n - 1]));
            for &s in &samples[1..n - 1] {
                acc += g(s);
            }
            dx * acc
        }
    }
}

/// Node layout `x0 + j dx`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub n: usize,
    pub dx: f64,
    pub x0: f64,
}

impl UniformGrid {
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }
}

/// A scalar function sampled on `x0, x0 + dx, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGridFunction {
    samples: Vec<f64>,
    dx: f64,
    x0: f64,
}

impl ScalarGridFunction {
    pub fn new(samples: Vec<f64>, dx: f64, x0: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {dx}")));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidInput("left endpoint must be finite".into()));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {j} is not finite")));
        }
        Ok(Self { samples, dx, x0 })
    }

    /// Samples `f` at `n` nodes starting from `x0`.
    pub fn from_fn(n: usize, dx: f64, x0: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..n).map(|j| f(x0 + j as f64 * dx)).collect();
        Self::new(samples, dx, x0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.samples, self.dx)
    }

    pub fn integral_of(&self, g: impl FnMut(f64) -> f64) -> f64 {
        trapezoid_map(&self.samples, self.dx, g)
    }

    pub fn l1_norm(&self) -> f64 {
        self.integral_of(f64::abs)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { samples: self.samples.iter().map(|v| c * v).collect(), dx: self.dx, x0: self.x0 }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.samples.len() == other.samples.len()
            && (self.dx - other.dx).abs() <= 1e-14 * self.dx
            && (self.x0 - other.x0).abs() <= 1e-12 * (1.0 + self.x0.abs())
    }

    /// Pointwise product on a shared grid.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch(format!(
                "({} pts, dx {}, x0 {}) vs ({} pts, dx {}, x0 {})",
                self.len(),
                self.dx,
                self.x0,
                other.len(),
                other.dx,
                other.x0
            )));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).collect();
        Ok(Self { samples, dx: self.dx, x0: self.x0 })
    }
}

/// A `d`-component state sampled on a uniform grid; `data[i][j]` is component
/// `i` at node `x0 + j dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    dx: f64,
    x0: f64,
    data: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn new(data: Vec<Vec<f64>>, dx: f64, x0: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("grid function needs at least one component".into()));
        }
        let n = data[0].len();
        if data.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("components have different lengths".into()));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {dx}")));
        }
        for (i, c) in data.iter().enumerate() {
            if let Some(j) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("component {i} sample {j} is not finite")));
            }
        }
        Ok(Self { dx, x0, data })
    }

    pub fn grid(&self) -> UniformGrid {
        UniformGrid { n: self.n(), dx: self.dx, x0: self.x0 }
    }

    pub fn d(&self) -> usize {
        self.data.len()
    }

    pub fn n(&self) -> usize {
        self.data[0].len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.n() - 1)
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.data
    }

    /// State vector at node `j`.
    pub fn state_at(&self, j: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.data) {
            *o = c[j];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn scalar(&self, i: usize) -> ScalarGridFunction {
        ScalarGridFunction { samples: self.data[i].clone(), dx: self.dx, x0: self.x0 }
    }

    /// Forward differences `(u[j+1] - u[j]) / dx`, located at the midpoints.
    pub fn gradient(&self, i: usize) -> ScalarGridFunction {
        let c = &self.data[i];
        let samples = c.windows(2).map(|w| (w[1] - w[0]) / self.dx).collect();
        ScalarGridFunction { samples, dx: self.dx, x0: self.x0 + 0.5 * self.dx }
    }

    pub fn sup_norm(&self, i: usize) -> f64 {
        self.data[i].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_forward_difference(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|c| c.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Index range of nodes inside `[a, b]`.
    pub fn index_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = ((a - self.x0) / self.dx - 1e-9).ceil().max(0.0) as usize;
        let hi = (((b - self.x0) / self.dx + 1e-9).floor() as isize + 1).clamp(0, self.n() as isize) as usize;
        lo.min(hi)..hi
    }

    /// Node index of coordinate `x` if it lies on the grid.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let r = (x - self.x0) / self.dx;
        let j = r.round();
        if (r - j).abs() < 1e-6 && j >= 0.0 && (j as usize) < self.n() {
            Some(j as usize)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_linear_functions() {
        let f = ScalarGridFunction::from_fn(11, 0.1, 0.0, |x| 3.0 * x + 1.0).unwrap();
        assert!((f.integral() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn indicator_integrates_to_length() {
        let f = ScalarGridFunction::from_fn(101, 0.01, 0.0, |_| 1.0).unwrap();
        assert!((f.integral() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_spacing_and_nan() {
        assert!(ScalarGridFunction::new(vec![1.0], 0.0, 0.0).is_err());
        assert!(ScalarGridFunction::new(vec![f64::NAN], 0.1, 0.0).is_err());
        assert!(GridFunction::new(vec![vec![1.0, 2.0], vec![1.0]], 0.1, 0.0).is_err());
    }

    #[test]
    fn index_range_picks_nodes_inside() {
        let g = GridFunction::new(vec![vec![0.0; 21]], 0.1, -1.0).unwrap();
        let r = g.index_range(-0.5, 0.5);
        assert_eq!(r, 5..16);
        assert_eq!(g.node_index(0.0), Some(10));
    }
}
