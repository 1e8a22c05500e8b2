//! Reference computations that share no code with the library.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Viscous Burgers `u_t + u u_x = eps u_xx` by the Cole-Hopf formula
/// `u = int ((x-y)/t) e^{-G/2eps} dy / int e^{-G/2eps} dy` with
/// `G = (x-y)^2/(2t) + Phi0(y)`, `Phi0' = u0`.
pub struct ColeHopf {
    pub eps: f64,
    /// Antiderivative of the initial data.
    pub phi0: Box<dyn Fn(f64) -> f64 + Sync>,
    pub y_step: f64,
    pub y_half_width: f64,
}

impl ColeHopf {
    /// Data `tanh(y/w)/tanh(R/w)` on `[-R, R]`, equal to `-1`/`1` outside.
    pub fn clamped_tanh(eps: f64, w: f64, r: f64) -> Self {
        let k = 1.0 / (r / w).tanh();
        let inner = move |y: f64| w * k * (y / w).cosh().ln();
        let phi0 = move |y: f64| if y.abs() <= r { inner(y) } else { inner(r) + (y.abs() - r) };
        Self { eps, phi0: Box::new(phi0), y_step: 2e-3, y_half_width: 12.0 }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let n = (2.0 * self.y_half_width / self.y_step).round() as usize;
        let g: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let y = x - self.y_half_width + k as f64 * self.y_step;
                (y, (x - y) * (x - y) / (2.0 * t) + (self.phi0)(y))
            })
            .collect();
        let gmin = g.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let (mut num, mut den) = (0.0, 0.0);
        for (k, (y, gv)) in g.iter().enumerate() {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let e = (-(gv - gmin) / (2.0 * self.eps)).exp() * w;
            num += (x - y) / t * e;
            den += e;
        }
        num / den
    }
}

/// Relaxed energy `min_v (eps(v) - p) : Lambda : (eps(v) - p)` over
/// `eps(v) = [[v1, (v1+v2)/2], [(v1+v2)/2, v2]]` by nested grid search.
pub fn relaxed_energy(lambda: &[[[[f64; 2]; 2]; 2]; 2], p: &[[f64; 2]; 2]) -> f64 {
    let energy = |v1: f64, v2: f64| {
        let e = [[v1 - p[0][0], 0.5 * (v1 + v2) - p[0][1]], [0.5 * (v1 + v2) - p[1][0], v2 - p[1][1]]];
        contract(lambda, &e, &e)
    };
    let (mut c1, mut c2, mut half) = (0.0, 0.0, 4.0);
    let m = 40;
    for _ in 0..40 {
        let mut best = (f64::INFINITY, c1, c2);
        for a in 0..=m {
            for b in 0..=m {
                let v1 = c1 - half + 2.0 * half * a as f64 / m as f64;
                let v2 = c2 - half + 2.0 * half * b as f64 / m as f64;
                let e = energy(v1, v2);
                if e < best.0 {
                    best = (e, v1, v2);
                }
            }
        }
        c1 = best.1;
        c2 = best.2;
        half *= 0.25;
    }
    energy(c1, c2)
}

/// `a : Lambda : b` with all four indices summed.
pub fn contract(lambda: &[[[[f64; 2]; 2]; 2]; 2], a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    s += a[i][j] * lambda[i][j][k][l] * b[k][l];
                }
            }
        }
    }
    s
}

pub fn isotropic(l: f64, m: f64) -> [[[[f64; 2]; 2]; 2]; 2] {
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut t = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for q in 0..2 {
                    t[i][j][k][q] = l * d(i, j) * d(k, q) + m * (d(i, k) * d(j, q) + d(i, q) * d(j, k));
                }
            }
        }
    }
    t
}

pub fn sym_outer(b: [f64; 2], n: [f64; 2]) -> [[f64; 2]; 2] {
    let mut e = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            e[i][j] = 0.5 * (b[i] * n[j] + n[i] * b[j]);
        }
    }
    e
}

/// Oracle blocks `(A_hat, Q_hat)` by polarization of the relaxed energy.
pub fn coupling_oracle(lambda: &[[[[f64; 2]; 2]; 2]; 2], strains: &[[[f64; 2]; 2]]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = strains.len();
    let add = |a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]| {
        let mut c = *a;
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += b[i][j];
            }
        }
        c
    };
    let single: Vec<f64> = strains.iter().map(|e| relaxed_energy(lambda, e)).collect();
    let mut a = vec![vec![0.0; n]; n];
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            a[i][k] = if i == k {
                single[i]
            } else {
                0.5 * (relaxed_energy(lambda, &add(&strains[i], &strains[k])) - single[i] - single[k])
            };
            q[i][k] = contract(lambda, &strains[i], &strains[k]) - a[i][k];
        }
    }
    (a, q)
}

/// Root of a decreasing function by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `|c 1_[0,L]|_LlogL`: the `mu` with `L (c/mu) ln(e + c/mu) = 1`.
pub fn llogl_indicator(len: f64, c: f64) -> f64 {
    let s = bisect(|s| 1.0 / len - s * (std::f64::consts::E + s).ln(), 0.0, 1e12);
    c / s
}

/// `|c 1_[0,L]|_EXP = c / ln(1 + 1/L)`.
pub fn exp_indicator(len: f64, c: f64) -> f64 {
    c / (1.0 + 1.0 / len).ln()
}

/// Random nonnegative samples: a few bumps and plateaus with heights over
/// several decades, sometimes with isolated spikes.
pub fn random_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for _ in 0..rng.random_range(1..6) {
        let h = 10f64.powf(rng.random_range(-4.0..4.0));
        let a = rng.random_range(0..n);
        let len = rng.random_range(1..=(n - a));
        let kind = rng.random_range(0..3);
        for k in 0..len {
            let s = (k as f64 + 0.5) / len as f64;
            v[a + k] += h * match kind {
                0 => 1.0,
                1 => (std::f64::consts::PI * s).sin().powi(2),
                _ => s.powf(rng.random_range(0.1..5.0)),
            };
        }
    }
    v
}
