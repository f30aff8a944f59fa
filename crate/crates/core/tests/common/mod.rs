//! Independent oracles shared by the integration tests.
//!
//! Nothing here goes through the orthant reduction or the Monte Carlo module:
//! integrals use tensor-product Gauss-Legendre panels, sampling uses a
//! separate generator with Box-Muller normals.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use prbox_core::quadrature::GaussLegendre;
use prbox_core::{BivariateGaussian, CovarianceMatrix4, GaussianTwoModeState};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Composite Gauss-Legendre nodes over `[a, b]`.
pub fn panels(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|i| gl.on_interval(a + i as f64 * h, a + (i + 1) as f64 * h))
        .collect()
}

/// Nodes over `[-span, span]` split at zero, so integrands with a sign
/// discontinuity at the origin stay smooth on every panel.
pub fn split_panels(span: f64, per_side: usize, order: usize) -> Vec<(f64, f64)> {
    let mut nodes = panels(-span, 0.0, per_side, order);
    nodes.extend(panels(0.0, span, per_side, order));
    nodes
}

pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hand-rolled Gaussian density `exp(-xi^T S^-1 xi / 2) / (4 pi^2 sqrt det S)` using an
/// inverse computed by Gauss-Jordan elimination.
pub struct Density4 {
    precision: [[f64; 4]; 4],
    norm: f64,
}

impl Density4 {
    pub fn new(cov: &CovarianceMatrix4) -> Self {
        let mut a = *cov.matrix();
        let mut inv = [[0.0; 4]; 4];
        for (i, row) in inv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut det = 1.0;
        for col in 0..4 {
            let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            if pivot != col {
                a.swap(pivot, col);
                inv.swap(pivot, col);
                det = -det;
            }
            let p = a[col][col];
            det *= p;
            for k in 0..4 {
                a[col][k] /= p;
                inv[col][k] /= p;
            }
            for row in 0..4 {
                if row != col {
                    let factor = a[row][col];
                    for k in 0..4 {
                        a[row][k] -= factor * a[col][k];
                        inv[row][k] -= factor * inv[col][k];
                    }
                }
            }
        }
        Self { precision: inv, norm: 1.0 / (4.0 * PI * PI * det.sqrt()) }
    }

    pub fn eval(&self, xi: [f64; 4]) -> f64 {
        let mut q = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                q += xi[i] * self.precision[i][j] * xi[j];
            }
        }
        self.norm * (-0.5 * q).exp()
    }
}

/// `int sgn(x1) sgn(x2) W d^4 xi` for a zero-mean Gaussian `W` with covariance `cov`.
pub fn sign_expectation_4d(cov: &CovarianceMatrix4) -> f64 {
    let w = Density4::new(cov);
    let sd = |i: usize| cov.get(i, i).sqrt();
    let x1 = split_panels(9.0 * sd(0), 6, 8);
    let x2 = split_panels(9.0 * sd(2), 6, 8);
    let p1 = panels(-9.0 * sd(1), 9.0 * sd(1), 12, 8);
    let p2 = panels(-9.0 * sd(3), 9.0 * sd(3), 12, 8);
    let mut total = 0.0;
    for &(a, wa) in &x1 {
        for &(b, wb) in &x2 {
            let s = sgn(a) * sgn(b) * wa * wb;
            let mut inner = 0.0;
            for &(c, wc) in &p1 {
                for &(d, wd) in &p2 {
                    inner += wc * wd * w.eval([a, c, b, d]);
                }
            }
            total += s * inner;
        }
    }
    total
}

/// Random valid state with `delta` in `[0.4, 1.6]` and `gamma / delta` in `[1.05, 4]`.
pub fn random_state(rng: &mut StdRng) -> GaussianTwoModeState {
    let delta = rng.random_range(0.4..1.6);
    let gamma = delta * rng.random_range(1.05..4.0);
    GaussianTwoModeState::new(delta, gamma).unwrap()
}

pub fn random_angle(rng: &mut StdRng) -> f64 {
    rng.random_range(0.0..TAU)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn box_muller(rng: &mut StdRng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let radius = (-2.0 * u1.ln()).sqrt();
    (radius * (TAU * u2).cos(), radius * (TAU * u2).sin())
}

/// Brute-force quadrant counts `[++, +-, -+, --]` and discards for `n` pairs.
pub fn brute_force_quadrants(bg: &BivariateGaussian, r: f64, n: u64, seed: u64) -> ([u64; 4], u64) {
    let mut rng = rng(seed);
    let (s1, s2, rho) = (bg.std1(), bg.std2(), bg.corr());
    let resid = (1.0 - rho * rho).sqrt();
    let mut counts = [0u64; 4];
    let mut discarded = 0;
    for _ in 0..n {
        let (z1, z2) = box_muller(&mut rng);
        let x1 = s1 * z1;
        let x2 = s2 * (rho * z1 + resid * z2);
        if x1.abs() <= r || x2.abs() <= r {
            discarded += 1;
            continue;
        }
        let idx = match (x1 > 0.0, x2 > 0.0) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[idx] += 1;
    }
    (counts, discarded)
}
