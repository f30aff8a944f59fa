//! Two-mode Gaussian photon-pair state and its phase-space covariance.
//!
//! The transverse wave-vector amplitude of the pair is
//! `psi(q) ~ exp(-(q1^2 + q2^2) / (2 delta^2) - q1 q2 / gamma^2)`, i.e.
//! `exp(-q^T A q / 2)` with `A = [[1/delta^2, 1/gamma^2], [1/gamma^2, 1/delta^2]]`.
//! Quadratures use `[x, p] = i` with vacuum variance 1/2, so the covariance has
//! momentum block `A^-1 / 2`, position block `A / 2` and no x-p cross terms.
//! Coordinates are ordered `(x1, p1, x2, p2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];
pub type Mat4 = [[f64; 4]; 4];

/// Determinants below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-14;

/// Tolerance on the symplectic eigenvalues of a pure state.
pub const PURITY_TOL: f64 = 1e-10;

/// Widths of the two-photon Gaussian state, plus the detector length scale.
///
/// `gamma = f64::INFINITY` is accepted and gives the separable state
/// (`1/gamma^2 = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTwoModeState {
    delta: f64,
    gamma: f64,
    scale_s: f64,
}

impl GaussianTwoModeState {
    /// State with the default scale of 1 mm per dimensionless unit.
    pub fn new(delta: f64, gamma: f64) -> Result<Self> {
        Self::with_scale(delta, gamma, 1.0)
    }

    pub fn with_scale(delta: f64, gamma: f64, scale_s: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be positive and finite, got {delta}")));
        }
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if !(scale_s.is_finite() && scale_s > 0.0) {
            return Err(Error::invalid("scale_s", format!("must be positive and finite, got {scale_s}")));
        }
        if gamma <= delta {
            return Err(Error::NonNormalizable { delta, gamma });
        }
        Ok(Self { delta, gamma, scale_s })
    }

    /// Uncorrelated product state with the given width.
    pub fn separable(delta: f64) -> Result<Self> {
        Self::new(delta, f64::INFINITY)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Millimetres per dimensionless transverse unit.
    pub fn scale_s(&self) -> f64 {
        self.scale_s
    }

    pub fn inverse_gamma_sq(&self) -> f64 {
        1.0 / (self.gamma * self.gamma)
    }

    pub fn is_separable(&self) -> bool {
        self.inverse_gamma_sq() == 0.0
    }

    /// Converts a length in millimetres at the detector to dimensionless units.
    pub fn mm_to_dimensionless(&self, mm: f64) -> f64 {
        mm / self.scale_s
    }
}

/// The matrix `A` of the momentum-space exponent `-q^T A q / 2`.
pub fn quad_form_matrix(state: &GaussianTwoModeState) -> Mat2 {
    let diag = 1.0 / (state.delta * state.delta);
    let off = state.inverse_gamma_sq();
    [[diag, off], [off, diag]]
}

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inverse2(m: &Mat2) -> Result<Mat2> {
    let det = det2(m);
    if det.abs() < SINGULAR_DET {
        return Err(Error::IllConditioned { det });
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

pub fn det4(m: &Mat4) -> f64 {
    let s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1];
    let s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2];
    let s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3];
    let s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
    let s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3];
    let s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3];
    let c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3];
    let c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3];
    let c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2];
    let c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3];
    let c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2];
    let c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1];
    s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
}

/// Closed-form (Laplace expansion by 2x2 minors) inverse with a determinant guard.
pub fn inverse4(m: &Mat4) -> Result<Mat4> {
    let s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1];
    let s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2];
    let s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3];
    let s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
    let s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3];
    let s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3];
    let c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3];
    let c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3];
    let c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2];
    let c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3];
    let c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2];
    let c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1];
    let det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0;
    if det.abs() < SINGULAR_DET {
        return Err(Error::IllConditioned { det });
    }
    let inv = 1.0 / det;
    Ok([
        [
            (m[1][1] * c5 - m[1][2] * c4 + m[1][3] * c3) * inv,
            (-m[0][1] * c5 + m[0][2] * c4 - m[0][3] * c3) * inv,
            (m[3][1] * s5 - m[3][2] * s4 + m[3][3] * s3) * inv,
            (-m[2][1] * s5 + m[2][2] * s4 - m[2][3] * s3) * inv,
        ],
        [
            (-m[1][0] * c5 + m[1][2] * c2 - m[1][3] * c1) * inv,
            (m[0][0] * c5 - m[0][2] * c2 + m[0][3] * c1) * inv,
            (-m[3][0] * s5 + m[3][2] * s2 - m[3][3] * s1) * inv,
            (m[2][0] * s5 - m[2][2] * s2 + m[2][3] * s1) * inv,
        ],
        [
            (m[1][0] * c4 - m[1][1] * c2 + m[1][3] * c0) * inv,
            (-m[0][0] * c4 + m[0][1] * c2 - m[0][3] * c0) * inv,
            (m[3][0] * s4 - m[3][1] * s2 + m[3][3] * s0) * inv,
            (-m[2][0] * s4 + m[2][1] * s2 - m[2][3] * s0) * inv,
        ],
        [
            (-m[1][0] * c3 + m[1][1] * c1 - m[1][2] * c0) * inv,
            (m[0][0] * c3 - m[0][1] * c1 + m[0][2] * c0) * inv,
            (-m[3][0] * s3 + m[3][1] * s1 - m[3][2] * s0) * inv,
            (m[2][0] * s3 - m[2][1] * s1 + m[2][2] * s0) * inv,
        ],
    ])
}

fn cholesky4(m: &Mat4) -> Option<Mat4> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let sum: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - sum;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - sum) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric 4x4 matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues4(mut a: Mat4) -> [f64; 4] {
    for _ in 0..64 {
        let off: f64 = (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: f64 = (0..4).map(|i| a[i][i] * a[i][i]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    [a[0][0], a[1][1], a[2][2], a[3][3]]
}

/// Symmetric, positive-definite covariance of a pure two-mode Gaussian state,
/// over `(x1, p1, x2, p2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix4 {
    sigma: Mat4,
}

impl CovarianceMatrix4 {
    /// Validates symmetry, positive definiteness and purity (both symplectic
    /// eigenvalues equal to 1/2).
    pub fn new(sigma: Mat4) -> Result<Self> {
        let scale = sigma.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !sigma.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if (sigma[i][j] - sigma[j][i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::InvalidCovariance(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        // Sylvester's criterion on the leading minors.
        let m1 = sigma[0][0];
        let m2 = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
        let m3 = sigma[0][0] * (sigma[1][1] * sigma[2][2] - sigma[1][2] * sigma[2][1])
            - sigma[0][1] * (sigma[1][0] * sigma[2][2] - sigma[1][2] * sigma[2][0])
            + sigma[0][2] * (sigma[1][0] * sigma[2][1] - sigma[1][1] * sigma[2][0]);
        let m4 = det4(&sigma);
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0 && m4 > 0.0) {
            return Err(Error::InvalidCovariance("not positive definite".into()));
        }
        let cov = Self { sigma };
        let (nu_minus, nu_plus) = cov.symplectic_eigenvalues();
        if (nu_minus - 0.5).abs() > PURITY_TOL || (nu_plus - 0.5).abs() > PURITY_TOL {
            return Err(Error::InvalidCovariance(format!(
                "symplectic eigenvalues ({nu_minus}, {nu_plus}) are not (1/2, 1/2)"
            )));
        }
        Ok(cov)
    }

    pub(crate) fn from_raw(sigma: Mat4) -> Self {
        Self { sigma }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.sigma
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma[i][j]
    }

    pub fn determinant(&self) -> f64 {
        det4(&self.sigma)
    }

    pub fn inverse(&self) -> Result<Mat4> {
        inverse4(&self.sigma)
    }

    /// Symplectic eigenvalues `(nu_-, nu_+)`.
    ///
    /// With `Sigma = L L^T`, the antisymmetric `K = L^T Omega L` has
    /// eigenvalues `+/- i nu`, so `K^T K` carries each `nu^2` twice. Jacobi on
    /// that symmetric matrix keeps full precision at the degenerate pure-state
    /// point, where the closed-form quadratic root loses half the digits.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let Some(l) = cholesky4(&self.sigma) else {
            return (0.0, 0.0);
        };
        // Omega L: rows (x_j, p_j) -> (p_j, -x_j).
        let mut omega_l = [[0.0; 4]; 4];
        for mode in 0..2 {
            let (x, p) = (2 * mode, 2 * mode + 1);
            omega_l[x] = l[p];
            omega_l[p] = l[x].map(|v| -v);
        }
        let mut k = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] = (0..4).map(|m| l[m][i] * omega_l[m][j]).sum();
            }
        }
        let mut ktk = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                ktk[i][j] = (0..4).map(|m| k[m][i] * k[m][j]).sum();
            }
        }
        let eig = symmetric_eigenvalues4(ktk);
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0).sqrt();
        (lo, hi)
    }

    /// Variances of `(x_j, p_j)` for mode `j` in {0, 1}.
    pub fn mode_variances(&self, mode: usize) -> (f64, f64) {
        let k = 2 * mode;
        (self.sigma[k][k], self.sigma[k + 1][k + 1])
    }
}

/// Phase-space covariance of the state, `A/2` on positions and `A^-1/2` on momenta.
pub fn covariance_from_state(state: &GaussianTwoModeState) -> Result<CovarianceMatrix4> {
    if state.gamma <= state.delta {
        return Err(Error::NonNormalizable { delta: state.delta, gamma: state.gamma });
    }
    let a = quad_form_matrix(state);
    let a_inv = inverse2(&a)?;
    let mut sigma = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            sigma[2 * i][2 * j] = 0.5 * a[i][j];
            sigma[2 * i + 1][2 * j + 1] = 0.5 * a_inv[i][j];
        }
    }
    Ok(CovarianceMatrix4::from_raw(sigma))
}

/// Normalized Gaussian Wigner function with a precomputed inverse covariance.
#[derive(Debug, Clone)]
pub struct WignerFunction {
    precision: Mat4,
    norm: f64,
}

impl WignerFunction {
    pub fn new(cov: &CovarianceMatrix4) -> Result<Self> {
        let precision = cov.inverse()?;
        let norm = 1.0 / (4.0 * PI * PI * cov.determinant().sqrt());
        Ok(Self { precision, norm })
    }

    pub fn peak(&self) -> f64 {
        self.norm
    }

    pub fn value(&self, point: [f64; 4]) -> f64 {
        let mut q = 0.0;
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| self.precision[i][j] * point[j]).sum();
            q += point[i] * row;
        }
        self.norm * (-0.5 * q).exp()
    }
}

/// Wigner function `W(x1, p1, x2, p2)` of the zero-mean state with covariance `cov`.
pub fn wigner_value(cov: &CovarianceMatrix4, point: [f64; 4]) -> Result<f64> {
    Ok(WignerFunction::new(cov)?.value(point))
}

/// Single-mode rotation acting as `x -> cos t x + sin t p`, `p -> cos t p - sin t x`.
fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

/// Applies local phase-space rotations `alpha` (mode 1) and `beta` (mode 2).
pub fn rotate_covariance(cov: &CovarianceMatrix4, alpha: f64, beta: f64) -> CovarianceMatrix4 {
    let r1 = rotation(alpha);
    let r2 = rotation(beta);
    let mut r = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = r1[i][j];
            r[i + 2][j + 2] = r2[i][j];
        }
    }
    let s = &cov.sigma;
    let mut rs = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rs[i][j] = (0..4).map(|k| r[i][k] * s[k][j]).sum();
        }
    }
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let v: f64 = (0..4).map(|k| rs[i][k] * r[j][k]).sum();
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    CovarianceMatrix4::from_raw(out)
}

/// Zero-mean bivariate normal of the two detected positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateGaussian {
    var1: f64,
    var2: f64,
    corr: f64,
}

impl BivariateGaussian {
    pub fn new(var1: f64, var2: f64, corr: f64) -> Result<Self> {
        if !(var1.is_finite() && var1 > 0.0) {
            return Err(Error::invalid("var1", format!("must be positive, got {var1}")));
        }
        if !(var2.is_finite() && var2 > 0.0) {
            return Err(Error::invalid("var2", format!("must be positive, got {var2}")));
        }
        if !(corr.abs() <= 1.0) {
            return Err(Error::invalid("corr", format!("must lie in [-1, 1], got {corr}")));
        }
        Ok(Self { var1, var2, corr })
    }

    /// From a 2x2 covariance; the correlation is clamped into [-1, 1] against rounding.
    pub fn from_covariance(var1: f64, var2: f64, cov12: f64) -> Result<Self> {
        let corr = (cov12 / (var1 * var2).sqrt()).clamp(-1.0, 1.0);
        Self::new(var1, var2, corr)
    }

    pub fn var1(&self) -> f64 {
        self.var1
    }

    pub fn var2(&self) -> f64 {
        self.var2
    }

    pub fn corr(&self) -> f64 {
        self.corr
    }

    pub fn std1(&self) -> f64 {
        self.var1.sqrt()
    }

    pub fn std2(&self) -> f64 {
        self.var2.sqrt()
    }

    pub fn covariance(&self) -> f64 {
        self.corr * self.std1() * self.std2()
    }

    /// Joint density; zero on the degenerate `|corr| = 1` support complement.
    pub fn density(&self, x1: f64, x2: f64) -> f64 {
        let one_minus = 1.0 - self.corr * self.corr;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let u = x1 / self.std1();
        let v = x2 / self.std2();
        let q = (u * u - 2.0 * self.corr * u * v + v * v) / one_minus;
        (-0.5 * q).exp() / (2.0 * PI * self.std1() * self.std2() * one_minus.sqrt())
    }
}

/// Distribution of `(x1^alpha, x2^beta)`: the position sub-block of the rotated covariance.
pub fn position_joint_density(state: &GaussianTwoModeState, alpha: f64, beta: f64) -> Result<BivariateGaussian> {
    let cov = rotate_covariance(&covariance_from_state(state)?, alpha, beta);
    BivariateGaussian::from_covariance(cov.get(0, 0), cov.get(2, 2), cov.get(0, 2))
}

// `(gamma^4 - delta^4) / (delta^2 gamma^4)`: inverse momentum variance over two.
fn kappa(state: &GaussianTwoModeState) -> f64 {
    let d2 = state.delta * state.delta;
    let g = state.inverse_gamma_sq();
    (1.0 - d2 * d2 * g * g) / d2
}

/// Joint density for an imaging system on photon 1 (`alpha = pi`) and a
/// rotation `beta` on photon 2, written as marginal times conditional.
///
/// Photon 1 carries the imaging marginal `exp(-delta^2 x1^2)`. Photon 2 is
/// conditionally Gaussian with width `kappa cos^2 b + sin^2 b / kappa`, where
/// `kappa = (gamma^4 - delta^4)/(delta^2 gamma^4)`, and mean
/// `-(delta^2/gamma^2) cos b x1`. The prefactor normalizes the density.
pub fn closed_form_r_pi(state: &GaussianTwoModeState, beta: f64, x1: f64, x2: f64) -> f64 {
    let d2 = state.delta * state.delta;
    let ratio = d2 * state.inverse_gamma_sq();
    let k = kappa(state);
    let (s, c) = beta.sin_cos();
    let width = k * c * c + s * s / k;
    let prefactor = (width / d2).powf(-0.5) / PI;
    prefactor * (-d2 * x1 * x1).exp() * (-(x2 + ratio * c * x1).powi(2) / width).exp()
}

/// Joint density for a Fourier-transform system on photon 1 (`alpha = pi/2`)
/// and a rotation `beta` on photon 2.
///
/// Photon 1 carries the momentum-like marginal `exp(-kappa x1^2)`. Photon 2
/// is conditionally Gaussian with width `cos^2 b / delta^2 + delta^2 sin^2 b`
/// and mean `-(delta^2/gamma^2) sin b x1`. The prefactor normalizes the density.
pub fn closed_form_r_half_pi(state: &GaussianTwoModeState, beta: f64, x1: f64, x2: f64) -> f64 {
    let d2 = state.delta * state.delta;
    let ratio = d2 * state.inverse_gamma_sq();
    let k = kappa(state);
    let (s, c) = beta.sin_cos();
    let width = c * c / d2 + d2 * s * s;
    let prefactor = (width / k).powf(-0.5) / PI;
    prefactor * (-k * x1 * x1).exp() * (-(x2 + ratio * s * x1).powi(2) / width).exp()
}
