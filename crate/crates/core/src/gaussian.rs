//! Minimal Gaussian-state engine over canonical quadratures.
//!
//! States live on `n` bosonic modes with quadratures ordered
//! `(x₁, p₁, x₂, p₂, …)` in dimensionless canonical units where the vacuum
//! has `Var(x) = Var(p) = 1/2`. This is the unit system every other module
//! shares; all variances downstream are quoted in these projection-noise
//! units.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry and positivity checks run on
/// construction. Violations are hard errors: a silently non-physical
/// covariance corrupts every fidelity computed from it.
const COV_TOL: f64 = 1e-12;

/// A phase-space point `(x, p)` in canonical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraturePair {
    pub x: f64,
    pub p: f64,
}

impl QuadraturePair {
    pub const fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }

    pub const ORIGIN: Self = Self { x: 0.0, p: 0.0 };
}

impl From<(f64, f64)> for QuadraturePair {
    fn from((x, p): (f64, f64)) -> Self {
        Self { x, p }
    }
}

/// Gaussian state: mean vector and covariance matrix over canonical
/// quadrature pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Build a state from an explicit mean vector and covariance matrix.
    ///
    /// The covariance must be symmetric and satisfy the uncertainty bound
    /// `cov + i·Ω/2 ⪰ 0`; both are checked here.
    pub fn new(n_modes: usize, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::NonPositive { name: "n_modes", value: 0.0 });
        }
        let dim = 2 * n_modes;
        if mean.len() != dim {
            return Err(Error::DimensionMismatch { n_modes, mean_len: mean.len() });
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::CovarianceShape { rows: cov.nrows(), cols: cov.ncols(), dim });
        }
        let scale = cov.amax().max(1.0);
        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                max_asym = max_asym.max((cov[(i, j)] - cov[(j, i)]).abs());
            }
        }
        if max_asym > COV_TOL * scale {
            return Err(Error::AsymmetricCovariance(max_asym));
        }
        let min_eig = min_uncertainty_eigenvalue(&cov, n_modes);
        if min_eig < -COV_TOL * scale.max(dim as f64) {
            return Err(Error::UnphysicalCovariance(min_eig));
        }
        Ok(Self { n_modes, mean, cov })
    }

    /// Product of coherent states: mean set per mode, covariance `(1/2)·I`.
    ///
    /// With all means zero this is the vacuum, `Var(x) = Var(p) = 1/2`.
    pub fn coherent(n_modes: usize, means: &[QuadraturePair]) -> Result<Self> {
        if means.len() != n_modes {
            return Err(Error::MeanLengthMismatch { expected: n_modes, got: means.len() });
        }
        for m in means {
            if !m.x.is_finite() || !m.p.is_finite() {
                return Err(Error::NonFinite { name: "mean", value: if m.x.is_finite() { m.p } else { m.x } });
            }
        }
        let dim = 2 * n_modes;
        let mut mean = DVector::zeros(dim);
        for (k, m) in means.iter().enumerate() {
            mean[2 * k] = m.x;
            mean[2 * k + 1] = m.p;
        }
        let cov = DMatrix::identity(dim, dim) * 0.5;
        Ok(Self { n_modes, mean, cov })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Mean `(x, p)` of a single mode.
    pub fn mode_mean(&self, mode: usize) -> Result<QuadraturePair> {
        self.check_mode(mode)?;
        Ok(QuadraturePair::new(self.mean[2 * mode], self.mean[2 * mode + 1]))
    }

    /// `(Var(x), Var(p))` of a single mode.
    pub fn mode_variances(&self, mode: usize) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.cov[(2 * mode, 2 * mode)], self.cov[(2 * mode + 1, 2 * mode + 1)]))
    }

    /// Displace a single mode in phase space (covariance unchanged).
    pub fn displace(&mut self, mode: usize, by: QuadraturePair) -> Result<()> {
        self.check_mode(mode)?;
        self.mean[2 * mode] += by.x;
        self.mean[2 * mode + 1] += by.p;
        Ok(())
    }

    /// Two-mode entanglement witness `Var(x_i − x_j) + Var(p_i + p_j)`.
    ///
    /// Values below 2 certify entanglement of the pair; uncorrelated vacua
    /// give exactly 2 and a perfectly correlated EPR pair gives 0. The value
    /// depends on the covariance only.
    pub fn epr_criterion(&self, i: usize, j: usize) -> Result<f64> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(Error::IdenticalModeIndices(i));
        }
        let (xi, pi) = (2 * i, 2 * i + 1);
        let (xj, pj) = (2 * j, 2 * j + 1);
        let var_xdiff = self.cov[(xi, xi)] + self.cov[(xj, xj)] - 2.0 * self.cov[(xi, xj)];
        let var_psum = self.cov[(pi, pi)] + self.cov[(pj, pj)] + 2.0 * self.cov[(pi, pj)];
        Ok(var_xdiff + var_psum)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::InvalidModeIndex { index: mode, n_modes: self.n_modes });
        }
        Ok(())
    }
}

/// Smallest eigenvalue of `cov + i·Ω/2` where `Ω` is the symplectic form for
/// the interleaved ordering. The Hermitian matrix is embedded as the real
/// symmetric block matrix `[[cov, -Ω/2], [Ω/2, cov]]`, whose spectrum equals
/// that of the complex matrix (doubled).
fn min_uncertainty_eigenvalue(cov: &DMatrix<f64>, n_modes: usize) -> f64 {
    let dim = 2 * n_modes;
    let mut omega_half = DMatrix::zeros(dim, dim);
    for k in 0..n_modes {
        omega_half[(2 * k, 2 * k + 1)] = 0.5;
        omega_half[(2 * k + 1, 2 * k)] = -0.5;
    }
    let mut embed = DMatrix::zeros(2 * dim, 2 * dim);
    embed.view_mut((0, 0), (dim, dim)).copy_from(cov);
    embed.view_mut((dim, dim), (dim, dim)).copy_from(cov);
    embed.view_mut((0, dim), (dim, dim)).copy_from(&(-&omega_half));
    embed.view_mut((dim, 0), (dim, dim)).copy_from(&omega_half);
    embed
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Overlap of a coherent target state (variance 1/2) with a Gaussian state of
/// the given mean and variances.
///
/// For equal-variance output at 1/2 this reduces to
/// `exp(−((Δx)² + (Δp)²)/2)`; it is 1 exactly when the states coincide and is
/// symmetric under exchanging the x and p data.
pub fn coherent_overlap_fidelity(
    target: QuadraturePair,
    out_mean: QuadraturePair,
    var_x: f64,
    var_p: f64,
) -> Result<f64> {
    crate::error::ensure_positive("var_x", var_x)?;
    crate::error::ensure_positive("var_p", var_p)?;
    let denom_x = 1.0 + 2.0 * var_x;
    let denom_p = 1.0 + 2.0 * var_p;
    let arg = (target.x - out_mean.x).powi(2) / denom_x + (target.p - out_mean.p).powi(2) / denom_p;
    Ok(2.0 / (denom_x * denom_p).sqrt() * (-arg).exp())
}
