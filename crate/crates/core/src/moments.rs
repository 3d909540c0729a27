//! Method-of-moments sensitivity of linear photon-count observables.
//!
//! For an observable `X = Σ_k m_k n_k` the error-propagation sensitivity is
//! `χ⁻² = (mᵀD)² / (mᵀΓm)`. It is maximized by `m ∝ Γ⁻¹D`, where it takes
//! the value `M = DᵀΓ⁻¹D`.

use nalgebra::{DMatrix, DVector};

use crate::demux::MomentData;
use crate::error::{Error, Result};

/// Condition indicator above which a warning is logged.
pub const CONDITION_WARNING: f64 = 1e12;

/// Condition indicator above which the covariance is treated as singular.
pub const CONDITION_SINGULAR: f64 = 1e15;

/// Optimal sensitivity and observable.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    /// `M = DᵀΓ⁻¹D`, in inverse squared length units.
    pub m_value: f64,
    /// Unit-norm optimal coefficients, largest-magnitude entry positive.
    pub coeffs: DVector<f64>,
    /// Normalization `η` with `coeffs = η Γ⁻¹D`.
    pub eta: f64,
    /// Eigenvalue ratio of the diagonally equilibrated covariance.
    pub condition: f64,
}

/// Optimal sensitivity for the given moment data.
pub fn sensitivity(data: &MomentData) -> Result<SensitivityResult> {
    sensitivity_from(&data.cov, &data.deriv)
}

/// Optimal sensitivity for a covariance `cov` and derivative `deriv`.
pub fn sensitivity_from(cov: &DMatrix<f64>, deriv: &DVector<f64>) -> Result<SensitivityResult> {
    let k = deriv.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: cov.nrows(),
            context: "covariance vs. derivative length",
        });
    }
    if k == 0 {
        return Err(Error::DegenerateScene("no measured modes".into()));
    }
    if let Some(i) = (0..k).find(|&i| cov[(i, i)].is_nan() || cov[(i, i)] <= 0.0) {
        let mut null = vec![0.0; k];
        null[i] = 1.0;
        return Err(Error::SingularCovariance {
            condition: f64::INFINITY,
            null_direction: null,
        });
    }
    // Equilibrate: Γ̃ = SΓS with S = diag(Γ_kk^{-1/2}).
    let scale = DVector::from_fn(k, |i, _| cov[(i, i)].sqrt().recip());
    let eq = DMatrix::from_fn(k, k, |i, j| cov[(i, j)] * scale[i] * scale[j]);
    let eq = (&eq + eq.transpose()) * 0.5;
    let rhs = deriv.component_mul(&scale);

    let eig = eq.clone().symmetric_eigen();
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let lmax = eig.eigenvalues.max();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition > CONDITION_SINGULAR {
        let v = eig.eigenvectors.column(imin).component_mul(&scale);
        let v = v.normalize();
        return Err(Error::SingularCovariance {
            condition,
            null_direction: v.iter().copied().collect(),
        });
    }
    if condition > CONDITION_WARNING {
        log::warn!("ill-conditioned covariance (condition indicator {condition:e})");
    }

    let y = match eq.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => eq
            .col_piv_qr()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularCovariance {
                condition,
                null_direction: eig.eigenvectors.column(imin).iter().copied().collect(),
            })?,
    };
    let m_value = rhs.dot(&y).max(0.0);
    // Γ⁻¹D = S y
    let raw = y.component_mul(&scale);
    let norm = raw.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Ok(SensitivityResult {
            m_value: 0.0,
            coeffs: DVector::zeros(k),
            eta: 0.0,
            condition,
        });
    }
    let imax = raw.iamax();
    let sign = if raw[imax] < 0.0 { -1.0 } else { 1.0 };
    let eta = sign / norm;
    Ok(SensitivityResult {
        m_value,
        coeffs: raw * eta,
        eta,
        condition,
    })
}

/// Sensitivity `(cᵀD)² / (cᵀΓc)` of the observable with coefficients `c`.
pub fn chi_squared_inverse(data: &MomentData, coeffs: &DVector<f64>) -> Result<f64> {
    if coeffs.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: coeffs.len(),
            context: "coefficients vs. basis size",
        });
    }
    let var = coeffs.dot(&(&data.cov * coeffs));
    if var.is_nan() || var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let signal = coeffs.dot(&data.deriv);
    Ok(signal * signal / var)
}
