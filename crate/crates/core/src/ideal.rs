//! Closed forms for ideal demultiplexing (no misalignment, crosstalk or dark
//! counts).
//!
//! Without noise `f_{-,k} = s_k f_{+,k}` with `s_k = (-1)^(n+m)`, so the
//! covariance is a diagonal matrix plus a rank-two update and inverts in
//! closed form:
//!
//! ```text
//! Γ⁻¹_kl = δ_kl / (2Nκ β_k²) - (s_k s_l A₊ - B(s_k + s_l) + A₋) / (A₊A₋ - B²)
//! A±     = 2/(1 ± γ²) + 2Nκ Σ β²
//! B      = 2Nκ Σ s β²
//! ```
//!
//! With `t_k = n + m - x²` the sensitivity is
//! `M = (2Nκ/w²)[F - 2Nκ(δ₁ + δ₂ + δ₃)]`, where `F = Σ t²β²/x²`,
//! `δ₁ = A₊S₁²/Δ`, `δ₂ = -2BS₁S₂/Δ`, `δ₃ = A₋S₂²/Δ`, `Δ = A₊A₋ - B²`,
//! `S₁ = Σ s t β²/x` (alternating) and `S₂ = Σ t β²/x`.
//!
//! The optimal coefficients are
//!
//! ```text
//! (w/η) m_k = t_k/x - 2Nκ[(s_k A₊ - B) S₁ - (s_k B - A₋) S₂] / Δ
//! ```
//!
//! which depend on the mode only through its order `n + m`. All sums run
//! over the reduced basis (see [`crate::demux::reduced_basis`]).

use nalgebra::{DMatrix, DVector};

use crate::demux::{reduced_basis, NoiseModel};
use crate::error::{Error, Result};
use crate::hg_overlap::beta;
use crate::numerics::CompensatedSum;
use crate::scene::{Misalignment, Mode, ModeBasis, Scene};

/// Intermediate sums of the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealIntermediates {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b: f64,
    pub f_term: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub s1: f64,
    pub s2: f64,
}

impl IdealIntermediates {
    pub fn determinant(&self) -> f64 {
        self.a_plus * self.a_minus - self.b * self.b
    }
}

/// Basis actually used by the closed forms, with `β_k(r₀)` per mode.
fn ideal_basis(scene: &Scene, q_max: u32) -> Result<(ModeBasis, Vec<f64>)> {
    let basis = reduced_basis(scene, &Misalignment::none(), &NoiseModel::ideal(), &ModeBasis::full(q_max))?;
    if scene.x() == 0.0 {
        return Err(Error::DegenerateScene("zero separation".into()));
    }
    let none = Misalignment::none();
    let b: Vec<f64> = basis
        .modes()
        .iter()
        .map(|&md| beta(md, scene, &none, crate::hg_overlap::Sign::Plus))
        .collect();
    if let Some(i) = b.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateScene(format!(
            "overlap of mode {} vanishes (underflow at x = {})",
            basis.modes()[i],
            scene.x()
        )));
    }
    Ok((basis, b))
}

fn sum(it: impl Iterator<Item = f64>) -> f64 {
    it.collect::<CompensatedSum>().value()
}

fn intermediates_on(scene: &Scene, modes: &[Mode], beta: &[f64]) -> IdealIntermediates {
    let nk = scene.received();
    let g2 = scene.gamma() * scene.gamma();
    let x = scene.x();
    let b2 = || beta.iter().map(|b| b * b);
    let sgn = |md: &Mode| md.parity();
    let t = |md: &Mode| f64::from(md.order()) - x * x;
    let total = sum(b2());
    let alternating = sum(modes.iter().zip(b2()).map(|(md, v)| sgn(md) * v));
    let a_plus = 2.0 / (1.0 + g2) + 2.0 * nk * total;
    let a_minus = 2.0 / (1.0 - g2) + 2.0 * nk * total;
    let b = 2.0 * nk * alternating;
    let f_term = sum(modes.iter().zip(b2()).map(|(md, v)| t(md).powi(2) * v)) / (x * x);
    let s1 = sum(modes.iter().zip(b2()).map(|(md, v)| sgn(md) * t(md) * v)) / x;
    let s2 = sum(modes.iter().zip(b2()).map(|(md, v)| t(md) * v)) / x;
    let det = a_plus * a_minus - b * b;
    IdealIntermediates {
        a_plus,
        a_minus,
        b,
        f_term,
        delta1: a_plus * s1 * s1 / det,
        delta2: -2.0 * b * s1 * s2 / det,
        delta3: a_minus * s2 * s2 / det,
        s1,
        s2,
    }
}

/// Intermediate sums on the reduced basis for `q_max`.
pub fn intermediates(scene: &Scene, q_max: u32) -> Result<IdealIntermediates> {
    let (basis, b) = ideal_basis(scene, q_max)?;
    Ok(intermediates_on(scene, basis.modes(), &b))
}

/// Closed-form inverse covariance on the reduced basis.
pub fn analytic_inverse(scene: &Scene, q_max: u32) -> Result<(ModeBasis, DMatrix<f64>)> {
    let (basis, b) = ideal_basis(scene, q_max)?;
    let it = intermediates_on(scene, basis.modes(), &b);
    let nk = scene.received();
    let det = it.determinant();
    let modes = basis.modes();
    let inv = DMatrix::from_fn(modes.len(), modes.len(), |k, l| {
        let (sk, sl) = (modes[k].parity(), modes[l].parity());
        let corr = (sk * sl * it.a_plus - it.b * (sk + sl) + it.a_minus) / det;
        let diag = if k == l { 1.0 / (2.0 * nk * b[k] * b[k]) } else { 0.0 };
        diag - corr
    });
    Ok((basis, inv))
}

/// Closed-form derivative vector `D_k = (2Nκ/wx) t_k β_k²`.
pub fn derivative_ideal(scene: &Scene, q_max: u32) -> Result<(ModeBasis, DVector<f64>)> {
    let (basis, b) = ideal_basis(scene, q_max)?;
    let x = scene.x();
    let pre = 2.0 * scene.received() / (scene.waist() * x);
    let d = DVector::from_fn(basis.len(), |k, _| {
        pre * (f64::from(basis.modes()[k].order()) - x * x) * b[k] * b[k]
    });
    Ok((basis, d))
}

/// Finite-`Q` ideal sensitivity.
pub fn sensitivity_ideal(scene: &Scene, q_max: u32) -> Result<f64> {
    let it = intermediates(scene, q_max)?;
    let nk = scene.received();
    let w2 = scene.waist() * scene.waist();
    Ok(2.0 * nk / w2 * (it.f_term - 2.0 * nk * (it.delta1 + it.delta2 + it.delta3)))
}

/// `Q → ∞` limit of the ideal sensitivity. Independent of `θ`.
pub fn sensitivity_asymptotic(scene: &Scene) -> f64 {
    let nk = scene.received();
    let g2 = scene.gamma() * scene.gamma();
    let x2 = scene.x() * scene.x();
    let e = (-4.0 * x2).exp();
    let num = 4.0 * (1.0 - g2) * nk * e * x2 * ((1.0 + g2) * nk + 1.0);
    let den = (1.0 - g2 * g2) * nk * nk * (-(-4.0 * x2).exp_m1()) + 2.0 * nk + 1.0;
    2.0 * nk / (scene.waist() * scene.waist()) * (1.0 - num / den)
}

/// Quantum Fisher information for two equally bright thermal sources,
/// evaluated from its own closed form (ignores `γ`).
pub fn qfi_equal_brightness(scene: &Scene) -> f64 {
    let nk = scene.received();
    let x2 = scene.x() * scene.x();
    let e = (-4.0 * x2).exp();
    let w2 = scene.waist() * scene.waist();
    2.0 * nk / w2 - 8.0 * nk * nk * x2 * (nk + 1.0) * e / (w2 * ((nk + 1.0).powi(2) - nk * nk * e))
}

/// Unit-norm optimal coefficients on the reduced basis, largest-magnitude
/// entry positive.
pub fn coefficients_ideal(scene: &Scene, q_max: u32) -> Result<(ModeBasis, DVector<f64>)> {
    let (basis, b) = ideal_basis(scene, q_max)?;
    let it = intermediates_on(scene, basis.modes(), &b);
    let nk = scene.received();
    let x = scene.x();
    let det = it.determinant();
    // One value per order so that equal orders give bitwise equal entries.
    let by_order: Vec<f64> = (0..=2 * q_max)
        .map(|order| {
            let s = if order % 2 == 0 { 1.0 } else { -1.0 };
            let t = f64::from(order) - x * x;
            t / x - 2.0 * nk * ((s * it.a_plus - it.b) * it.s1 - (s * it.b - it.a_minus) * it.s2) / det
        })
        .collect();
    let raw = DVector::from_fn(basis.len(), |k, _| by_order[basis.modes()[k].order() as usize]);
    let norm = raw.norm();
    let imax = raw.iamax();
    let sign = if raw[imax] < 0.0 { -1.0 } else { 1.0 };
    Ok((basis, raw * (sign / norm)))
}
