//! First and second moments of photon counts in demultiplexed modes.
//!
//! The two sources are independent thermal fields with mean photon numbers
//! `a = (1-γ)Nκ` (image at `+r₀`) and `b = (1+γ)Nκ` (image at `-r₀`). The
//! field in measured mode `k` is `α_k = f_{+,k} A + f_{-,k} B`, and counts are
//! Poissonian given `α`. This gives
//!
//! ```text
//! N_k  = a|f_{+,k}|² + b|f_{-,k}|² + N_k^dc
//! Γ_kl = δ_kl N_k + |a f_{+,k} f*_{+,l} + b f_{-,k} f*_{-,l}|² + δ_kl N_k^dc (N_k^dc + 1)
//! D_k  = 2 Re(a f*_{+,k} ∂f_{+,k} + b f*_{-,k} ∂f_{-,k})
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hg_overlap::{overlap_table, FieldOverlaps};
use crate::noise::{apply_crosstalk, CrosstalkMatrix, DarkCounts};
use crate::scene::{Axis, Misalignment, Mode, ModeBasis, Scene};

/// Means, covariance and separation derivative of a set of photon counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentData {
    pub means: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub deriv: DVector<f64>,
    pub basis: ModeBasis,
}

impl MomentData {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Keeps the rows and columns at `idx` (in order).
    pub fn restrict(&self, idx: &[usize], basis: ModeBasis) -> Self {
        let n = idx.len();
        Self {
            means: DVector::from_fn(n, |i, _| self.means[idx[i]]),
            cov: DMatrix::from_fn(n, n, |i, j| self.cov[(idx[i], idx[j])]),
            deriv: DVector::from_fn(n, |i, _| self.deriv[idx[i]]),
            basis,
        }
    }
}

/// Imperfections of the demultiplexer and detectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    pub crosstalk: Option<CrosstalkMatrix>,
    pub dark: Option<DarkCounts>,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn with_crosstalk(mut self, ct: CrosstalkMatrix) -> Self {
        self.crosstalk = Some(ct);
        self
    }

    pub fn with_dark(mut self, dark: DarkCounts) -> Self {
        self.dark = Some(dark);
        self
    }

    pub fn has_crosstalk(&self) -> bool {
        self.crosstalk.as_ref().is_some_and(|c| !c.is_identity())
    }

    pub fn has_dark_counts(&self) -> bool {
        self.dark.as_ref().is_some_and(|d| !d.is_zero())
    }

    /// Dark-count mean of `mode`, indexed through the full basis.
    fn dark_mean(&self, basis: &ModeBasis, mode: Mode) -> f64 {
        self.dark.as_ref().map_or(0.0, |d| d.per_mode_mean()[basis.full_index(mode)])
    }
}

/// Overlaps of the two images with the measured modes, including
/// misalignment and crosstalk.
pub fn field_overlaps(
    scene: &Scene,
    mis: &Misalignment,
    noise: &NoiseModel,
    basis: &ModeBasis,
) -> Result<FieldOverlaps> {
    let full = ModeBasis::full(basis.q_max());
    if let Some(dark) = &noise.dark {
        if dark.dim() != full.len() {
            return Err(Error::DimensionMismatch {
                expected: full.len(),
                found: dark.dim(),
                context: "dark counts vs. full basis size",
            });
        }
    }
    match &noise.crosstalk {
        Some(ct) => {
            let table: FieldOverlaps = overlap_table(scene, mis, &full).into();
            let mixed = apply_crosstalk(ct, &table)?;
            Ok(mixed.select(basis).expect("active modes lie in the full basis"))
        }
        None => Ok(overlap_table(scene, mis, basis).into()),
    }
}

/// Photon-count moments of the active modes of `basis`.
pub fn demux_moments(
    scene: &Scene,
    mis: &Misalignment,
    noise: &NoiseModel,
    basis: &ModeBasis,
) -> Result<MomentData> {
    let f = field_overlaps(scene, mis, noise, basis)?;
    let dark: Vec<f64> = basis.modes().iter().map(|&md| noise.dark_mean(basis, md)).collect();
    Ok(moments_from_overlaps(scene, &f, &dark))
}

/// Assembles [`MomentData`] from complex overlaps and per-mode dark-count
/// means (aligned with `f.basis`).
pub fn moments_from_overlaps(scene: &Scene, f: &FieldOverlaps, dark: &[f64]) -> MomentData {
    let a = scene.plus_photons();
    let b = scene.minus_photons();
    let k = f.basis.len();
    let means = DVector::from_fn(k, |i, _| {
        a * f.f_plus[i].norm_sqr() + b * f.f_minus[i].norm_sqr() + dark[i]
    });
    let deriv = DVector::from_fn(k, |i, _| {
        2.0 * (a * (f.f_plus[i].conj() * f.df_plus[i]).re + b * (f.f_minus[i].conj() * f.df_minus[i]).re)
    });
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let c: Complex64 =
                f.f_plus[i] * f.f_plus[j].conj() * a + f.f_minus[i] * f.f_minus[j].conj() * b;
            let v = c.norm_sqr();
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
        cov[(i, i)] += means[i] + dark[i] * dark[i];
    }
    MomentData {
        means,
        cov,
        deriv,
        basis: f.basis.clone(),
    }
}

/// The photon-number-quadratic part of the covariance split by powers of
/// `γ`: `Γ⁰ + γΓ¹ + γ²Γ²` (dark-count terms excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceComponents {
    pub order0: DMatrix<f64>,
    pub order1: DMatrix<f64>,
    pub order2: DMatrix<f64>,
}

impl CovarianceComponents {
    pub fn combine(&self, gamma: f64) -> DMatrix<f64> {
        &self.order0 + &self.order1 * gamma + &self.order2 * (gamma * gamma)
    }
}

/// `Γ⁰`, `Γ¹`, `Γ²` with `P = f_{+,k} f*_{+,l}` and `Q = f_{-,k} f*_{-,l}`:
///
/// ```text
/// Γ⁰ = (Nκ)²(|P|² + |Q|² + 2 Re PQ*) + δ_kl Nκ(|f_{+,k}|² + |f_{-,k}|²)
/// Γ¹ = 2(Nκ)²(|Q|² - |P|²)           - δ_kl Nκ(|f_{+,k}|² - |f_{-,k}|²)
/// Γ² = (Nκ)²(|P|² + |Q|² - 2 Re PQ*)
/// ```
pub fn covariance_components(scene: &Scene, f: &FieldOverlaps) -> CovarianceComponents {
    let nk = scene.received();
    let k = f.basis.len();
    let mut g0 = DMatrix::zeros(k, k);
    let mut g1 = DMatrix::zeros(k, k);
    let mut g2 = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let p = f.f_plus[i] * f.f_plus[j].conj();
            let q = f.f_minus[i] * f.f_minus[j].conj();
            let (pp, qq, pq) = (p.norm_sqr(), q.norm_sqr(), (p * q.conj()).re);
            g0[(i, j)] = nk * nk * (pp + qq + 2.0 * pq);
            g1[(i, j)] = 2.0 * nk * nk * (qq - pp);
            g2[(i, j)] = nk * nk * (pp + qq - 2.0 * pq);
        }
        let (fp, fm) = (f.f_plus[i].norm_sqr(), f.f_minus[i].norm_sqr());
        g0[(i, i)] += nk * (fp + fm);
        g1[(i, i)] -= nk * (fp - fm);
    }
    CovarianceComponents {
        order0: g0,
        order1: g1,
        order2: g2,
    }
}

/// Axis along which both images have exactly vanishing transverse
/// displacement, so that every mode excited across it has zero overlap.
fn structural_axis(scene: &Scene, mis: &Misalignment) -> Option<Option<Axis>> {
    let (c, s) = scene.direction();
    let (cs, ss) = mis.direction();
    let x = scene.x();
    let shift = 2.0 * mis.x_s(scene.waist());
    let ax_zero = x * c == 0.0 && shift * cs == 0.0;
    let ay_zero = x * s == 0.0 && shift * ss == 0.0;
    match (ax_zero, ay_zero) {
        (true, true) => Some(None),
        (false, true) => Some(Some(Axis::X)),
        (true, false) => Some(Some(Axis::Y)),
        (false, false) => None,
    }
}

/// The modes that carry light in the given configuration.
///
/// When both images lie exactly on a coordinate axis (and there is no
/// crosstalk to spread light off it) the modes excited across that axis have
/// identically zero means, derivatives and covariances; they are removed
/// unless dark counts make them non-degenerate. Returns `DegenerateScene`
/// when no informative mode would remain.
pub fn reduced_basis(
    scene: &Scene,
    mis: &Misalignment,
    noise: &NoiseModel,
    basis: &ModeBasis,
) -> Result<ModeBasis> {
    if noise.has_crosstalk() {
        return Ok(basis.clone());
    }
    let Some(axis) = structural_axis(scene, mis) else {
        return Ok(basis.clone());
    };
    let keep = |md: &Mode| match axis {
        None => md.order() == 0,
        Some(Axis::X) => md.m == 0,
        Some(Axis::Y) => md.n == 0,
    };
    if basis
        .modes()
        .iter()
        .any(|md| !keep(md) && noise.dark_mean(basis, *md) > 0.0)
    {
        return Ok(basis.clone());
    }
    if axis.is_none() {
        return Err(Error::DegenerateScene(
            "both images coincide with the mode centre; the separation is not identifiable".into(),
        ));
    }
    let kept: Vec<Mode> = basis.modes().iter().copied().filter(keep).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateScene("no measured mode carries light".into()));
    }
    ModeBasis::from_modes(basis.q_max(), kept)
}

/// Drops structurally zero modes from `data` (see [`reduced_basis`]).
pub fn reduce_degenerate(
    data: &MomentData,
    scene: &Scene,
    mis: &Misalignment,
    noise: &NoiseModel,
) -> Result<MomentData> {
    let reduced = reduced_basis(scene, mis, noise, &data.basis)?;
    if reduced == data.basis {
        return Ok(data.clone());
    }
    let idx: Vec<usize> = reduced
        .modes()
        .iter()
        .map(|&md| data.basis.position(md).expect("reduced basis is a subset"))
        .collect();
    Ok(data.restrict(&idx, reduced))
}

/// [`demux_moments`] on the reduced basis.
pub fn demux_moments_reduced(
    scene: &Scene,
    mis: &Misalignment,
    noise: &NoiseModel,
    basis: &ModeBasis,
) -> Result<MomentData> {
    let reduced = reduced_basis(scene, mis, noise, basis)?;
    demux_moments(scene, mis, noise, &reduced)
}
