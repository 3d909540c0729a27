//! Pixelized direct imaging.
//!
//! The intensity is `I(r) = (1+γ)Nκ|u₀(r + r₀)|² + (1-γ)Nκ|u₀(r - r₀)|²`.
//! Integrated over pixel `p` this gives
//!
//! ```text
//! Φ_p = ∫_p |u₀(r + r₀)|²           (image at -r₀)
//! Ψ_p = ∫_p |u₀(r - r₀)|²           (image at +r₀)
//! Ξ_p = ∫_p u₀(r + r₀) u₀(r - r₀) = δ ∫_p |u₀(r)|²
//! I_p = bΦ_p + aΨ_p,   a = (1-γ)Nκ,  b = (1+γ)Nκ
//! ```
//!
//! The pixel covariance is `Γ = diag(I) + UUᵀ` with the three columns
//! `U = [bΦ, aΨ, Nκ sqrt(2(1-γ²)) Ξ]`, so `M = DᵀΓ⁻¹D` only needs the
//! 3×3 Woodbury core `1₃ + UᵀI⁻¹U`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::hg_overlap::overlap_delta;
use crate::moments::SensitivityResult;
use crate::numerics::{erf_diff, CompensatedSum};
use crate::scene::Scene;

/// Pixels whose mean count is below this are left out of the solve.
pub const INTENSITY_FLOOR: f64 = 1e-30;

/// Square detector centred on the source centroid, split into `n_p × n_p`
/// equal pixels. Pixel `k = i n_p + j` has x-index `i` and y-index `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    n_p: usize,
    half_side: f64,
}

impl PixelGrid {
    /// `half_side` in units of the waist.
    pub fn new(n_p: usize, half_side: f64) -> Result<Self> {
        if n_p == 0 {
            return Err(Error::Domain("pixel grid needs at least one segment".into()));
        }
        if !(half_side.is_finite() && half_side > 0.0) {
            return Err(Error::Domain(format!("detector half side must be > 0, got {half_side}")));
        }
        Ok(Self { n_p, half_side })
    }

    /// Detector of side `6w`.
    pub fn standard(n_p: usize) -> Result<Self> {
        Self::new(n_p, 3.0)
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    pub fn len(&self) -> usize {
        self.n_p * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Half width of a pixel, in units of `w`.
    pub fn half_size(&self) -> f64 {
        self.half_side / self.n_p as f64
    }

    /// Centre of segment `i` along either axis, in units of `w`.
    pub fn center(&self, i: usize) -> f64 {
        -self.half_side + (i as f64 + 0.5) * 2.0 * self.half_size()
    }

    /// Edges `(lo, hi)` of segment `i`, in units of `w`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        let c = self.center(i);
        (c - self.half_size(), c + self.half_size())
    }
}

/// Per-pixel overlaps, intensities and derivatives, indexed `k = i n_p + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectImagingMoments {
    pub grid: PixelGrid,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub xi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub dpsi: Vec<f64>,
    pub intensities: Vec<f64>,
    pub deriv: Vec<f64>,
    /// Columns of the low-rank covariance factor.
    pub lowrank_u: Vec<[f64; 3]>,
}

/// Fraction of a unit-waist Gaussian intensity centred at `c` on `[lo, hi]`
/// and its derivative in `c`. Coordinates in units of `w`.
fn segment(lo: f64, hi: f64, c: f64) -> (f64, f64) {
    let s = std::f64::consts::SQRT_2;
    let mass = 0.5 * erf_diff(s * (lo - c), s * (hi - c));
    let slope = s / std::f64::consts::PI.sqrt()
        * ((-2.0 * (lo - c).powi(2)).exp() - (-2.0 * (hi - c).powi(2)).exp());
    (mass, slope)
}

/// Evaluates Φ, Ψ, Ξ and the intensity moments on every pixel.
pub fn pixel_overlaps(scene: &Scene, grid: &PixelGrid) -> DirectImagingMoments {
    let n = grid.n_p();
    let (c, s) = scene.direction();
    let x = scene.x();
    let w = scene.waist();
    let delta = overlap_delta(scene);
    // centre of the +r₀ image is (x c, x s) in units of w; dc/dd = ±(c, s)/2w
    let edges: Vec<(f64, f64)> = (0..n).map(|i| grid.edges(i)).collect();
    let axis = |centre: f64| -> Vec<(f64, f64)> { edges.iter().map(|&(lo, hi)| segment(lo, hi, centre)).collect() };
    let plus_x = axis(x * c);
    let plus_y = axis(x * s);
    let minus_x = axis(-x * c);
    let minus_y = axis(-x * s);
    let centred = axis(0.0);

    let a = scene.plus_photons();
    let b = scene.minus_photons();
    let nk = scene.received();
    let cross = nk * (2.0 * (1.0 - scene.gamma() * scene.gamma())).sqrt();
    let len = grid.len();
    let mut out = DirectImagingMoments {
        grid: *grid,
        phi: Vec::with_capacity(len),
        psi: Vec::with_capacity(len),
        xi: Vec::with_capacity(len),
        dphi: Vec::with_capacity(len),
        dpsi: Vec::with_capacity(len),
        intensities: Vec::with_capacity(len),
        deriv: Vec::with_capacity(len),
        lowrank_u: Vec::with_capacity(len),
    };
    for i in 0..n {
        for j in 0..n {
            let (px, dpx) = plus_x[i];
            let (py, dpy) = plus_y[j];
            let (mx, dmx) = minus_x[i];
            let (my, dmy) = minus_y[j];
            let psi = px * py;
            let phi = mx * my;
            let dpsi = (c * dpx * py + s * px * dpy) / (2.0 * w);
            let dphi = -(c * dmx * my + s * mx * dmy) / (2.0 * w);
            let xi = delta * centred[i].0 * centred[j].0;
            out.phi.push(phi);
            out.psi.push(psi);
            out.xi.push(xi);
            out.dphi.push(dphi);
            out.dpsi.push(dpsi);
            out.intensities.push(b * phi + a * psi);
            out.deriv.push(b * dphi + a * dpsi);
            out.lowrank_u.push([b * phi, a * psi, cross * xi]);
        }
    }
    out
}

impl DirectImagingMoments {
    /// Indices of pixels above [`INTENSITY_FLOOR`].
    pub fn kept(&self, floor: f64) -> Vec<usize> {
        (0..self.intensities.len()).filter(|&k| self.intensities[k] >= floor).collect()
    }

    /// Dense covariance and derivative on the kept pixels. Intended for
    /// small grids.
    pub fn dense(&self, floor: f64) -> (DMatrix<f64>, DVector<f64>) {
        let idx = self.kept(floor);
        let n = idx.len();
        let cov = DMatrix::from_fn(n, n, |p, q| {
            let (u, v) = (self.lowrank_u[idx[p]], self.lowrank_u[idx[q]]);
            let diag = if p == q { self.intensities[idx[p]] } else { 0.0 };
            diag + u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
        });
        let d = DVector::from_fn(n, |p, _| self.deriv[idx[p]]);
        (cov, d)
    }
}

/// Optimal direct-imaging sensitivity through the Woodbury core.
pub fn di_sensitivity(scene: &Scene, grid: &PixelGrid) -> Result<SensitivityResult> {
    di_sensitivity_with_floor(scene, grid, INTENSITY_FLOOR)
}

/// As [`di_sensitivity`] with an explicit intensity floor.
pub fn di_sensitivity_with_floor(scene: &Scene, grid: &PixelGrid, floor: f64) -> Result<SensitivityResult> {
    let mo = pixel_overlaps(scene, grid);
    woodbury_sensitivity(&mo, floor)
}

/// `M = Σ D²/I - vᵀ(1₃ + UᵀI⁻¹U)⁻¹v` with `v = UᵀI⁻¹D`.
pub fn woodbury_sensitivity(mo: &DirectImagingMoments, floor: f64) -> Result<SensitivityResult> {
    let idx = mo.kept(floor);
    if idx.is_empty() {
        return Err(Error::DegenerateScene("no pixel receives light".into()));
    }
    let mut diag = CompensatedSum::new();
    let mut core = Matrix3::<f64>::identity();
    let mut v = Vector3::<f64>::zeros();
    for &k in &idx {
        let inv = 1.0 / mo.intensities[k];
        let d = mo.deriv[k];
        let u = Vector3::from(mo.lowrank_u[k]);
        diag.add(d * d * inv);
        core += u * u.transpose() * inv;
        v += u * (d * inv);
    }
    let chol = core.cholesky().ok_or(Error::SingularCore)?;
    let y = chol.solve(&v);
    let m_value = (diag.value() - v.dot(&y)).max(0.0);

    // Γ⁻¹D = I⁻¹D - I⁻¹U y, zero on dropped pixels.
    let mut raw = DVector::zeros(mo.intensities.len());
    for &k in &idx {
        let u = Vector3::from(mo.lowrank_u[k]);
        raw[k] = (mo.deriv[k] - u.dot(&y)) / mo.intensities[k];
    }
    let norm = raw.norm();
    let (coeffs, eta) = if norm > 0.0 && norm.is_finite() {
        let sign = if raw[raw.iamax()] < 0.0 { -1.0 } else { 1.0 };
        (raw * (sign / norm), sign / norm)
    } else {
        (DVector::zeros(mo.intensities.len()), 0.0)
    };
    let eig = core.symmetric_eigen().eigenvalues;
    Ok(SensitivityResult {
        m_value,
        coeffs,
        eta,
        condition: eig.max() / eig.min(),
    })
}

/// Small-separation expansion `(2Nκ/w²)(γ² + 4x²(2 - 5γ² + 3γ⁴))`.
pub fn di_small_separation(scene: &Scene) -> f64 {
    let g2 = scene.gamma() * scene.gamma();
    let x2 = scene.x() * scene.x();
    2.0 * scene.received() / (scene.waist() * scene.waist()) * (g2 + 4.0 * x2 * (2.0 - 5.0 * g2 + 3.0 * g2 * g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn scene(x: f64, gamma: f64, nk: f64) -> Scene {
        Scene::new(2.0 * x, FRAC_PI_4, nk, gamma, 1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_tiles_detector() {
        let g = PixelGrid::standard(50).unwrap();
        assert_eq!(g.edges(0).0, -3.0);
        assert!((g.edges(49).1 - 3.0).abs() < 1e-14);
        for i in 0..49 {
            assert!((g.edges(i).1 - g.edges(i + 1).0).abs() < 1e-14);
        }
        assert!(PixelGrid::new(0, 3.0).is_err());
    }

    #[test]
    fn large_detector_collects_everything() {
        let g = PixelGrid::new(40, 6.0).unwrap();
        for &x in &[0.0, 0.3, 1.0] {
            let mo = pixel_overlaps(&scene(x, 0.0, 1.0), &g);
            let total: f64 = mo.phi.iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn coincident_sources() {
        let mo = pixel_overlaps(&scene(0.0, 0.3, 1.0), &PixelGrid::standard(6).unwrap());
        for k in 0..36 {
            assert_eq!(mo.phi[k], mo.psi[k]);
            assert_eq!(mo.phi[k], mo.xi[k]);
        }
    }

    #[test]
    fn small_separation_law() {
        assert!((di_small_separation(&scene(0.1, 0.0, 1.5)) - 3.0 * 8.0 * 0.01).abs() < 1e-14);
        assert!((di_small_separation(&scene(0.0, 0.5, 1.5)) - 3.0 * 0.25).abs() < 1e-14);
    }

    #[test]
    fn intensity_floor_is_immaterial() {
        let s = scene(0.4, 0.25, 1.5);
        let g = PixelGrid::standard(30).unwrap();
        let base = di_sensitivity_with_floor(&s, &g, 1e-30).unwrap().m_value;
        for floor in [1e-20, 1e-25] {
            let m = di_sensitivity_with_floor(&s, &g, floor).unwrap().m_value;
            assert!((m - base).abs() < 1e-10 * base);
        }
    }
}
