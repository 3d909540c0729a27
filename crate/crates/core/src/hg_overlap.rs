//! Overlaps between displaced Gaussian PSF images and Hermite-Gauss modes.
//!
//! For a PSF `u₀(r) = sqrt(2/πw²) exp(-|r|²/w²)` the overlap of the mode
//! `u_nm` with the image displaced to `a` is that of a harmonic-oscillator
//! number state with a coherent state of amplitude `a/w`:
//!
//! ```text
//! β_nm(a) = exp(-|a|²/2w²) (a_x/w)^n (a_y/w)^m / sqrt(n! m!)
//! ```
//!
//! The two source images sit at `±r₀ - r_s`, where `r_s` is the misalignment
//! shift, so `f_{±,k} = β_nm(±r₀ - r_s)`.

use num_complex::Complex64;

use crate::numerics::scaled_power;
use crate::scene::{Misalignment, Mode, ModeBasis, Scene};

/// Which source image an overlap refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Image centred at `+r₀ - r_s`.
    Plus,
    /// Image centred at `-r₀ - r_s`.
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Overlap `δ = exp(-d²/2w²)` between the two source images.
pub fn overlap_delta(scene: &Scene) -> f64 {
    let x = scene.x();
    (-2.0 * x * x).exp()
}

/// Displacement `±r₀ - r_s` of a source image, in units of `w`.
pub fn displacement(scene: &Scene, mis: &Misalignment, sign: Sign) -> [f64; 2] {
    let (c, s) = scene.direction();
    let (cs, ss) = mis.direction();
    let x = scene.x();
    let shift = 2.0 * mis.x_s(scene.waist());
    let sg = sign.value();
    [sg * x * c - shift * cs, sg * x * s - shift * ss]
}

/// `β_nm` at a displacement `(ax, ay)` given in units of `w`.
pub fn beta_at(mode: Mode, ax: f64, ay: f64) -> f64 {
    (-0.5 * (ax * ax + ay * ay)).exp() * scaled_power(ax, mode.n) * scaled_power(ay, mode.m)
}

/// Gradient of [`beta_at`] with respect to `(ax, ay)`.
fn beta_gradient(mode: Mode, ax: f64, ay: f64) -> (f64, f64) {
    let g = (-0.5 * (ax * ax + ay * ay)).exp();
    let px = scaled_power(ax, mode.n);
    let py = scaled_power(ay, mode.m);
    // d/da [a^n / sqrt(n!)] = sqrt(n) a^(n-1) / sqrt((n-1)!)
    let dpx = if mode.n == 0 {
        0.0
    } else {
        f64::from(mode.n).sqrt() * scaled_power(ax, mode.n - 1)
    };
    let dpy = if mode.m == 0 {
        0.0
    } else {
        f64::from(mode.m).sqrt() * scaled_power(ay, mode.m - 1)
    };
    (g * py * (dpx - ax * px), g * px * (dpy - ay * py))
}

/// `β_nm(±r₀ - r_s)` for the given scene.
pub fn beta(mode: Mode, scene: &Scene, mis: &Misalignment, sign: Sign) -> f64 {
    let [ax, ay] = displacement(scene, mis, sign);
    beta_at(mode, ax, ay)
}

/// `∂β_nm(±r₀ - r_s)/∂d`, differentiated analytically.
pub fn beta_d_derivative(mode: Mode, scene: &Scene, mis: &Misalignment, sign: Sign) -> f64 {
    let [ax, ay] = displacement(scene, mis, sign);
    let (gx, gy) = beta_gradient(mode, ax, ay);
    let (c, s) = scene.direction();
    // a = ±(d/2w)(cos θ, sin θ) - r_s/w
    sign.value() * (c * gx + s * gy) / (2.0 * scene.waist())
}

/// Real overlaps `f_{±,k}` and their separation derivatives on a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapTable {
    pub basis: ModeBasis,
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub df_plus: Vec<f64>,
    pub df_minus: Vec<f64>,
}

/// Fills `f_{±,k} = β_nm(±r₀ - r_s)` and `∂f_{±,k}/∂d` for every active mode.
pub fn overlap_table(scene: &Scene, mis: &Misalignment, basis: &ModeBasis) -> OverlapTable {
    let modes = basis.modes();
    let eval = |sign: Sign| -> (Vec<f64>, Vec<f64>) {
        modes
            .iter()
            .map(|&md| (beta(md, scene, mis, sign), beta_d_derivative(md, scene, mis, sign)))
            .unzip()
    };
    let (f_plus, df_plus) = eval(Sign::Plus);
    let (f_minus, df_minus) = eval(Sign::Minus);
    OverlapTable {
        basis: basis.clone(),
        f_plus,
        f_minus,
        df_plus,
        df_minus,
    }
}

/// Complex overlaps of the source images with the actual measurement modes.
///
/// Crosstalk turns the real [`OverlapTable`] into complex amplitudes; the
/// noiseless case is the same type with zero imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOverlaps {
    pub basis: ModeBasis,
    pub f_plus: Vec<Complex64>,
    pub f_minus: Vec<Complex64>,
    pub df_plus: Vec<Complex64>,
    pub df_minus: Vec<Complex64>,
}

impl From<OverlapTable> for FieldOverlaps {
    fn from(t: OverlapTable) -> Self {
        let c = |v: Vec<f64>| v.into_iter().map(|r| Complex64::new(r, 0.0)).collect();
        Self {
            basis: t.basis,
            f_plus: c(t.f_plus),
            f_minus: c(t.f_minus),
            df_plus: c(t.df_plus),
            df_minus: c(t.df_minus),
        }
    }
}

impl FieldOverlaps {
    /// Restricts the table to the modes of `basis`, which must be a subset
    /// of the current one.
    pub fn select(&self, basis: &ModeBasis) -> Option<Self> {
        let idx: Option<Vec<usize>> = basis.modes().iter().map(|&md| self.basis.position(md)).collect();
        let idx = idx?;
        let pick = |v: &[Complex64]| idx.iter().map(|&i| v[i]).collect();
        Some(Self {
            basis: basis.clone(),
            f_plus: pick(&self.f_plus),
            f_minus: pick(&self.f_minus),
            df_plus: pick(&self.df_plus),
            df_minus: pick(&self.df_minus),
        })
    }
}
