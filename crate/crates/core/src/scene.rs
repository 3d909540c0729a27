//! Physical configuration of the two-source imaging problem.
//!
//! Lengths are accepted in physical units and reduced once to units of the
//! PSF waist `w`. The canonical dimensionless separation is
//! `x = d / (2w)` and the misalignment shift reduces to `x_s = d_s / (2w)`.
//!
//! # Brightness convention
//!
//! The source whose image is centred at `+r₀` (with `r₀ = (d/2)(cos θ, sin θ)`)
//! emits `(1 - γ)N` photons on average, the source at `-r₀` emits
//! `(1 + γ)N`. Every mean photon number, covariance and intensity in this
//! crate follows this assignment.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two thermal point sources imaged through a Gaussian PSF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    d: f64,
    theta: f64,
    n_mean: f64,
    gamma: f64,
    kappa: f64,
    waist: f64,
}

impl Scene {
    /// Validates and builds a scene.
    ///
    /// `d` is the source separation, `theta` the alignment angle in radians,
    /// `n_mean` the per-source mean photon number `N`, `gamma` the brightness
    /// imbalance, `kappa` the transmissivity and `waist` the PSF waist.
    pub fn new(d: f64, theta: f64, n_mean: f64, gamma: f64, kappa: f64, waist: f64) -> Result<Self> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::Domain(format!("separation must be finite and >= 0, got {d}")));
        }
        if !theta.is_finite() {
            return Err(Error::Domain(format!("angle must be finite, got {theta}")));
        }
        if !(n_mean.is_finite() && n_mean > 0.0) {
            return Err(Error::Domain(format!("mean photon number must be > 0, got {n_mean}")));
        }
        if !(gamma > -1.0 && gamma < 1.0) {
            return Err(Error::Domain(format!("brightness imbalance must lie in (-1, 1), got {gamma}")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::Domain(format!("transmissivity must lie in (0, 1], got {kappa}")));
        }
        if !(waist.is_finite() && waist > 0.0) {
            return Err(Error::Domain(format!("waist must be > 0, got {waist}")));
        }
        Ok(Self { d, theta, n_mean, gamma, kappa, waist })
    }

    /// Scene with the same optics and sources but separation `d`.
    pub fn with_separation(&self, d: f64) -> Result<Self> {
        Self::new(d, self.theta, self.n_mean, self.gamma, self.kappa, self.waist)
    }

    /// Scene whose dimensionless separation is `x = d / 2w`.
    pub fn with_x(&self, x: f64) -> Result<Self> {
        self.with_separation(2.0 * x * self.waist)
    }

    /// Scene with received photon number `Nκ` set to `received`, keeping κ.
    pub fn with_received(&self, received: f64) -> Result<Self> {
        Self::new(self.d, self.theta, received / self.kappa, self.gamma, self.kappa, self.waist)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.d, self.theta, self.n_mean, gamma, self.kappa, self.waist)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.d, theta, self.n_mean, self.gamma, self.kappa, self.waist)
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_mean(&self) -> f64 {
        self.n_mean
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    /// Dimensionless separation `x = d / 2w`.
    pub fn x(&self) -> f64 {
        self.d / (2.0 * self.waist)
    }

    /// Received photon number per source, `Nκ`.
    pub fn received(&self) -> f64 {
        self.n_mean * self.kappa
    }

    /// Mean received photons of the source imaged at `+r₀`.
    pub fn plus_photons(&self) -> f64 {
        (1.0 - self.gamma) * self.received()
    }

    /// Mean received photons of the source imaged at `-r₀`.
    pub fn minus_photons(&self) -> f64 {
        (1.0 + self.gamma) * self.received()
    }

    /// `(cos θ, sin θ)` with exact zeros and units at multiples of π/2.
    pub fn direction(&self) -> (f64, f64) {
        unit_direction(self.theta)
    }

    /// Axis the sources lie on, if `θ` is a multiple of π/2.
    pub fn axis_alignment(&self) -> Option<Axis> {
        quarter_turns(self.theta).map(|k| if k % 2 == 0 { Axis::X } else { Axis::Y })
    }
}

/// Transverse offset of the demultiplexer axis from the source centroid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Misalignment {
    d_s: f64,
    theta_s: f64,
}

impl Misalignment {
    pub fn new(d_s: f64, theta_s: f64) -> Result<Self> {
        if !(d_s.is_finite() && d_s >= 0.0) {
            return Err(Error::Domain(format!("shift must be finite and >= 0, got {d_s}")));
        }
        if !theta_s.is_finite() {
            return Err(Error::Domain(format!("shift angle must be finite, got {theta_s}")));
        }
        Ok(Self { d_s, theta_s })
    }

    /// Perfect alignment.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn d_s(&self) -> f64 {
        self.d_s
    }

    pub fn theta_s(&self) -> f64 {
        self.theta_s
    }

    pub fn is_aligned(&self) -> bool {
        self.d_s == 0.0
    }

    /// Dimensionless shift `x_s = d_s / 2w`.
    pub fn x_s(&self, waist: f64) -> f64 {
        self.d_s / (2.0 * waist)
    }

    pub fn direction(&self) -> (f64, f64) {
        unit_direction(self.theta_s)
    }
}

/// Coordinate axis along which the sources are aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A Hermite-Gauss mode `u_nm`: `n` counts nodes along x, `m` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub n: u32,
    pub m: u32,
}

impl Mode {
    pub fn new(n: u32, m: u32) -> Self {
        Self { n, m }
    }

    /// Total order `n + m`.
    pub fn order(&self) -> u32 {
        self.n + self.m
    }

    /// `(-1)^(n+m)`.
    pub fn parity(&self) -> f64 {
        if self.order().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.n, self.m)
    }
}

/// The measured subset of the `(Q+1)²` Hermite-Gauss modes with
/// `0 <= n, m <= Q`.
///
/// Modes are kept in row-major order (`n` outer, `m` inner). That order fixes
/// the index layout of every vector and matrix in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeBasis {
    q_max: u32,
    active: Vec<Mode>,
}

impl ModeBasis {
    /// All modes with `0 <= n, m <= q_max`.
    pub fn full(q_max: u32) -> Self {
        let active = (0..=q_max)
            .flat_map(|n| (0..=q_max).map(move |m| Mode::new(n, m)))
            .collect();
        Self { q_max, active }
    }

    /// A subset of the full basis. Modes are sorted into row-major order;
    /// duplicates and out-of-range indices are rejected.
    pub fn from_modes(q_max: u32, modes: impl IntoIterator<Item = Mode>) -> Result<Self> {
        let mut active: Vec<Mode> = modes.into_iter().collect();
        if let Some(bad) = active.iter().find(|md| md.n > q_max || md.m > q_max) {
            return Err(Error::Domain(format!("mode {bad} outside basis with Q = {q_max}")));
        }
        active.sort();
        let before = active.len();
        active.dedup();
        if active.len() != before {
            return Err(Error::Domain("duplicate modes in basis".into()));
        }
        Ok(Self { q_max, active })
    }

    pub fn q_max(&self) -> u32 {
        self.q_max
    }

    pub fn modes(&self) -> &[Mode] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Size `(Q+1)²` of the full basis.
    pub fn full_len(&self) -> usize {
        let side = self.q_max as usize + 1;
        side * side
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.full_len()
    }

    /// Row-major position of `mode` in the full basis.
    pub fn full_index(&self, mode: Mode) -> usize {
        mode.n as usize * (self.q_max as usize + 1) + mode.m as usize
    }

    /// Position of `mode` in the active list.
    pub fn position(&self, mode: Mode) -> Option<usize> {
        self.active.binary_search(&mode).ok()
    }

    /// One-dimensional family along `axis`: `u_n0` for the x axis, `u_0m`
    /// for the y axis.
    pub fn along_axis(q_max: u32, axis: Axis) -> Self {
        let active = (0..=q_max)
            .map(|k| match axis {
                Axis::X => Mode::new(k, 0),
                Axis::Y => Mode::new(0, k),
            })
            .collect::<Vec<_>>();
        let mut basis = Self { q_max, active };
        basis.active.sort();
        basis
    }
}

/// Number of quarter turns if `theta` is (the floating-point image of) a
/// multiple of π/2.
fn quarter_turns(theta: f64) -> Option<i64> {
    let k = (theta / FRAC_PI_2).round();
    let tol = 4.0 * f64::EPSILON * theta.abs().max(1.0);
    ((theta - k * FRAC_PI_2).abs() <= tol).then_some(k as i64)
}

/// `(cos θ, sin θ)`, exact at multiples of π/2 so that structurally zero
/// overlaps are exactly zero.
pub fn unit_direction(theta: f64) -> (f64, f64) {
    match quarter_turns(theta).map(|k| k.rem_euclid(4)) {
        Some(0) => (1.0, 0.0),
        Some(1) => (0.0, 1.0),
        Some(2) => (-1.0, 0.0),
        Some(3) => (0.0, -1.0),
        _ => (theta.cos(), theta.sin()),
    }
}
