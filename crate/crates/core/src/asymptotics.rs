//! Small-separation sensitivities and the minimal resolvable distance.
//!
//! Every noisy sensitivity vanishes quadratically, `M ≈ (2Nκ/w²) K x²`, and
//! the resolution condition `d sqrt(μ M(d)) = 1` then gives
//! `d_min = w (4 / (N_det K))^{1/4}` with `N_det = 2Nκμ`.

use crate::demux::{demux_moments, NoiseModel};
use crate::error::{Error, Result};
use crate::noise::CrosstalkMatrix;
use crate::numerics::{bisect, log_space};
use crate::scene::{Misalignment, Mode, ModeBasis, Scene};

/// Small-separation regimes with a closed-form sensitivity.
#[derive(Debug, Clone, PartialEq)]
pub enum ApproxRegime {
    /// `Σ D_k² / N'_k`: the covariance reduced to its diagonal. Exact for
    /// `Nκ ≪ 1`; any `γ`, any noise.
    LowBrightness { noise: NoiseModel, basis: ModeBasis },
    /// Dark counts dominate weak crosstalk (`σ` of order one).
    DarkCountDominated { crosstalk: CrosstalkMatrix, sigma: f64 },
    /// Crosstalk and dark counts populate modes comparably (`σ ~ |c|²`).
    CrosstalkDominated { crosstalk: CrosstalkMatrix, sigma: f64 },
    /// Dark-count dominated, uniform crosstalk.
    UniformDarkCounts { sigma: f64 },
    /// Crosstalk dominated, uniform crosstalk with off-diagonal power `r2`.
    UniformCrosstalk { r2: f64, sigma: f64 },
    /// Misalignment of the order of the separation, nothing else.
    MisalignmentOnly,
}

impl ApproxRegime {
    fn needs_equal_brightness(&self) -> bool {
        !matches!(self, ApproxRegime::LowBrightness { .. })
    }
}

fn entry(ct: &CrosstalkMatrix, a: Mode, b: Mode) -> Result<f64> {
    let k = ct.dim();
    let side = (k as f64).sqrt().round() as usize;
    if side * side != k || side < 2 {
        return Err(Error::Domain(format!("crosstalk of size {k} is not a (Q+1)^2 basis with Q >= 1")));
    }
    let basis = ModeBasis::full(side as u32 - 1);
    Ok(ct.entries()[(basis.full_index(a), basis.full_index(b))].norm())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be > 0 in this regime, got {v}")))
    }
}

/// `t⁴ / den`, read as zero when the trigonometric weight vanishes.
fn weighted(trig4: f64, den: f64) -> f64 {
    if trig4 == 0.0 {
        0.0
    } else {
        trig4 / den
    }
}

/// Closed-form small-separation sensitivity in the given regime.
pub fn approx_sensitivity(scene: &Scene, mis: &Misalignment, regime: &ApproxRegime) -> Result<f64> {
    if regime.needs_equal_brightness() && scene.gamma() != 0.0 {
        return Err(Error::Domain(format!(
            "this expansion assumes equally bright sources, got gamma = {}",
            scene.gamma()
        )));
    }
    let nk = scene.received();
    let pre = 2.0 * nk / (scene.waist() * scene.waist());
    let x = scene.x();
    let x2 = x * x;
    let (c, s) = scene.direction();
    let (c4, s4) = (c.powi(4), s.powi(4));
    let cos4 = (4.0 * scene.theta()).cos();
    let m00 = Mode::new(0, 0);
    let m01 = Mode::new(0, 1);
    let m10 = Mode::new(1, 0);
    let value = match regime {
        ApproxRegime::LowBrightness { noise, basis } => {
            let data = demux_moments(scene, mis, noise, basis)?;
            (0..data.len())
                .filter(|&k| data.means[k] > 0.0)
                .map(|k| data.deriv[k] * data.deriv[k] / data.means[k])
                .sum()
        }
        ApproxRegime::DarkCountDominated { crosstalk, sigma } => {
            let sigma = positive("sigma", *sigma)?;
            let t00 = entry(crosstalk, m00, m00)?.powi(2);
            let t01 = entry(crosstalk, m01, m01)?.powi(4);
            let t10 = entry(crosstalk, m10, m10)?.powi(4);
            let first = t00 * t00 / (2.0 * nk * (t00 * t00 + sigma * sigma) + t00 + sigma);
            let second = (s4 * t01 + c4 * t10) / (2.0 * nk * sigma * sigma + sigma);
            pre * (first + second) * x2
        }
        ApproxRegime::CrosstalkDominated { crosstalk, sigma } => {
            let t01 = entry(crosstalk, m01, m01)?.powi(4);
            let t10 = entry(crosstalk, m10, m10)?.powi(4);
            let r01 = entry(crosstalk, m01, m00)?.powi(2);
            let r10 = entry(crosstalk, m10, m00)?.powi(2);
            pre * (weighted(s4 * t01, r01 + sigma) + weighted(c4 * t10, r10 + sigma)) * x2
        }
        ApproxRegime::UniformDarkCounts { sigma } => {
            let sigma = positive("sigma", *sigma)?;
            let first = (cos4 + 3.0) / (8.0 * nk * sigma * sigma + 4.0 * sigma);
            let second = 1.0 / (2.0 * nk * (sigma * sigma + 1.0) + sigma + 1.0);
            pre * (first + second) * x2
        }
        ApproxRegime::UniformCrosstalk { r2, sigma } => {
            let den = positive("|r|^2 + sigma", r2 + sigma)?;
            pre * (cos4 + 3.0) / (4.0 * den) * x2
        }
        ApproxRegime::MisalignmentOnly => {
            let xs = mis.x_s(scene.waist());
            let (cs, ss) = mis.direction();
            let ys = weighted(s4, x2 * s * s + 4.0 * xs * xs * ss * ss);
            let xs_term = weighted(c4, x2 * c * c + 4.0 * xs * xs * cs * cs);
            pre * (ys + xs_term) * x2
        }
    };
    Ok(value)
}

/// Log-spaced scan in `x = d/2w` used to bracket the resolution threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DminScan {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Default for DminScan {
    fn default() -> Self {
        Self {
            x_min: 1e-6,
            x_max: 5.0,
            points: 400,
        }
    }
}

/// Repetitions `μ` and the scan used to solve for `d_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DminQuery {
    pub mu: f64,
    pub scan: DminScan,
}

impl DminQuery {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Domain(format!("repetitions must be > 0, got {mu}")));
        }
        Ok(Self {
            mu,
            scan: DminScan::default(),
        })
    }

    pub fn with_scan(mut self, scan: DminScan) -> Self {
        self.scan = scan;
        self
    }

    /// Detected photon number `N_det = 2Nκμ`.
    pub fn n_det(&self, scene: &Scene) -> f64 {
        2.0 * scene.received() * self.mu
    }
}

/// Smallest `d` with `d sqrt(μ M(d)) = 1`, where `sensitivity(d)` gives `M`.
///
/// The threshold is bracketed on the scan grid and refined by bisection to
/// relative `1e-10` in `d`.
pub fn dmin_solve<F>(sensitivity: F, waist: f64, query: &DminQuery) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let scan = query.scan;
    if !(scan.x_min > 0.0 && scan.x_max > scan.x_min && scan.points >= 2) {
        return Err(Error::Domain("invalid d_min scan".into()));
    }
    let g = |d: f64| -> Result<f64> { Ok(d * (query.mu * sensitivity(d)?).sqrt()) };
    let grid: Vec<f64> = log_space(scan.x_min, scan.x_max, scan.points)
        .into_iter()
        .map(|x| 2.0 * waist * x)
        .collect();
    let mut best = (f64::NEG_INFINITY, grid[0]);
    let mut prev: Option<f64> = None;
    for &d in &grid {
        let gd = g(d)?;
        if gd >= 1.0 {
            let Some(lo) = prev else {
                return Err(Error::CrossingBelowScan {
                    g_min: gd,
                    d_min_scanned: d,
                });
            };
            let mut failure = None;
            let root = bisect(
                |t| match g(t) {
                    Ok(v) => v - 1.0,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                lo,
                d,
                1e-10,
                200,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            return root.ok_or_else(|| Error::Convergence("lost d_min bracket".into()));
        }
        if gd > best.0 {
            best = (gd, d);
        }
        prev = Some(d);
    }
    Err(Error::NoCrossing {
        max_g: best.0,
        at_d: best.1,
    })
}

/// `d_min` for demultiplexing with the exact moment pipeline.
pub fn dmin_demux(
    scene: &Scene,
    mis: &Misalignment,
    noise: &NoiseModel,
    basis: &ModeBasis,
    query: &DminQuery,
) -> Result<f64> {
    dmin_solve(
        |d| {
            let s = scene.with_separation(d)?;
            let data = crate::demux::demux_moments_reduced(&s, mis, noise, basis)?;
            Ok(crate::moments::sensitivity(&data)?.m_value)
        },
        scene.waist(),
        query,
    )
}

/// `d_min` for pixelized direct imaging.
pub fn dmin_direct_imaging(
    scene: &Scene,
    grid: &crate::direct_imaging::PixelGrid,
    query: &DminQuery,
) -> Result<f64> {
    dmin_solve(
        |d| Ok(crate::direct_imaging::di_sensitivity(&scene.with_separation(d)?, grid)?.m_value),
        scene.waist(),
        query,
    )
}

/// Large-`N_det` scaling laws for `d_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DminRegime {
    Ideal,
    DirectImaging,
    Misalignment,
    /// Uniform crosstalk with off-diagonal power `r2`, no dark counts.
    UniformCrosstalk { r2: f64 },
    /// Constant dark-count mean `n_dc` per mode.
    DarkCounts { n_dc: f64 },
    /// Bright-source limit of [`DminRegime::DarkCounts`].
    DarkCountsBright { n_dc: f64 },
}

/// A scaling law as printed alongside the value obtained by solving
/// `d sqrt(μ M) = 1` with the matching small-separation sensitivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DminClosedForm {
    pub printed: f64,
    pub derived: f64,
}

impl DminClosedForm {
    pub fn agree(&self, rel_tol: f64) -> bool {
        (self.printed - self.derived).abs() <= rel_tol * self.derived.abs()
    }
}

/// Closed-form `d_min` for the given regime.
pub fn dmin_closed_form(
    regime: DminRegime,
    scene: &Scene,
    mis: &Misalignment,
    mu: f64,
) -> Result<DminClosedForm> {
    let w = scene.waist();
    let nk = scene.received();
    let n_det = 2.0 * nk * mu;
    let theta = scene.theta();
    let (c, s) = scene.direction();
    let trig = (4.0 * theta).cos() + 3.0;
    // d_min for M ≈ (2Nκ/w²) K x²
    let from_k = |k: f64| w * (4.0 / (n_det * k)).powf(0.25);
    let form = match regime {
        DminRegime::Ideal => {
            let v = w / n_det.sqrt();
            DminClosedForm { printed: v, derived: v }
        }
        DminRegime::DirectImaging => DminClosedForm {
            printed: w * (0.5 / n_det).powf(0.25),
            derived: from_k(8.0),
        },
        DminRegime::Misalignment => {
            if mis.is_aligned() {
                return Err(Error::Domain("misalignment law needs a nonzero shift".into()));
            }
            let (cs, ss) = mis.direction();
            let xs = mis.x_s(w);
            let t = weighted(c.powi(4), cs * cs) + weighted(s.powi(4), ss * ss);
            let k = t / (4.0 * xs * xs);
            DminClosedForm {
                printed: (2.0 * mis.d_s() * w).sqrt() / (n_det.powf(0.25) * t.powf(0.25)),
                derived: from_k(k),
            }
        }
        DminRegime::UniformCrosstalk { r2 } => {
            let r2 = positive("|r|^2", r2)?;
            DminClosedForm {
                printed: w / n_det.powf(0.25) * (r2 / trig).powf(0.25),
                derived: from_k(trig / (4.0 * r2)),
            }
        }
        DminRegime::DarkCounts { n_dc } => {
            let n_dc = positive("dark count mean", n_dc)?;
            let v = n_dc * (n_dc + 1.0);
            let printed_bracket = trig / (4.0 * v) + 1.0 / (v + 2.0 * nk * (2.0 * nk + 1.0));
            let sigma = n_dc / (2.0 * nk);
            let k = trig / (8.0 * nk * sigma * sigma + 4.0 * sigma)
                + 1.0 / (2.0 * nk * (sigma * sigma + 1.0) + sigma + 1.0);
            DminClosedForm {
                printed: 2f64.sqrt() * w / (nk * nk * mu).powf(0.25) * printed_bracket.powf(-0.25),
                derived: from_k(k),
            }
        }
        DminRegime::DarkCountsBright { n_dc } => {
            let n_dc = positive("dark count mean", n_dc)?;
            let threshold = ((4.0 + 2.0 / mu).sqrt() - 2.0) / 4.0;
            if n_dc < threshold {
                return Err(Error::Domain(format!(
                    "bright-source dark-count law predicts better-than-ideal scaling for N_dc = {n_dc} < {threshold}"
                )));
            }
            log::warn!("the bright-source dark-count law tends to underestimate d_min");
            let v = n_dc * (n_dc + 1.0);
            let sigma = n_dc / (2.0 * nk);
            let k = trig / (8.0 * nk * sigma * sigma + 4.0 * sigma);
            DminClosedForm {
                printed: 2f64.sqrt() * w / (nk.sqrt() * mu.powf(0.25)) * (trig / v).powf(-0.25),
                derived: from_k(k),
            }
        }
    };
    Ok(form)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn scene(x: f64) -> Scene {
        Scene::new(2.0 * x, FRAC_PI_4, 1.5, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn uniform_crosstalk_on_the_diagonal() {
        let m = approx_sensitivity(&scene(0.01), &Misalignment::none(), &ApproxRegime::UniformCrosstalk { r2: 0.0017, sigma: 0.0 })
            .unwrap();
        let expected = 3.0 * 2.0 / (4.0 * 0.0017) * 1e-4;
        assert!((m - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn unequal_brightness_rejected() {
        let s = Scene::new(0.02, FRAC_PI_4, 1.5, 0.3, 1.0, 1.0).unwrap();
        let r = approx_sensitivity(&s, &Misalignment::none(), &ApproxRegime::UniformDarkCounts { sigma: 0.001 });
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn misalignment_term_drops_with_its_weight() {
        let s = Scene::new(0.02, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let mis = Misalignment::new(0.02, std::f64::consts::FRAC_PI_2).unwrap();
        let m = approx_sensitivity(&s, &mis, &ApproxRegime::MisalignmentOnly).unwrap();
        // only the cos⁴θ term survives, with cos θ_s = 0: (2Nκ)(1/x²)x²
        assert!((m - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_law() {
        let s = Scene::new(1.0, 0.0, 50.0, 0.0, 1.0, 1.0).unwrap();
        let f = dmin_closed_form(DminRegime::Ideal, &s, &Misalignment::none(), 1.0).unwrap();
        assert!((f.printed - 0.1).abs() < 1e-15);
    }

    #[test]
    fn printed_and_derived_laws() {
        let s = Scene::new(1.0, FRAC_PI_4, 0.5, 0.0, 1.0, 1.0).unwrap();
        let mis = Misalignment::new(0.02, FRAC_PI_4).unwrap();
        let none = Misalignment::none();
        let f = |r| dmin_closed_form(r, &s, &mis, 1e6).unwrap();
        assert!(f(DminRegime::DirectImaging).agree(1e-14));
        assert!(f(DminRegime::Misalignment).agree(1e-14));
        assert!(f(DminRegime::DarkCountsBright { n_dc: 1.0 }).agree(1e-14));
        let ct = f(DminRegime::UniformCrosstalk { r2: 0.0017 });
        assert!((ct.derived / ct.printed - 2.0).abs() < 1e-14);
        let dc = dmin_closed_form(DminRegime::DarkCounts { n_dc: 1.0 }, &s, &none, 1e6).unwrap();
        assert!((dc.printed / dc.derived - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bright_dark_count_law_has_a_validity_floor() {
        let s = Scene::new(1.0, FRAC_PI_4, 0.5, 0.0, 1.0, 1.0).unwrap();
        let r = dmin_closed_form(DminRegime::DarkCountsBright { n_dc: 0.01 }, &s, &Misalignment::none(), 1.0);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn solver_matches_constant_sensitivity() {
        let q = DminQuery::new(100.0).unwrap();
        let d = dmin_solve(|_| Ok(2.0), 1.0, &q).unwrap();
        assert!((d - 1.0 / 200f64.sqrt()).abs() < 1e-9 * d);
        assert!(matches!(dmin_solve(|_| Ok(1e-12), 1.0, &q), Err(Error::NoCrossing { .. })));
        assert!(matches!(dmin_solve(|_| Ok(1e20), 1.0, &q), Err(Error::CrossingBelowScan { .. })));
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
