//! Run configuration, read from TOML.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use superres::asymptotics::DminScan;
use superres::direct_imaging::PixelGrid;
use superres::noise::{crosstalk_ensemble, sample_crosstalk, CrosstalkMatrix, DarkCounts};
use superres::{McConfig, Misalignment, Scene};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub method: MethodConfig,
    pub misalignment: Option<MisalignmentConfig>,
    pub crosstalk: Option<CrosstalkConfig>,
    pub dark_counts: Option<DarkConfig>,
    #[serde(default)]
    pub pixels: PixelConfig,
    #[serde(default)]
    pub mc: McSection,
    pub dmin: Option<DminConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Mean photon number per source, `N`.
    pub n_mean: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Alignment angle in radians.
    pub theta: Option<f64>,
    pub theta_deg: Option<f64>,
    #[serde(default = "one")]
    pub waist: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Separation grid in `x = d/2w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub values: Option<Vec<f64>>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DemuxExact,
    DemuxIdealClosed,
    DemuxAsymptotic,
    DirectImaging,
    ApproxLowBrightness,
    ApproxMisalignment,
    ApproxUniformCrosstalk,
    ApproxUniformDarkCounts,
    ApproxCrosstalkDominated,
    ApproxDarkCountDominated,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::DemuxExact => "demux-exact",
            Method::DemuxIdealClosed => "demux-ideal-closed",
            Method::DemuxAsymptotic => "demux-asymptotic",
            Method::DirectImaging => "direct-imaging",
            Method::ApproxLowBrightness => "approx-low-brightness",
            Method::ApproxMisalignment => "approx-misalignment",
            Method::ApproxUniformCrosstalk => "approx-uniform-crosstalk",
            Method::ApproxUniformDarkCounts => "approx-uniform-dark-counts",
            Method::ApproxCrosstalkDominated => "approx-crosstalk-dominated",
            Method::ApproxDarkCountDominated => "approx-dark-count-dominated",
        }
    }

    /// Whether results depend on the mode cutoff `Q`.
    pub fn uses_modes(self) -> bool {
        !matches!(self, Method::DemuxAsymptotic | Method::DirectImaging)
    }

    /// Whether results vary across crosstalk ensemble members.
    pub fn per_member(self) -> bool {
        matches!(
            self,
            Method::DemuxExact | Method::ApproxLowBrightness | Method::ApproxCrosstalkDominated | Method::ApproxDarkCountDominated
        )
    }

    pub fn has_coefficients(self) -> bool {
        matches!(self, Method::DemuxExact | Method::DemuxIdealClosed)
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::DemuxExact]
}

fn default_q() -> Vec<u32> {
    vec![2]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default = "default_methods")]
    pub names: Vec<Method>,
    #[serde(default = "default_q")]
    pub q_max: Vec<u32>,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self { names: default_methods(), q_max: default_q() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisalignmentConfig {
    /// Shift in units of the beam diameter, `d_s/2w`.
    pub x_s: f64,
    pub theta_s: Option<f64>,
    pub theta_s_deg: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { base: u64, count: usize },
}

impl Seeds {
    pub fn describe(&self) -> String {
        match self {
            Seeds::List(v) => format!("{v:?}"),
            Seeds::Range { base, count } => format!("base {base}, streams 0..{count}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkConfig {
    /// Target mean off-diagonal power of each sampled unitary.
    pub mean_offdiag_power: f64,
    pub seeds: Seeds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkConfig {
    /// `N_dc / 2Nκ`.
    pub sigma: Option<f64>,
    /// Mean dark counts per mode.
    pub n_dc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelConfig {
    #[serde(default = "default_np")]
    pub n_p: usize,
    #[serde(default = "default_half_side")]
    pub half_side: f64,
}

fn default_np() -> usize {
    50
}

fn default_half_side() -> f64 {
    3.0
}

impl Default for PixelConfig {
    fn default() -> Self {
        Self { n_p: default_np(), half_side: default_half_side() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_samples() -> usize {
    1_000_000
}

fn default_batches() -> usize {
    100
}

impl Default for McSection {
    fn default() -> Self {
        Self { samples: default_samples(), seed: 0, batches: default_batches() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    /// Vary the repetitions `μ` at fixed `Nκ`.
    Mu,
    /// Vary `Nκ` at fixed `μ`.
    N,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DminConfig {
    pub sweep: Sweep,
    pub n_det_min: f64,
    pub n_det_max: f64,
    pub points: usize,
    /// Repetitions for an `n` sweep.
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    /// Covariance entry `(i, j)` on the active basis.
    pub entry: [usize; 2],
    /// Relative change applied to the analytic value.
    pub relative: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_validate_x")]
    pub x: Vec<f64>,
    #[serde(default = "default_validate_gamma")]
    pub gamma: Vec<f64>,
    #[serde(default = "default_validate_q")]
    pub q_max: u32,
    #[serde(default = "default_z")]
    pub z_limit: f64,
    #[serde(default = "default_tol")]
    pub closed_form_tol: f64,
    pub inject: Option<Injection>,
}

fn default_validate_x() -> Vec<f64> {
    vec![0.2, 0.6, 1.2]
}

fn default_validate_gamma() -> Vec<f64> {
    vec![0.0, 0.5]
}

fn default_validate_q() -> u32 {
    2
}

fn default_z() -> f64 {
    5.0
}

fn default_tol() -> f64 {
    1e-9
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            x: default_validate_x(),
            gamma: default_validate_gamma(),
            q_max: default_validate_q(),
            z_limit: default_z(),
            closed_form_tol: default_tol(),
            inject: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn cfg(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn angle(field: &str, rad: Option<f64>, deg: Option<f64>, default: Option<f64>) -> Result<f64, CliError> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(cfg(field, "give the angle in radians or in degrees, not both")),
        (Some(r), None) => Ok(r),
        (None, Some(d)) => Ok(d.to_radians()),
        (None, None) => default.ok_or_else(|| cfg(field, "missing angle")),
    }
}

/// Dark-count level, kept in the form it was given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DarkLevel {
    Sigma(f64),
    Mean(f64),
}

impl DarkLevel {
    pub fn sigma(self, scene: &Scene) -> f64 {
        match self {
            DarkLevel::Sigma(s) => s,
            DarkLevel::Mean(n) => n / (2.0 * scene.received()),
        }
    }

    pub fn counts(self, k: usize, scene: &Scene) -> superres::Result<DarkCounts> {
        DarkCounts::uniform(k, self.sigma(scene) * 2.0 * scene.received())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        self.base_scene(0.0)?;
        self.misalignment()?;
        self.dark()?;
        if self.method.names.is_empty() {
            return Err(cfg("method.names", "empty method list"));
        }
        if self.method.q_max.is_empty() || self.method.q_max.iter().any(|&q| q == 0 || q > 30) {
            return Err(cfg("method.q_max", "give cutoffs between 1 and 30"));
        }
        if let Some(ct) = &self.crosstalk {
            if !(ct.mean_offdiag_power > 0.0 && ct.mean_offdiag_power < 1.0) {
                return Err(cfg("crosstalk.mean_offdiag_power", "must lie in (0, 1)"));
            }
            match &ct.seeds {
                Seeds::List(v) if v.is_empty() => return Err(cfg("crosstalk.seeds", "empty seed list")),
                Seeds::Range { count: 0, .. } => return Err(cfg("crosstalk.seeds.count", "must be >= 1")),
                _ => {}
            }
        }
        PixelGrid::new(self.pixels.n_p, self.pixels.half_side).map_err(|e| cfg("pixels", e))?;
        McConfig::new(self.mc.samples, self.mc.seed).map_err(|e| cfg("mc.samples", e))?;
        if self.mc.batches < 2 || self.mc.batches > self.mc.samples / 2 {
            return Err(cfg("mc.batches", format!("must lie in [2, samples/2], got {}", self.mc.batches)));
        }
        Ok(())
    }

    /// Scene at separation `x = d/2w`.
    pub fn base_scene(&self, x: f64) -> Result<Scene, CliError> {
        let s = &self.scene;
        let theta = angle("scene.theta", s.theta, s.theta_deg, None)?;
        Scene::new(2.0 * x * s.waist, theta, s.n_mean, s.gamma, s.kappa, s.waist).map_err(|e| cfg("scene", e))
    }

    pub fn misalignment(&self) -> Result<Misalignment, CliError> {
        match &self.misalignment {
            None => Ok(Misalignment::none()),
            Some(m) => {
                let th = angle("misalignment.theta_s", m.theta_s, m.theta_s_deg, Some(0.0))?;
                Misalignment::new(2.0 * m.x_s * self.scene.waist, th).map_err(|e| cfg("misalignment", e))
            }
        }
    }

    pub fn dark(&self) -> Result<Option<DarkLevel>, CliError> {
        match &self.dark_counts {
            None => Ok(None),
            Some(d) => match (d.sigma, d.n_dc) {
                (Some(s), None) if s >= 0.0 && s.is_finite() => Ok(Some(DarkLevel::Sigma(s))),
                (None, Some(n)) if n >= 0.0 && n.is_finite() => Ok(Some(DarkLevel::Mean(n))),
                (Some(_), Some(_)) => Err(cfg("dark_counts", "give sigma or n_dc, not both")),
                (None, None) => Err(cfg("dark_counts", "give sigma or n_dc")),
                _ => Err(cfg("dark_counts", "level must be finite and >= 0")),
            },
        }
    }

    /// Separation grid in `x`.
    pub fn x_grid(&self) -> Result<Vec<f64>, CliError> {
        let g = self.grid.as_ref().ok_or_else(|| cfg("grid", "missing section"))?;
        let xs = match (&g.values, g.x_min, g.x_max, g.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(lo), Some(hi), Some(n)) => {
                if n == 0 {
                    Vec::new()
                } else if n == 1 {
                    vec![lo]
                } else {
                    match g.spacing {
                        Spacing::Linear => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
                        Spacing::Log => {
                            if lo <= 0.0 {
                                return Err(cfg("grid.x_min", "log spacing needs x_min > 0"));
                            }
                            superres::numerics::log_space(lo, hi, n)
                        }
                    }
                }
            }
            _ => return Err(cfg("grid", "give either values or x_min, x_max and points")),
        };
        if xs.is_empty() {
            return Err(cfg("grid", "empty separation grid"));
        }
        if let Some(bad) = xs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(cfg("grid", format!("separations must be finite and >= 0, got {bad}")));
        }
        Ok(xs)
    }

    /// Crosstalk members for a `K`-mode basis; one `None` without crosstalk.
    pub fn crosstalk_members(&self, k: usize) -> Result<Vec<Option<CrosstalkMatrix>>, CliError> {
        let Some(ct) = &self.crosstalk else {
            return Ok(vec![None]);
        };
        let p = ct.mean_offdiag_power;
        let members = match &ct.seeds {
            Seeds::Range { base, count } => crosstalk_ensemble(k, p, *base, *count),
            Seeds::List(v) => v.iter().map(|&s| sample_crosstalk(k, p, s)).collect(),
        };
        Ok(members.map_err(|e| cfg("crosstalk", e))?.into_iter().map(Some).collect())
    }

    pub fn pixel_grid(&self) -> PixelGrid {
        PixelGrid::new(self.pixels.n_p, self.pixels.half_side).expect("checked on load")
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig::new(self.mc.samples, self.mc.seed).expect("checked on load").with_batches(self.mc.batches)
    }

    pub fn dmin_scan(&self) -> DminScan {
        match self.dmin.as_ref().and_then(|d| d.scan.as_ref()) {
            Some(s) => DminScan { x_min: s.x_min, x_max: s.x_max, points: s.points },
            None => DminScan::default(),
        }
    }
}
