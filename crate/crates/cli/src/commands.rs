//! Sweep, coefficient and resolution-limit runs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use superres::asymptotics::{approx_sensitivity, dmin_demux, dmin_direct_imaging, mean_std, ApproxRegime, DminQuery};
use superres::demux::{demux_moments_reduced, NoiseModel};
use superres::direct_imaging::{di_sensitivity, PixelGrid};
use superres::ideal::{coefficients_ideal, sensitivity_asymptotic, sensitivity_ideal};
use superres::moments::sensitivity;
use superres::noise::CrosstalkMatrix;
use superres::numerics::log_space;
use superres::{Misalignment, Mode, ModeBasis, Scene};

use crate::config::{DarkLevel, Method, RunConfig, Sweep};
use crate::error::{classify, CliError};
use crate::table::{Cell, Table};

const UNIT_NOTE: &str = "lengths (d, d_min) are in the unit of scene.waist; M is in inverse length squared";
const CROSSTALK_NOTE: &str =
    "crosstalk: one unitary per ensemble member, held fixed across the whole sweep; member i uses stream i of the base seed";

/// Everything a run needs, resolved from the config.
pub struct Prepared<'a> {
    pub cfg: &'a RunConfig,
    pub text: &'a str,
    pub mis: Misalignment,
    pub dark: Option<DarkLevel>,
    pub pixels: PixelGrid,
    members: BTreeMap<u32, Vec<Option<CrosstalkMatrix>>>,
}

impl<'a> Prepared<'a> {
    pub fn new(cfg: &'a RunConfig, text: &'a str, qs: &[u32]) -> Result<Self, CliError> {
        let mut members = BTreeMap::new();
        for &q in qs {
            members.insert(q, cfg.crosstalk_members(ModeBasis::full(q).len())?);
        }
        Ok(Self {
            cfg,
            text,
            mis: cfg.misalignment()?,
            dark: cfg.dark()?,
            pixels: cfg.pixel_grid(),
            members,
        })
    }

    fn members(&self, q: u32) -> &[Option<CrosstalkMatrix>] {
        &self.members[&q]
    }

    fn noise(&self, q: u32, member: &Option<CrosstalkMatrix>, scene: &Scene) -> Result<NoiseModel, CliError> {
        let mut n = NoiseModel::ideal();
        if let Some(c) = member {
            n = n.with_crosstalk(c.clone());
        }
        if let Some(d) = self.dark {
            n = n.with_dark(d.counts(ModeBasis::full(q).len(), scene).map_err(classify)?);
        }
        Ok(n)
    }

    fn noiseless(&self) -> bool {
        self.mis.is_aligned() && self.cfg.crosstalk.is_none() && self.dark.is_none()
    }

    fn table(&self, command: &str) -> Table {
        let mut t = Table::new(command, self.text);
        t.notes.push(UNIT_NOTE.into());
        if let Some(ct) = &self.cfg.crosstalk {
            t.notes.push(CROSSTALK_NOTE.into());
            t.seeds.push(format!("crosstalk {}", ct.seeds.describe()));
        }
        t
    }

    /// Checks that a method has the inputs it needs.
    fn require(&self, method: Method) -> Result<(), CliError> {
        let missing = |what: &str| Err(CliError::Config(format!("method {}: needs a [{what}] section", method.tag())));
        match method {
            Method::DemuxIdealClosed | Method::DemuxAsymptotic | Method::DirectImaging if !self.noiseless() => Err(
                CliError::Config(format!("method {}: describes noiseless measurements; remove the noise sections", method.tag())),
            ),
            Method::ApproxMisalignment if self.mis.is_aligned() => missing("misalignment"),
            Method::ApproxUniformCrosstalk | Method::ApproxCrosstalkDominated if self.cfg.crosstalk.is_none() => {
                missing("crosstalk")
            }
            Method::ApproxUniformDarkCounts | Method::ApproxDarkCountDominated if self.dark.is_none() => missing("dark_counts"),
            _ => Ok(()),
        }
    }

    /// `M` and, where available, coefficients on the full basis of `q`.
    fn evaluate(
        &self,
        method: Method,
        q: u32,
        scene: &Scene,
        member: &Option<CrosstalkMatrix>,
    ) -> Result<(f64, Option<Vec<f64>>), CliError> {
        let full = ModeBasis::full(q);
        let sigma = || self.dark.map_or(0.0, |d| d.sigma(scene));
        let member_or_identity = || member.clone().unwrap_or_else(|| CrosstalkMatrix::identity(full.len()));
        let approx = |regime: ApproxRegime| approx_sensitivity(scene, &self.mis, &regime).map_err(classify);
        let out = match method {
            Method::DemuxExact => {
                let noise = self.noise(q, member, scene)?;
                let data = demux_moments_reduced(scene, &self.mis, &noise, &full).map_err(classify)?;
                let r = sensitivity(&data).map_err(classify)?;
                let mut c = vec![0.0; full.len()];
                for (i, &md) in data.basis.modes().iter().enumerate() {
                    c[full.full_index(md)] = r.coeffs[i];
                }
                (r.m_value, Some(c))
            }
            Method::DemuxIdealClosed => {
                let m = sensitivity_ideal(scene, q).map_err(classify)?;
                let (basis, v) = coefficients_ideal(scene, q).map_err(classify)?;
                let mut c = vec![0.0; full.len()];
                for (i, &md) in basis.modes().iter().enumerate() {
                    c[full.full_index(md)] = v[i];
                }
                (m, Some(c))
            }
            Method::DemuxAsymptotic => (sensitivity_asymptotic(scene), None),
            Method::DirectImaging => (di_sensitivity(scene, &self.pixels).map_err(classify)?.m_value, None),
            Method::ApproxLowBrightness => {
                let noise = self.noise(q, member, scene)?;
                (approx(ApproxRegime::LowBrightness { noise, basis: full })?, None)
            }
            Method::ApproxMisalignment => (approx(ApproxRegime::MisalignmentOnly)?, None),
            Method::ApproxUniformCrosstalk => {
                let r2 = self.cfg.crosstalk.as_ref().expect("required").mean_offdiag_power;
                (approx(ApproxRegime::UniformCrosstalk { r2, sigma: sigma() })?, None)
            }
            Method::ApproxUniformDarkCounts => (approx(ApproxRegime::UniformDarkCounts { sigma: sigma() })?, None),
            Method::ApproxCrosstalkDominated => (
                approx(ApproxRegime::CrosstalkDominated { crosstalk: member_or_identity(), sigma: sigma() })?,
                None,
            ),
            Method::ApproxDarkCountDominated => (
                approx(ApproxRegime::DarkCountDominated { crosstalk: member_or_identity(), sigma: sigma() })?,
                None,
            ),
        };
        Ok(out)
    }

    /// Ensemble statistics of `M` and the coefficients at one point.
    fn ensemble(&self, method: Method, q: u32, scene: &Scene) -> Result<Summary, CliError> {
        let members: &[Option<CrosstalkMatrix>] = if method.per_member() { self.members(q) } else { &[None] };
        let mut ms = Vec::with_capacity(members.len());
        let mut cs: Vec<Vec<f64>> = Vec::new();
        for m in members {
            let (v, c) = self.evaluate(method, q, scene, m)?;
            ms.push(v);
            if let Some(c) = c {
                cs.push(c);
            }
        }
        let (m_mean, m_std) = mean_std(&ms);
        let coeffs = (!cs.is_empty()).then(|| {
            (0..cs[0].len())
                .map(|k| mean_std(&cs.iter().map(|c| c[k]).collect::<Vec<_>>()))
                .collect()
        });
        Ok(Summary { m_mean, m_std, members: members.len(), coeffs })
    }
}

struct Summary {
    m_mean: f64,
    m_std: f64,
    members: usize,
    coeffs: Option<Vec<(f64, f64)>>,
}

fn mode_label(md: Mode) -> String {
    format!("m_{}_{}", md.n, md.m)
}

fn q_cell(method: Method, q: u32) -> Cell {
    if method.uses_modes() {
        Cell::Int(q.into())
    } else {
        Cell::Empty
    }
}

/// Tasks over (method, q) pairs; methods without a mode cutoff run once.
fn method_q_pairs(cfg: &RunConfig) -> Vec<(Method, u32)> {
    let mut out = Vec::new();
    for &m in &cfg.method.names {
        if m.uses_modes() {
            out.extend(cfg.method.q_max.iter().map(|&q| (m, q)));
        } else {
            out.push((m, cfg.method.q_max[0]));
        }
    }
    out
}

pub fn sweep_sensitivity(cfg: &RunConfig, text: &str) -> Result<Table, CliError> {
    let xs = cfg.x_grid()?;
    let prep = Prepared::new(cfg, text, &cfg.method.q_max)?;
    for &m in &cfg.method.names {
        prep.require(m)?;
    }
    let q_top = *cfg.method.q_max.iter().max().expect("non-empty");
    let top = ModeBasis::full(q_top);
    let mut table = prep.table("sweep-sensitivity");
    for (c, u) in [
        ("method", "-"),
        ("q_max", "-"),
        ("x", "d/2w"),
        ("d", "length"),
        ("M", "1/length^2"),
        ("M_std", "1/length^2"),
        ("members", "count"),
    ] {
        table.column(c, u);
    }
    for &md in top.modes() {
        table.column(mode_label(md), "unit-norm coefficient (ensemble mean)");
    }

    let tasks: Vec<(Method, u32, f64)> = method_q_pairs(cfg)
        .into_iter()
        .flat_map(|(m, q)| xs.iter().map(move |&x| (m, q, x)))
        .collect();
    let rows: Vec<Result<Vec<Cell>, CliError>> = tasks
        .par_iter()
        .map(|&(method, q, x)| {
            let scene = cfg.base_scene(x)?;
            let s = prep.ensemble(method, q, &scene)?;
            let mut row = vec![
                Cell::Text(method.tag().into()),
                q_cell(method, q),
                Cell::Num(x),
                Cell::Num(scene.d()),
                Cell::Num(s.m_mean),
                Cell::Num(s.m_std),
                Cell::Int(s.members as u64),
            ];
            let full = ModeBasis::full(q);
            for &md in top.modes() {
                row.push(match (&s.coeffs, full.position(md)) {
                    (Some(c), Some(i)) => Cell::Num(c[i].0),
                    _ => Cell::Empty,
                });
            }
            Ok(row)
        })
        .collect();
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}

pub fn coefficients(cfg: &RunConfig, text: &str) -> Result<Table, CliError> {
    let xs = cfg.x_grid()?;
    let prep = Prepared::new(cfg, text, &cfg.method.q_max)?;
    for &m in &cfg.method.names {
        if !m.has_coefficients() {
            return Err(CliError::Config(format!(
                "method {}: no coefficients; use demux-exact or demux-ideal-closed",
                m.tag()
            )));
        }
        prep.require(m)?;
    }
    let q_top = *cfg.method.q_max.iter().max().expect("non-empty");
    let top = ModeBasis::full(q_top);
    let mut table = prep.table("coefficients");
    for (c, u) in [("method", "-"), ("q_max", "-"), ("x", "d/2w"), ("d", "length"), ("members", "count")] {
        table.column(c, u);
    }
    for &md in top.modes() {
        table.column(mode_label(md), "unit-norm coefficient (ensemble mean)");
        table.column(format!("{}_std", mode_label(md)), "unit-norm coefficient");
    }
    let tasks: Vec<(Method, u32, f64)> = method_q_pairs(cfg)
        .into_iter()
        .flat_map(|(m, q)| xs.iter().map(move |&x| (m, q, x)))
        .collect();
    let rows: Vec<Result<Vec<Cell>, CliError>> = tasks
        .par_iter()
        .map(|&(method, q, x)| {
            let scene = cfg.base_scene(x)?;
            let s = prep.ensemble(method, q, &scene)?;
            let c = s.coeffs.expect("coefficient method");
            let full = ModeBasis::full(q);
            let mut row = vec![
                Cell::Text(method.tag().into()),
                Cell::Int(q.into()),
                Cell::Num(x),
                Cell::Num(scene.d()),
                Cell::Int(s.members as u64),
            ];
            for &md in top.modes() {
                match full.position(md) {
                    Some(i) => row.extend([Cell::Num(c[i].0), Cell::Num(c[i].1)]),
                    None => row.extend([Cell::Empty, Cell::Empty]),
                }
            }
            Ok(row)
        })
        .collect();
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}

pub fn dmin(cfg: &RunConfig, text: &str) -> Result<Table, CliError> {
    let dc = cfg.dmin.as_ref().ok_or_else(|| CliError::Config("dmin: missing section".into()))?;
    if !(dc.n_det_min > 0.0 && dc.n_det_max >= dc.n_det_min && dc.points >= 1) {
        return Err(CliError::Config("dmin: need 0 < n_det_min <= n_det_max and points >= 1".into()));
    }
    if dc.sweep == Sweep::N && !(dc.mu > 0.0 && dc.mu.is_finite()) {
        return Err(CliError::Config("dmin.mu: must be > 0".into()));
    }
    let prep = Prepared::new(cfg, text, &cfg.method.q_max)?;
    for &m in &cfg.method.names {
        if !matches!(m, Method::DemuxExact | Method::DirectImaging) {
            return Err(CliError::Config(format!("method {}: d_min needs demux-exact or direct-imaging", m.tag())));
        }
        prep.require(m)?;
    }
    let scan = cfg.dmin_scan();
    let base = cfg.base_scene(1.0)?;
    let n_dets = if dc.points == 1 { vec![dc.n_det_min] } else { log_space(dc.n_det_min, dc.n_det_max, dc.points) };

    let mut table = prep.table("dmin");
    for (c, u) in [
        ("method", "-"),
        ("q_max", "-"),
        ("sweep", "-"),
        ("n_det", "photons"),
        ("mu", "repetitions"),
        ("n_kappa", "photons"),
        ("d_min", "length"),
        ("d_min_std", "length"),
        ("members", "count"),
    ] {
        table.column(c, u);
    }
    table.notes.push(format!(
        "d_min is the smallest d with d*sqrt(mu*M(d)) = 1 on a log scan x in [{}, {}] with {} points",
        scan.x_min, scan.x_max, scan.points
    ));

    let tasks: Vec<(Method, u32, f64)> = method_q_pairs(cfg)
        .into_iter()
        .flat_map(|(m, q)| n_dets.iter().map(move |&n| (m, q, n)))
        .collect();
    let rows: Vec<Result<Vec<Cell>, CliError>> = tasks
        .par_iter()
        .map(|&(method, q, n_det)| {
            let (scene, mu) = match dc.sweep {
                Sweep::Mu => (base, n_det / (2.0 * base.received())),
                Sweep::N => (base.with_received(n_det / (2.0 * dc.mu)).map_err(classify)?, dc.mu),
            };
            let query = DminQuery::new(mu).map_err(classify)?.with_scan(scan);
            let members: &[Option<CrosstalkMatrix>] = if method.per_member() { prep.members(q) } else { &[None] };
            let mut ds = Vec::with_capacity(members.len());
            for m in members {
                let d = match method {
                    Method::DemuxExact => {
                        let noise = prep.noise(q, m, &scene)?;
                        dmin_demux(&scene, &prep.mis, &noise, &ModeBasis::full(q), &query)
                    }
                    _ => dmin_direct_imaging(&scene, &prep.pixels, &query),
                };
                ds.push(d.map_err(classify)?);
            }
            let (mean, std) = mean_std(&ds);
            Ok(vec![
                Cell::Text(method.tag().into()),
                q_cell(method, q),
                Cell::Text(match dc.sweep {
                    Sweep::Mu => "mu".into(),
                    Sweep::N => "n".into(),
                }),
                Cell::Num(n_det),
                Cell::Num(mu),
                Cell::Num(scene.received()),
                Cell::Num(mean),
                Cell::Num(std),
                Cell::Int(ds.len() as u64),
            ])
        })
        .collect();
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}
