//! Monte Carlo photon counting.
//!
//! Each sample draws the two thermal source amplitudes, forms the coherent
//! field amplitude `α_k` in every measured mode, and draws Poissonian counts
//! with mean `|α_k|²` plus Bose-Einstein dark counts. Two independent
//! parametrizations of the sources are available:
//!
//! * [`SamplerPath::SymmetricModes`]: amplitudes `b±` of the symmetric and
//!   antisymmetric combinations of the two images, with
//!   `⟨|b±|²⟩ = Nκ(1 ± δ)` and `⟨b₊b₋*⟩ = -γ sqrt(N₊N₋)`, coupled to mode
//!   `k` through `g_{±,k} = (f_{+,k} ± f_{-,k}) / sqrt(2(1 ± δ))`.
//! * [`SamplerPath::IndependentSources`]: independent amplitudes of the two
//!   sources with means `(1-γ)Nκ` and `(1+γ)Nκ`.
//!
//! Samples are split into batches; batch `i` reads stream `i` of a ChaCha8
//! generator seeded with the configured seed, so results do not depend on
//! the number of threads. Standard errors come from the spread of the batch
//! estimates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demux::{field_overlaps, MomentData, NoiseModel};
use crate::error::{Error, Result};
use crate::hg_overlap::{overlap_delta, FieldOverlaps};
use crate::scene::{Misalignment, ModeBasis, Scene};

/// Parametrization of the thermal sources used by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerPath {
    SymmetricModes,
    IndependentSources,
}

/// Sample size, seed and batching of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub batches: usize,
    pub path: SamplerPath,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        if samples < 1000 {
            return Err(Error::Domain(format!("need at least 1000 samples, got {samples}")));
        }
        Ok(Self {
            samples,
            seed,
            batches: 100,
            path: SamplerPath::SymmetricModes,
        })
    }

    pub fn with_path(mut self, path: SamplerPath) -> Self {
        self.path = path;
        self
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches;
        self
    }
}

/// Draws pairs of source amplitudes and maps them onto measured modes.
#[derive(Debug, Clone)]
pub struct SourceSampler {
    path: SamplerPath,
    /// Lower-triangular factor of the 2×2 amplitude covariance.
    chol: [[f64; 2]; 2],
    /// Mode couplings of the two amplitudes.
    couplings: [Vec<Complex64>; 2],
}

impl SourceSampler {
    pub fn new(scene: &Scene, f: &FieldOverlaps, path: SamplerPath) -> Self {
        let a = scene.plus_photons();
        let b = scene.minus_photons();
        match path {
            SamplerPath::IndependentSources => Self {
                path,
                chol: [[a.sqrt(), 0.0], [0.0, b.sqrt()]],
                couplings: [f.f_plus.clone(), f.f_minus.clone()],
            },
            SamplerPath::SymmetricModes => {
                let delta = overlap_delta(scene);
                let nk = scene.received();
                let n_plus = nk * (1.0 + delta);
                let n_minus = nk * (1.0 - delta);
                let rho = -scene.gamma() * (n_plus * n_minus).sqrt();
                let l00 = n_plus.sqrt();
                let l10 = if l00 > 0.0 { rho / l00 } else { 0.0 };
                let l11 = (n_minus - l10 * l10).max(0.0).sqrt();
                let coupling = |sign: f64, norm: f64| -> Vec<Complex64> {
                    if norm == 0.0 {
                        return vec![Complex64::new(0.0, 0.0); f.f_plus.len()];
                    }
                    let s = (2.0 * norm).sqrt();
                    f.f_plus.iter().zip(&f.f_minus).map(|(p, m)| (p + m * sign) / s).collect()
                };
                Self {
                    path,
                    chol: [[l00, 0.0], [l10, l11]],
                    couplings: [coupling(1.0, 1.0 + delta), coupling(-1.0, 1.0 - delta)],
                }
            }
        }
    }

    pub fn path(&self) -> SamplerPath {
        self.path
    }

    /// Target second moments `[[⟨|z₀|²⟩, ⟨z₀z₁*⟩], [⟨z₁z₀*⟩, ⟨|z₁|²⟩]]`.
    pub fn second_moments(&self) -> [[f64; 2]; 2] {
        let l = self.chol;
        let c00 = l[0][0] * l[0][0];
        let c10 = l[1][0] * l[0][0];
        let c11 = l[1][0] * l[1][0] + l[1][1] * l[1][1];
        [[c00, c10], [c10, c11]]
    }

    /// One pair of circular complex Gaussian amplitudes.
    pub fn draw_amplitudes<R: Rng>(&self, rng: &mut R) -> [Complex64; 2] {
        let z = |rng: &mut R| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        };
        let z0 = z(rng);
        let z1 = z(rng);
        let l = self.chol;
        [z0 * l[0][0], z0 * l[1][0] + z1 * l[1][1]]
    }

    /// Field amplitude in every measured mode for a pair of amplitudes.
    pub fn mode_amplitudes(&self, amp: [Complex64; 2], out: &mut [Complex64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.couplings[0][k] * amp[0] + self.couplings[1][k] * amp[1];
        }
    }
}

/// Empirical moments with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub basis: ModeBasis,
    pub means: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mean_se: DVector<f64>,
    pub cov_se: DMatrix<f64>,
    pub samples: usize,
    pub path: SamplerPath,
}

struct BatchSums {
    n: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl BatchSums {
    fn moments(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let mean: Vec<f64> = self.first.iter().map(|s| s / n).collect();
        let mut cov = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                cov[i * k + j] = (self.second[i * k + j] - n * mean[i] * mean[j]) / (n - 1.0);
            }
        }
        (mean, cov)
    }
}

fn run_batch(
    sampler: &SourceSampler,
    dark: &[f64],
    seed: u64,
    stream: u64,
    n: usize,
) -> BatchSums {
    let k = dark.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let dark_dists: Vec<Option<Geometric>> = dark
        .iter()
        .map(|&m| (m > 0.0).then(|| Geometric::new(1.0 / (1.0 + m)).expect("valid probability")))
        .collect();
    let mut alpha = vec![Complex64::new(0.0, 0.0); k];
    let mut counts = vec![0.0; k];
    let mut sums = BatchSums {
        n,
        first: vec![0.0; k],
        second: vec![0.0; k * k],
    };
    for _ in 0..n {
        let amp = sampler.draw_amplitudes(&mut rng);
        sampler.mode_amplitudes(amp, &mut alpha);
        for i in 0..k {
            let lambda = alpha[i].norm_sqr();
            let mut c = if lambda > 0.0 {
                Poisson::new(lambda).expect("positive rate").sample(&mut rng)
            } else {
                0.0
            };
            if let Some(g) = &dark_dists[i] {
                c += g.sample(&mut rng) as f64;
            }
            counts[i] = c;
        }
        for i in 0..k {
            sums.first[i] += counts[i];
            if counts[i] != 0.0 {
                for j in 0..=i {
                    sums.second[i * k + j] += counts[i] * counts[j];
                }
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            sums.second[j * k + i] = sums.second[i * k + j];
        }
    }
    sums
}

/// Samples photon counts in the active modes of `basis`.
pub fn sample_counts(
    scene: &Scene,
    mis: &Misalignment,
    noise: &NoiseModel,
    basis: &ModeBasis,
    mc: &McConfig,
) -> Result<McEstimate> {
    if mc.samples < 1000 {
        return Err(Error::Domain(format!("need at least 1000 samples, got {}", mc.samples)));
    }
    if mc.batches < 2 || mc.batches > mc.samples / 2 {
        return Err(Error::Domain(format!("invalid batch count {}", mc.batches)));
    }
    let f = field_overlaps(scene, mis, noise, basis)?;
    let dark: Vec<f64> = basis
        .modes()
        .iter()
        .map(|&md| noise.dark.as_ref().map_or(0.0, |d| d.per_mode_mean()[basis.full_index(md)]))
        .collect();
    let sampler = SourceSampler::new(scene, &f, mc.path);
    let k = basis.len();
    let per = mc.samples / mc.batches;
    let extra = mc.samples % mc.batches;
    let batches: Vec<BatchSums> = (0..mc.batches)
        .into_par_iter()
        .map(|b| run_batch(&sampler, &dark, mc.seed, b as u64, per + usize::from(b < extra)))
        .collect();

    let total = BatchSums {
        n: mc.samples,
        first: (0..k).map(|i| batches.iter().map(|b| b.first[i]).sum()).collect(),
        second: (0..k * k).map(|i| batches.iter().map(|b| b.second[i]).sum()).collect(),
    };
    let (mean, cov) = total.moments(k);
    type Moments = (Vec<f64>, Vec<f64>);
    let per_batch: Vec<Moments> = batches.iter().map(|b| b.moments(k)).collect();
    let nb = mc.batches as f64;
    let spread = |get: &dyn Fn(&Moments) -> f64| -> f64 {
        let m = per_batch.iter().map(get).sum::<f64>() / nb;
        let var = per_batch.iter().map(|p| (get(p) - m).powi(2)).sum::<f64>() / (nb - 1.0);
        (var / nb).sqrt()
    };
    let mean_se = DVector::from_fn(k, |i, _| spread(&|p| p.0[i]));
    let cov_se = DMatrix::from_fn(k, k, |i, j| spread(&|p| p.1[i * k + j]));
    Ok(McEstimate {
        basis: basis.clone(),
        means: DVector::from_vec(mean),
        cov: DMatrix::from_row_slice(k, k, &cov),
        mean_se,
        cov_se,
        samples: mc.samples,
        path: mc.path,
    })
}

/// Which moment a z-score refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentEntry {
    Mean(usize),
    Cov(usize, usize),
}

/// Agreement between an estimate and analytic moments.
#[derive(Debug, Clone, PartialEq)]
pub struct McComparison {
    pub max_abs_z: f64,
    pub worst: MomentEntry,
    pub mean_z: DVector<f64>,
    pub cov_z: DMatrix<f64>,
}

impl McComparison {
    pub fn passes(&self, z_limit: f64) -> bool {
        self.max_abs_z < z_limit
    }
}

/// z-scores of every mean and covariance entry.
///
/// Standard errors are floored at the one-event resolution `1/samples`, so
/// that moments too small to produce any counts are not flagged.
pub fn compare(est: &McEstimate, analytic: &MomentData) -> Result<McComparison> {
    let k = est.means.len();
    if analytic.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: analytic.len(),
            context: "Monte Carlo estimate vs. analytic moments",
        });
    }
    let floor = 1.0 / est.samples as f64;
    let z = |emp: f64, se: f64, exact: f64| (emp - exact) / se.hypot(floor);
    let mean_z = DVector::from_fn(k, |i, _| z(est.means[i], est.mean_se[i], analytic.means[i]));
    let cov_z = DMatrix::from_fn(k, k, |i, j| z(est.cov[(i, j)], est.cov_se[(i, j)], analytic.cov[(i, j)]));
    let mut worst = (0.0, MomentEntry::Mean(0));
    for i in 0..k {
        if mean_z[i].abs() > worst.0 || mean_z[i].is_nan() {
            worst = (mean_z[i].abs(), MomentEntry::Mean(i));
        }
        for j in 0..=i {
            if cov_z[(i, j)].abs() > worst.0 || cov_z[(i, j)].is_nan() {
                worst = (cov_z[(i, j)].abs(), MomentEntry::Cov(i, j));
            }
        }
    }
    Ok(McComparison {
        max_abs_z: if worst.0.is_nan() { f64::INFINITY } else { worst.0 },
        worst: worst.1,
        mean_z,
        cov_z,
    })
}

/// z-scores between two independent estimates.
pub fn compare_estimates(a: &McEstimate, b: &McEstimate) -> Result<McComparison> {
    let k = a.means.len();
    if b.means.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: b.means.len(),
            context: "Monte Carlo estimates",
        });
    }
    let floor = 1.0 / a.samples.min(b.samples) as f64;
    let z = |x: f64, y: f64, sx: f64, sy: f64| (x - y) / sx.hypot(sy).hypot(floor);
    let mean_z = DVector::from_fn(k, |i, _| z(a.means[i], b.means[i], a.mean_se[i], b.mean_se[i]));
    let cov_z = DMatrix::from_fn(k, k, |i, j| {
        z(a.cov[(i, j)], b.cov[(i, j)], a.cov_se[(i, j)], b.cov_se[(i, j)])
    });
    let (mut worst, mut at) = (0.0, MomentEntry::Mean(0));
    for i in 0..k {
        if mean_z[i].abs() > worst {
            worst = mean_z[i].abs();
            at = MomentEntry::Mean(i);
        }
        for j in 0..=i {
            if cov_z[(i, j)].abs() > worst {
                worst = cov_z[(i, j)].abs();
                at = MomentEntry::Cov(i, j);
            }
        }
    }
    Ok(McComparison {
        max_abs_z: worst,
        worst: at,
        mean_z,
        cov_z,
    })
}
