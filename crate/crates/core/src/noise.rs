//! Measurement imperfections: mode crosstalk and detector dark counts.
//!
//! Crosstalk is a unitary `C = exp(-iε Σ λ_i G_i)` built from the
//! generalized Gell-Mann matrices `G_i` with random non-negative weights
//! `λ_i` of unit 2-norm. The strength `ε` is calibrated per realization so
//! that the mean off-diagonal power
//!
//! ```text
//! mean|c|² = Σ_{k≠l} |c_kl|² / (K(K-1))
//! ```
//!
//! hits a requested target.
//!
//! Realizations are reproducible: the weights come from a ChaCha8 stream
//! seeded with `seed`, and ensemble member `i` reads stream `i` of that
//! generator (see [`crosstalk_ensemble`]).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hg_overlap::FieldOverlaps;
use crate::scene::Scene;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// The `K² - 1` generalized Gell-Mann matrices of `su(K)`.
///
/// Order: symmetric `E_jk + E_kj` for `j < k` (lexicographic), then
/// antisymmetric `-i E_jk + i E_kj` in the same order, then the diagonal
/// ones with increasing size of their support. Each is Hermitian and
/// traceless with `Tr(G_i G_j) = 2 δ_ij`.
pub fn gell_mann_generators(k: usize) -> Result<Vec<DMatrix<Complex64>>> {
    if k < 2 {
        return Err(Error::Domain(format!("Gell-Mann generators need K >= 2, got {k}")));
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|j| (j + 1..k).map(move |l| (j, l))).collect();
    let mut out = Vec::with_capacity(k * k - 1);
    for &(j, l) in &pairs {
        let mut g = DMatrix::from_element(k, k, ZERO);
        g[(j, l)] = ONE;
        g[(l, j)] = ONE;
        out.push(g);
    }
    for &(j, l) in &pairs {
        let mut g = DMatrix::from_element(k, k, ZERO);
        g[(j, l)] = Complex64::new(0.0, -1.0);
        g[(l, j)] = Complex64::new(0.0, 1.0);
        out.push(g);
    }
    for size in 1..k {
        let norm = (2.0 / (size * (size + 1)) as f64).sqrt();
        let mut g = DMatrix::from_element(k, k, ZERO);
        for j in 0..size {
            g[(j, j)] = Complex64::new(norm, 0.0);
        }
        g[(size, size)] = Complex64::new(-norm * size as f64, 0.0);
        out.push(g);
    }
    Ok(out)
}

/// Mean off-diagonal power `Σ_{k≠l}|c_kl|² / K(K-1)` of a square matrix.
pub fn mean_offdiag_power(c: &DMatrix<Complex64>) -> f64 {
    let k = c.nrows();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                acc += c[(i, j)].norm_sqr();
            }
        }
    }
    acc / (k * (k - 1)) as f64
}

/// A unitary crosstalk matrix `c_kl` mapping ideal modes onto the measured
/// ones, `v_k = Σ_l c_kl u_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    entries: DMatrix<Complex64>,
    epsilon: f64,
    mean_offdiag_power: f64,
    seed: u64,
    stream: u64,
}

impl CrosstalkMatrix {
    /// No crosstalk.
    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
            epsilon: 0.0,
            mean_offdiag_power: 0.0,
            seed: 0,
            stream: 0,
        }
    }

    /// Wraps an explicit unitary (for instance a uniform crosstalk model).
    pub fn from_unitary(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() < 2 {
            return Err(Error::Domain("crosstalk must be a square matrix of size >= 2".into()));
        }
        let defect = unitarity_defect(&entries);
        if defect > 1e-10 {
            return Err(Error::Domain(format!("crosstalk matrix is not unitary (defect {defect:e})")));
        }
        let p = mean_offdiag_power(&entries);
        Ok(Self {
            entries,
            epsilon: f64::NAN,
            mean_offdiag_power: p,
            seed: 0,
            stream: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Generator strength `ε` (NaN for externally supplied matrices).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mean_offdiag_power(&self) -> f64 {
        self.mean_offdiag_power
    }

    /// `(seed, stream)` the weights were drawn from.
    pub fn provenance(&self) -> (u64, u64) {
        (self.seed, self.stream)
    }

    pub fn is_identity(&self) -> bool {
        self.entries == DMatrix::identity(self.dim(), self.dim())
    }

    /// Largest `|(C C†)_ij - δ_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.entries)
    }
}

fn unitarity_defect(c: &DMatrix<Complex64>) -> f64 {
    let prod = c * c.adjoint();
    let k = c.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

/// Spectral form of the random Hermitian generator `H = Σ λ_i G_i`, so that
/// `exp(-iεH)` is cheap for any `ε`.
struct Generator {
    vectors: DMatrix<Complex64>,
    values: Vec<f64>,
    small_eps_coefficient: f64,
}

impl Generator {
    fn draw(k: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let gens = gell_mann_generators(k)?;
        let mut lambda: Vec<f64> = (0..gens.len()).map(|_| rng.random::<f64>()).collect();
        let norm = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
        lambda.iter_mut().for_each(|l| *l /= norm);
        let mut h = DMatrix::from_element(k, k, ZERO);
        for (l, g) in lambda.iter().zip(&gens) {
            h += g * Complex64::new(*l, 0.0);
        }
        let small_eps_coefficient = mean_offdiag_power(&h);
        let eig = h.symmetric_eigen();
        Ok(Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
            small_eps_coefficient,
        })
    }

    fn unitary(&self, eps: f64) -> DMatrix<Complex64> {
        let k = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -eps * v);
            for i in 0..k {
                scaled[(i, j)] *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }

    fn power(&self, eps: f64) -> f64 {
        mean_offdiag_power(&self.unitary(eps))
    }
}

/// Samples a crosstalk unitary of dimension `k` whose mean off-diagonal
/// power equals `target_offdiag_power` (relative accuracy `1e-6`).
pub fn sample_crosstalk(k: usize, target_offdiag_power: f64, seed: u64) -> Result<CrosstalkMatrix> {
    sample_crosstalk_stream(k, target_offdiag_power, seed, 0)
}

/// As [`sample_crosstalk`], reading weights from stream `stream` of the
/// ChaCha8 generator seeded with `seed`.
pub fn sample_crosstalk_stream(k: usize, target: f64, seed: u64, stream: u64) -> Result<CrosstalkMatrix> {
    if k < 2 {
        return Err(Error::Domain(format!("crosstalk needs K >= 2, got {k}")));
    }
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Domain(format!("target crosstalk power must be >= 0, got {target}")));
    }
    if target == 0.0 {
        let mut id = CrosstalkMatrix::identity(k);
        id.seed = seed;
        id.stream = stream;
        return Ok(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let generator = Generator::draw(k, &mut rng)?;

    // p(ε) ≈ ε² · mean|H_kl|² for small ε; start the bracket there.
    let mut hi = (target / generator.small_eps_coefficient).sqrt();
    let mut tries = 0;
    while generator.power(hi) < target {
        hi *= 1.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::Convergence(format!(
                "crosstalk power {target} unreachable for K = {k}"
            )));
        }
    }
    // The calibration is only trusted where p(ε) increases monotonically.
    let probes = 64;
    let mut last = 0.0;
    for i in 1..=probes {
        let p = generator.power(hi * i as f64 / probes as f64);
        if p < last {
            return Err(Error::Convergence(format!(
                "crosstalk power is not monotone in epsilon below target {target}"
            )));
        }
        last = p;
    }
    let eps = crate::numerics::bisect(|e| generator.power(e) - target, 0.0, hi, 1e-14, 200)
        .ok_or_else(|| Error::Convergence("crosstalk calibration bracket lost".into()))?;
    let entries = generator.unitary(eps);
    let realized = mean_offdiag_power(&entries);
    if (realized - target).abs() > 1e-6 * target {
        return Err(Error::Convergence(format!(
            "crosstalk calibration reached {realized}, target {target}"
        )));
    }
    Ok(CrosstalkMatrix {
        entries,
        epsilon: eps,
        mean_offdiag_power: realized,
        seed,
        stream,
    })
}

/// `count` independent crosstalk matrices; member `i` uses stream `i`.
pub fn crosstalk_ensemble(k: usize, target: f64, seed: u64, count: usize) -> Result<Vec<CrosstalkMatrix>> {
    use rayon::prelude::*;
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_crosstalk_stream(k, target, seed, i))
        .collect()
}

/// `f_{±,k} ← Σ_l c_kl f_{±,l}` and likewise for the derivatives.
pub fn apply_crosstalk(ct: &CrosstalkMatrix, table: &FieldOverlaps) -> Result<FieldOverlaps> {
    if !table.basis.is_full() {
        return Err(Error::Domain("crosstalk acts on the full (Q+1)^2 basis".into()));
    }
    if ct.dim() != table.basis.len() {
        return Err(Error::DimensionMismatch {
            expected: table.basis.len(),
            found: ct.dim(),
            context: "crosstalk dimension vs. basis size",
        });
    }
    let mix = |v: &[Complex64]| -> Vec<Complex64> {
        let c = ct.entries();
        (0..c.nrows())
            .map(|i| (0..c.ncols()).map(|j| c[(i, j)] * v[j]).sum())
            .collect()
    };
    Ok(FieldOverlaps {
        basis: table.basis.clone(),
        f_plus: mix(&table.f_plus),
        f_minus: mix(&table.f_minus),
        df_plus: mix(&table.df_plus),
        df_minus: mix(&table.df_minus),
    })
}

/// Mean dark counts `N_k^dc` per mode of the full basis.
///
/// Dark counts are Bose-Einstein distributed, so each contributes
/// `N^dc (N^dc + 1)` to the variance of its mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkCounts {
    per_mode_mean: Vec<f64>,
}

impl DarkCounts {
    pub fn new(per_mode_mean: Vec<f64>) -> Result<Self> {
        if per_mode_mean.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("dark count means must be finite and >= 0".into()));
        }
        Ok(Self { per_mode_mean })
    }

    pub fn none(dim: usize) -> Self {
        Self { per_mode_mean: vec![0.0; dim] }
    }

    /// The same mean `n_dc` in each of `dim` modes.
    pub fn uniform(dim: usize, n_dc: f64) -> Result<Self> {
        Self::new(vec![n_dc; dim])
    }

    /// Uniform level given as `σ = N^dc / 2Nκ`.
    pub fn from_sigma(dim: usize, sigma: f64, scene: &Scene) -> Result<Self> {
        Self::uniform(dim, sigma * 2.0 * scene.received())
    }

    pub fn dim(&self) -> usize {
        self.per_mode_mean.len()
    }

    pub fn per_mode_mean(&self) -> &[f64] {
        &self.per_mode_mean
    }

    /// Variance contribution `N^dc (N^dc + 1)` of mode `k`.
    pub fn variance(&self, k: usize) -> f64 {
        let n = self.per_mode_mean[k];
        n * (n + 1.0)
    }

    /// `σ_k = N_k^dc / 2Nκ`.
    pub fn sigma(&self, scene: &Scene) -> Vec<f64> {
        self.per_mode_mean
            .iter()
            .map(|n| n / (2.0 * scene.received()))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.per_mode_mean.iter().all(|&n| n == 0.0)
    }
}
