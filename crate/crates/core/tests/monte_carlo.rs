//! Sampled photon counts against the analytic moments.

use std::f64::consts::FRAC_PI_4;

use superres::demux::{demux_moments, NoiseModel};
use superres::mc::{compare, compare_estimates, sample_counts, McConfig, SamplerPath};
use superres::noise::{sample_crosstalk, DarkCounts};
use superres::{Misalignment, ModeBasis, Scene};

fn run(scene: &Scene, mis: &Misalignment, noise: &NoiseModel, path: SamplerPath, seed: u64) -> superres::mc::McEstimate {
    let mc = McConfig::new(400_000, seed).unwrap().with_path(path);
    sample_counts(scene, mis, noise, &ModeBasis::full(2), &mc).unwrap()
}

#[test]
fn both_samplers_reproduce_noisy_moments() {
    let s = Scene::new(0.8, 0.5, 1.2, 0.4, 1.0, 1.0).unwrap();
    let mis = Misalignment::new(0.15, 1.0).unwrap();
    let noise = NoiseModel::ideal()
        .with_crosstalk(sample_crosstalk(9, 0.01, 3).unwrap())
        .with_dark(DarkCounts::uniform(9, 0.1).unwrap());
    let exact = demux_moments(&s, &mis, &noise, &ModeBasis::full(2)).unwrap();
    let a = run(&s, &mis, &noise, SamplerPath::SymmetricModes, 1);
    let b = run(&s, &mis, &noise, SamplerPath::IndependentSources, 2);
    assert!(compare(&a, &exact).unwrap().passes(5.0));
    assert!(compare(&b, &exact).unwrap().passes(5.0));
    assert!(compare_estimates(&a, &b).unwrap().passes(5.0));
}

#[test]
fn flipped_correlation_is_detected() {
    // γ → -γ flips the sign of the symmetric/antisymmetric correlation
    let s = Scene::new(0.6, FRAC_PI_4, 2.0, 0.6, 1.0, 1.0).unwrap();
    let flipped = s.with_gamma(-0.6).unwrap();
    let mis = Misalignment::new(0.3, 0.2).unwrap();
    let noise = NoiseModel::ideal();
    let exact = demux_moments(&s, &mis, &noise, &ModeBasis::full(2)).unwrap();
    let est = run(&flipped, &mis, &noise, SamplerPath::SymmetricModes, 9);
    let cmp = compare(&est, &exact).unwrap();
    assert!(cmp.max_abs_z > 20.0, "flip went unnoticed: {}", cmp.max_abs_z);
}

#[test]
fn runs_are_reproducible() {
    let s = Scene::new(0.4, 0.3, 1.0, 0.0, 1.0, 1.0).unwrap();
    let mc = McConfig::new(20_000, 5).unwrap().with_batches(10);
    let basis = ModeBasis::full(1);
    let a = sample_counts(&s, &Misalignment::none(), &NoiseModel::ideal(), &basis, &mc).unwrap();
    let b = sample_counts(&s, &Misalignment::none(), &NoiseModel::ideal(), &basis, &mc).unwrap();
    assert_eq!(a, b);
    let c = sample_counts(&s, &Misalignment::none(), &NoiseModel::ideal(), &basis, &McConfig { seed: 6, ..mc }).unwrap();
    assert_ne!(a.means, c.means);
}

#[test]
fn dark_counts_alone_are_bose_einstein() {
    // negligible source light: counts are the geometric dark counts
    let s = Scene::new(0.5, 0.0, 1e-12, 0.0, 1.0, 1.0).unwrap();
    let noise = NoiseModel::ideal().with_dark(DarkCounts::uniform(4, 0.7).unwrap());
    let mc = McConfig::new(200_000, 17).unwrap();
    let est = sample_counts(&s, &Misalignment::none(), &noise, &ModeBasis::full(1), &mc).unwrap();
    for k in 0..4 {
        assert!((est.means[k] - 0.7).abs() < 5.0 * est.mean_se[k]);
        assert!((est.cov[(k, k)] - 0.7 * 1.7).abs() < 5.0 * est.cov_se[(k, k)]);
    }
}
