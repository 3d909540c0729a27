//! Moment-based estimation of the separation between two thermal point
//! sources.
//!
//! The crate builds the first and second moments of photon counts for
//! Hermite-Gauss mode demultiplexing (with misalignment, crosstalk and dark
//! counts) and for pixelized direct imaging, and finds the linear observable
//! `Σ m_k n_k` with the largest error-propagation sensitivity
//! `M = DᵀΓ⁻¹D`.
//!
//! ```
//! use superres::{demux_moments, sensitivity, ModeBasis, Misalignment, NoiseModel, Scene};
//!
//! let scene = Scene::new(0.6, std::f64::consts::FRAC_PI_4, 1.5, 0.0, 1.0, 1.0)?;
//! let data = demux_moments(&scene, &Misalignment::none(), &NoiseModel::ideal(), &ModeBasis::full(2))?;
//! let best = sensitivity(&data)?;
//! assert!(best.m_value > 0.0 && best.m_value <= 3.0);
//! # Ok::<(), superres::Error>(())
//! ```
//!
//! Lengths are in the same unit as the PSF waist `w`; `x = d/2w` is the
//! dimensionless separation used throughout.

pub mod asymptotics;
pub mod demux;
pub mod direct_imaging;
pub mod error;
pub mod hg_overlap;
pub mod ideal;
pub mod mc;
pub mod moments;
pub mod noise;
pub mod numerics;
pub mod scene;

pub use asymptotics::{
    approx_sensitivity, dmin_closed_form, dmin_demux, dmin_direct_imaging, dmin_solve, ApproxRegime,
    DminClosedForm, DminQuery, DminRegime, DminScan,
};
pub use demux::{demux_moments, demux_moments_reduced, reduce_degenerate, MomentData, NoiseModel};
pub use direct_imaging::{di_sensitivity, di_small_separation, pixel_overlaps, DirectImagingMoments, PixelGrid};
pub use error::{Error, Result};
pub use hg_overlap::{beta, overlap_delta, overlap_table, FieldOverlaps, OverlapTable, Sign};
pub use ideal::{
    analytic_inverse, coefficients_ideal, qfi_equal_brightness, sensitivity_asymptotic, sensitivity_ideal,
};
pub use mc::{sample_counts, McConfig, McEstimate, SamplerPath};
pub use moments::{chi_squared_inverse, sensitivity, sensitivity_from, SensitivityResult};
pub use noise::{gell_mann_generators, sample_crosstalk, CrosstalkMatrix, DarkCounts};
pub use scene::{Misalignment, Mode, ModeBasis, Scene};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/overlaps.md")]
    mod overlaps {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
    #[doc = include_str!("../../../book/src/demux.md")]
    mod demux {}
    #[doc = include_str!("../../../book/src/ideal.md")]
    mod ideal {}
    #[doc = include_str!("../../../book/src/direct_imaging.md")]
    mod direct_imaging {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    mod asymptotics {}
    #[doc = include_str!("../../../book/src/monte_carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
