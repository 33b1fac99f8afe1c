//! Estimation chain from raw frames to photon statistics: temporal-mode
//! PCA, projection onto the mode, shot-noise calibration, diagonal
//! maximum-likelihood tomography and bootstrap errors.

pub mod bootstrap;
pub mod calibration;
pub mod pca;
pub mod tomography;

pub use bootstrap::{bootstrap, tomography_with_errors, BootstrapOptions, BootstrapRun, Resample};
pub use calibration::ShotNoiseReference;
pub use pca::{pca_modes, PcaResult};
pub use tomography::{em_fit, mle_tomography, BootstrapSe, DesignMatrix, EmOptions, TomographyResult};

use crate::error::Result;
use crate::sim::FrameSet;
use crate::spectral::TemporalMode;

/// `x_k = Σ_j h_j · trace_kj` for every frame.
pub fn project_quadratures(frames: &FrameSet, mode: &TemporalMode) -> Result<Vec<f64>> {
    mode.check_grid(frames.grid)?;
    Ok(frames.iter().map(|f| mode.dot(f)).collect())
}
