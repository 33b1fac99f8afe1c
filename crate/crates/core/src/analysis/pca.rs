use log::warn;
use nalgebra::{DMatrix, Dyn, MatrixView, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::FrameSet;
use crate::spectral::TemporalMode;

/// Principal components of an ensemble of frames.
#[derive(Debug, Clone, Serialize)]
pub struct PcaResult {
    /// Modal quadrature variances, descending. Components at numerical
    /// zero (rank deficiency when there are fewer frames than samples) are
    /// dropped.
    pub eigenvalues: Vec<f64>,
    pub principal_mode: TemporalMode,
    pub component_count: usize,
}

impl PcaResult {
    pub fn top(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Median over all `frame_len` components, counting dropped ones as
    /// zero.
    pub fn median_eigenvalue(&self) -> f64 {
        let n = self.principal_mode.len();
        let at = |i: usize| self.eigenvalues.get(i).copied().unwrap_or(0.0);
        if n % 2 == 1 {
            at(n / 2)
        } else {
            0.5 * (at(n / 2 - 1) + at(n / 2))
        }
    }
}

/// Eigen-decomposition of the sample covariance of mean-subtracted frames.
///
/// The principal mode is the eigenvector of the largest eigenvalue, with the
/// herald placed at the frame centre.
pub fn pca_modes(frames: &FrameSet) -> Result<PcaResult> {
    let k = frames.len();
    let n = frames.frame_len();
    if k < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 frames, got {k}")));
    }
    if k < 10 * n {
        warn!("PCA on {k} frames of {n} samples: fewer than 10 frames per sample, the covariance will be noisy");
    }
    if let Some(i) = frames.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData(i));
    }

    let covariance = sample_covariance(frames);
    let eigen = SymmetricEigen::new(covariance);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let top = eigen.eigenvalues[order[0]];
    if !(top > 0.0) {
        return Err(Error::Numerical("sample covariance has no positive eigenvalue".into()));
    }
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| eigen.eigenvalues[i])
        .take_while(|&v| v > top * 1e-12)
        .collect();
    let principal = eigen.eigenvectors.column(order[0]).iter().copied().collect();
    Ok(PcaResult {
        component_count: eigenvalues.len(),
        eigenvalues,
        principal_mode: TemporalMode::new(principal, frames.grid.dt, frames.grid.center())?,
    })
}

/// `(XᵀX − K·m mᵀ) / (K − 1)` with frames as the rows of `X`.
fn sample_covariance(frames: &FrameSet) -> DMatrix<f64> {
    let k = frames.len();
    let n = frames.frame_len();
    let data = frames.as_slice();
    // Row-major K×N storage is column-major N×K: frames are columns of `a`.
    let a = MatrixView::<f64, Dyn, Dyn, Dyn, Dyn>::from_slice_with_strides(data, n, k, 1, n);
    let at = MatrixView::<f64, Dyn, Dyn, Dyn, Dyn>::from_slice_with_strides(data, k, n, n, 1);
    let mut mean = vec![0.0; n];
    for frame in frames.iter() {
        for (m, v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= k as f64;
    }
    let mut c = DMatrix::<f64>::zeros(n, n);
    c.gemm(1.0 / (k as f64 - 1.0), &a, &at, 0.0);
    let scale = k as f64 / (k as f64 - 1.0);
    for j in 0..n {
        for i in 0..n {
            c[(i, j)] -= scale * mean[i] * mean[j];
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TimeGrid;

    #[test]
    fn covariance_matches_definition() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let data = vec![1.0, 2.0, 0.0, 3.0, -1.0, 1.0, 2.0, 2.0, 5.0, 0.0, 1.0, 2.0];
        let frames = FrameSet::new(grid, data.clone()).unwrap();
        let c = sample_covariance(&frames);
        let rows: Vec<&[f64]> = data.chunks(3).collect();
        for i in 0..3 {
            for j in 0..3 {
                let mi = rows.iter().map(|r| r[i]).sum::<f64>() / 4.0;
                let mj = rows.iter().map(|r| r[j]).sum::<f64>() / 4.0;
                let direct = rows.iter().map(|r| (r[i] - mi) * (r[j] - mj)).sum::<f64>() / 3.0;
                assert!((c[(i, j)] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_few_frames() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let frames = FrameSet::new(grid, vec![1.0; 4]).unwrap();
        assert!(matches!(pca_modes(&frames), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn rank_one_ensemble() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let shape = [0.1, 0.7, -0.7, 0.1];
        let data: Vec<f64> = (0..50)
            .flat_map(|i| {
                let a = (i as f64 * 0.37).sin();
                shape.iter().map(move |s| -a * s)
            })
            .collect();
        let pca = pca_modes(&FrameSet::new(grid, data).unwrap()).unwrap();
        assert_eq!(pca.component_count, 1);
        let norm = shape.iter().map(|s| s * s).sum::<f64>().sqrt();
        // Sign convention: the largest-magnitude sample is positive.
        let expected = [0.1, 0.7, -0.7, 0.1].map(|s| s / norm);
        let flip = if pca.principal_mode.samples[1] > 0.0 { 1.0 } else { -1.0 };
        for (a, b) in pca.principal_mode.samples.iter().zip(expected) {
            assert!((a - flip * b).abs() < 1e-10);
        }
        assert_eq!(pca.median_eigenvalue(), 0.0);
    }
}
