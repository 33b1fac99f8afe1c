use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::FrameSet;
use crate::spectral::TemporalMode;

/// Detector noise floor measured with the signal blocked.
///
/// Holds the stationary autocovariance `c(m)` of vacuum-reference traces, so
/// the vacuum variance of any mode `u` follows as `Σ_ij u_i u_j c(|i − j|)`
/// with every frame and every sample position contributing.
#[derive(Debug, Clone, Serialize)]
pub struct ShotNoiseReference {
    pub autocovariance: Vec<f64>,
    pub frames: usize,
}

impl ShotNoiseReference {
    pub fn from_frames(vacuum: &FrameSet) -> Result<Self> {
        let n = vacuum.frame_len();
        if vacuum.len() < 2 {
            return Err(Error::InsufficientData("shot-noise reference needs at least 2 frames".into()));
        }
        if let Some(i) = vacuum.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData(i));
        }
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut power = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for frame in vacuum.iter() {
            for (b, &v) in buf.iter_mut().zip(frame) {
                *b = Complex64::new(v, 0.0);
            }
            buf[n..].fill(Complex64::new(0.0, 0.0));
            forward.process(&mut buf);
            for (p, b) in power.iter_mut().zip(&buf) {
                *p += b.norm_sqr();
            }
        }
        let mut spectrum: Vec<Complex64> = power.into_iter().map(|p| Complex64::new(p, 0.0)).collect();
        inverse.process(&mut spectrum);
        let frames = vacuum.len();
        let autocovariance = (0..n)
            .map(|m| spectrum[m].re / (len as f64 * frames as f64 * (n - m) as f64))
            .collect();
        Ok(Self { autocovariance, frames })
    }

    /// Vacuum quadrature variance of `mode`.
    pub fn mode_variance(&self, mode: &TemporalMode) -> Result<f64> {
        let u = &mode.samples;
        if u.len() != self.autocovariance.len() {
            return Err(Error::GridMismatch(format!(
                "mode has {} samples, reference frames have {}",
                u.len(),
                self.autocovariance.len()
            )));
        }
        let lagged = crate::spectral::fft_convolve(u, &u.iter().rev().copied().collect::<Vec<_>>());
        let centre = u.len() - 1;
        let var = self.autocovariance[0] * lagged[centre]
            + 2.0
                * (1..u.len())
                    .map(|m| self.autocovariance[m] * lagged[centre + m])
                    .sum::<f64>();
        if !(var > 0.0) {
            return Err(Error::Numerical("non-positive vacuum variance in the analysis mode".into()));
        }
        Ok(var)
    }

    /// Factor that maps raw projections onto shot-noise units (vacuum
    /// variance 1/2).
    pub fn scale_for(&self, mode: &TemporalMode) -> Result<f64> {
        Ok((0.5 / self.mode_variance(mode)?).sqrt())
    }
}
