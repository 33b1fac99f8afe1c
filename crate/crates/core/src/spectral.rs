//! Photon-pair correlation, filter chains and the heralded temporal mode.
//!
//! Every filter in the chain is a single-pole section: optical cavities and
//! the fibre Bragg grating are Lorentzian amplitude filters, the homodyne
//! electronics are first-order high- and low-pass stages. Each section is
//! discretized with a first-order hold, which keeps the sampled response
//! second-order accurate in `dt` (the kink of `r₁₂` and the step of a causal
//! cavity response would otherwise bias the mode by O(γ·dt)).

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy fraction of `r₁₂` allowed outside the sampled lag window.
const TRUNCATION_TOL: f64 = 1e-4;
/// Largest response magnitude tolerated at the end of the transform window.
const WRAP_TOL: f64 = 1e-3;
/// Required herald-time margin, in decay constants.
const MARGIN_DECAYS: f64 = 5.0;

/// Uniform time grid shared by modes, frames and impulse responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if len < 2 {
            return Err(Error::InvalidGrid(format!("grid needs ≥ 2 samples, got {len}")));
        }
        Ok(Self { dt, len })
    }

    /// Index of the frame centre, where the herald time sits by default.
    pub fn center(&self) -> usize {
        self.len / 2
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.len as f64
    }
}

fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    LorentzianCavity,
    Fbg,
    ElectricalHpf,
    ElectricalLpf,
}

/// One section of a filter chain. `hwhm_or_cutoff` is the HWHM of a
/// Lorentzian line or the 3 dB corner of an electrical stage, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub hwhm_or_cutoff: f64,
    pub center_offset: f64,
}

impl FilterSpec {
    pub fn new(kind: FilterKind, hwhm_or_cutoff: f64) -> Result<Self> {
        if !(hwhm_or_cutoff > 0.0) || !hwhm_or_cutoff.is_finite() {
            return Err(Error::Domain {
                name: "hwhm_or_cutoff",
                value: hwhm_or_cutoff,
                domain: "(0, ∞) Hz",
            });
        }
        Ok(Self {
            kind,
            hwhm_or_cutoff,
            center_offset: 0.0,
        })
    }

    pub fn cavity(hwhm: f64) -> Result<Self> {
        Self::new(FilterKind::LorentzianCavity, hwhm)
    }

    pub fn fbg(hwhm: f64) -> Result<Self> {
        Self::new(FilterKind::Fbg, hwhm)
    }

    pub fn highpass(cutoff: f64) -> Result<Self> {
        Self::new(FilterKind::ElectricalHpf, cutoff)
    }

    pub fn lowpass(cutoff: f64) -> Result<Self> {
        Self::new(FilterKind::ElectricalLpf, cutoff)
    }

    fn section(&self, dt: f64) -> Result<SinglePole> {
        if self.center_offset != 0.0 {
            return Err(Error::UnsupportedFilter(format!(
                "{:?} detuned by {} Hz; only baseband filters have a real impulse response",
                self.kind, self.center_offset
            )));
        }
        Ok(SinglePole::new(
            2.0 * PI * self.hwhm_or_cutoff,
            dt,
            self.kind == FilterKind::ElectricalHpf,
        ))
    }
}

/// First-order-hold discretization of `γ/(s + γ)`, or of its complement
/// `s/(s + γ)` for a high-pass stage:
/// `y_k = a·y_{k−1} + c0·x_k + c1·x_{k−1}`.
#[derive(Debug, Clone, Copy)]
struct SinglePole {
    a: f64,
    c0: f64,
    c1: f64,
    highpass: bool,
}

impl SinglePole {
    fn new(rate: f64, dt: f64, highpass: bool) -> Self {
        let x = rate * dt;
        let a = (-x).exp();
        // (1 − a)/x loses precision for tiny x; its series is exact enough there.
        let q = if x < 1e-6 { 1.0 - x / 2.0 + x * x / 6.0 } else { -(-x).exp_m1() / x };
        let c0 = 1.0 - q;
        let c1 = q - a;
        Self { a, c0, c1, highpass }
    }

    fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let lp = (self.c0 + self.c1 * z1) / (1.0 - self.a * z1);
        if self.highpass {
            1.0 - lp
        } else {
            lp
        }
    }

    fn run(&self, signal: &mut [f64]) {
        let (mut y_prev, mut x_prev) = (0.0, 0.0);
        for v in signal.iter_mut() {
            let x = *v;
            let y = self.a * y_prev + self.c0 * x + self.c1 * x_prev;
            y_prev = y;
            x_prev = x;
            *v = if self.highpass { x - y } else { y };
        }
    }
}

/// Runs `signal` through the chain in the time domain, starting from rest.
pub fn apply_filter_chain(chain: &[FilterSpec], dt: f64, signal: &mut [f64]) -> Result<()> {
    for spec in chain {
        spec.section(dt)?.run(signal);
    }
    Ok(())
}

/// Photon-pair time correlation `r₁₂(τ)` sampled at lags
/// `τ = m·dt, m = −half ..= half`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    pub samples: Vec<f64>,
    pub dt: f64,
    /// Decay rate γ in rad/s.
    pub decay_rate: f64,
    half: usize,
}

impl CorrelationFunction {
    pub fn half_width(&self) -> usize {
        self.half
    }

    /// `r₁₂(m·dt)`, zero outside the sampled window.
    pub fn at_lag(&self, m: i64) -> f64 {
        let idx = m + self.half as i64;
        if idx < 0 || idx as usize >= self.samples.len() {
            0.0
        } else {
            self.samples[idx as usize]
        }
    }

    pub fn decay_time(&self) -> f64 {
        1.0 / self.decay_rate
    }
}

/// Single-Lorentzian-line OPO correlation `r₁₂(t) = e^(−γ|t|)`, `γ = 2π·hwhm`,
/// sampled over `grid.len/2` lags on either side.
pub fn opo_correlation(hwhm: f64, grid: TimeGrid) -> Result<CorrelationFunction> {
    if !(hwhm > 0.0) || !hwhm.is_finite() {
        return Err(Error::Domain {
            name: "opo_hwhm",
            value: hwhm,
            domain: "(0, ∞) Hz",
        });
    }
    let gamma = 2.0 * PI * hwhm;
    let half = grid.len / 2;
    let b = (-2.0 * gamma * grid.dt).exp();
    let outside = 2.0 * b.powi(half as i32 + 1) / (1.0 - b);
    let total = 1.0 + 2.0 * b / (1.0 - b);
    if outside / total > TRUNCATION_TOL {
        return Err(Error::Truncation(format!(
            "{:.2e} of the correlation energy lies beyond ±{} s",
            outside / total,
            half as f64 * grid.dt
        )));
    }
    let samples = (-(half as i64)..=half as i64)
        .map(|m| (-gamma * (m as f64 * grid.dt).abs()).exp())
        .collect();
    Ok(CorrelationFunction {
        samples,
        dt: grid.dt,
        decay_rate: gamma,
        half,
    })
}

/// Discrete impulse response; `samples[origin]` is the response at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub origin: usize,
}

impl ImpulseResponse {
    /// Unit discrete delta at t = 0.
    pub fn delta(grid: TimeGrid) -> Self {
        let mut samples = vec![0.0; grid.len];
        samples[0] = 1.0;
        Self {
            samples,
            dt: grid.dt,
            origin: 0,
        }
    }

    /// Amplitude-weighted mean delay in seconds.
    pub fn mean_delay(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, v) in self.samples.iter().enumerate() {
            num += (k as f64 - self.origin as f64) * v.abs();
            den += v.abs();
        }
        if den > 0.0 {
            num / den * self.dt
        } else {
            0.0
        }
    }
}

/// Impulse response of a filter cascade: the discrete section responses are
/// multiplied on a zero-padded frequency grid and inverse transformed.
///
/// Fails with [`Error::GridResolution`] when the response has not decayed
/// below `1e-3` of its peak by the end of the transform window, i.e. when
/// the inverse transform would alias the tail back onto the head.
pub fn filter_impulse_response(chain: &[FilterSpec], grid: TimeGrid) -> Result<ImpulseResponse> {
    if chain.is_empty() {
        return Err(Error::EmptyFilterChain);
    }
    let sections = chain
        .iter()
        .map(|s| s.section(grid.dt))
        .collect::<Result<Vec<_>>>()?;
    let n_fft = (4 * grid.len).next_power_of_two();
    let mut spectrum: Vec<Complex64> = (0..n_fft)
        .map(|k| {
            let omega = 2.0 * PI * k as f64 / n_fft as f64;
            sections.iter().map(|s| s.response(omega)).product()
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n_fft).process(&mut spectrum);
    let response: Vec<f64> = spectrum.iter().map(|c| c.re / n_fft as f64).collect();
    let peak = response.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tail = response[n_fft - 1].abs();
    if tail > WRAP_TOL * peak {
        return Err(Error::GridResolution(format!(
            "response still at {:.2e} of peak after {} samples; the chain is too slow for this window",
            tail / peak,
            n_fft
        )));
    }
    Ok(ImpulseResponse {
        samples: response[..grid.len].to_vec(),
        dt: grid.dt,
        origin: 0,
    })
}

/// Unit-norm real mode over a uniform grid. The largest-magnitude sample is
/// positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMode {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub t0_index: usize,
}

impl TemporalMode {
    /// Normalizes `samples` to unit ℓ² norm and applies the sign convention.
    pub fn new(mut samples: Vec<f64>, dt: f64, t0_index: usize) -> Result<Self> {
        let norm = samples.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical("temporal mode has zero or non-finite norm".into()));
        }
        let peak = samples
            .iter()
            .copied()
            .fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let scale = peak.signum() / norm;
        for v in &mut samples {
            *v *= scale;
        }
        Ok(Self {
            samples,
            dt,
            t0_index,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            dt: self.dt,
            len: self.samples.len(),
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - self.t0_index as f64) * self.dt
    }

    pub fn check_grid(&self, grid: TimeGrid) -> Result<()> {
        if self.samples.len() != grid.len || !same_dt(self.dt, grid.dt) {
            return Err(Error::GridMismatch(format!(
                "mode has {} samples at dt = {} s, expected {} at dt = {} s",
                self.samples.len(),
                self.dt,
                grid.len,
                grid.dt
            )));
        }
        Ok(())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.samples.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    /// Two-column CSV `t_seconds,amplitude`, time measured from the herald.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_seconds,amplitude")?;
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(out, "{:e},{:e}", self.time(k), v)?;
        }
        Ok(())
    }
}

/// Signed inner product `Σ a_k b_k` of two modes on the same grid.
pub fn mode_overlap(a: &TemporalMode, b: &TemporalMode) -> Result<f64> {
    b.check_grid(a.grid())?;
    Ok(a.dot(&b.samples))
}

/// Squared overlap `(Σ a_k b_k)²`, insensitive to the sign of either mode.
pub fn mode_match(a: &TemporalMode, b: &TemporalMode) -> Result<f64> {
    Ok(mode_overlap(a, b)?.powi(2).min(1.0))
}

/// Linear convolution of two real sequences through a zero-padded FFT.
pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let pad = |s: &[f64]| {
        let mut v: Vec<Complex64> = s.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    fa[..out_len].iter().map(|c| c.re / n as f64).collect()
}

/// Heralded signal mode `h(t) = N[r₁₂ ∗ gʳ](t − t₀)` with `gʳ(t) = g(−t)`,
/// optionally passed through the homodyne-side `post_filters` and
/// re-normalized.
///
/// Discretely, `h_k ∝ Σ_j g_j · r₁₂((k − t₀ + j − origin)·dt)`, evaluated as
/// one FFT convolution over the whole grid.
pub fn heralded_mode(
    r12: &CorrelationFunction,
    g: &ImpulseResponse,
    t0_index: usize,
    post_filters: &[FilterSpec],
) -> Result<TemporalMode> {
    if !same_dt(r12.dt, g.dt) {
        return Err(Error::GridMismatch(format!(
            "correlation sampled at {} s but impulse response at {} s",
            r12.dt, g.dt
        )));
    }
    let n = g.samples.len();
    let m = g.samples.len();
    if t0_index >= n {
        return Err(Error::Truncation(format!("herald index {t0_index} outside {n}-sample grid")));
    }
    let dt = g.dt;
    let tau_r = r12.decay_time();
    let tau_g = g.mean_delay().abs();
    let before = t0_index as f64 * dt;
    let after = (n - 1 - t0_index) as f64 * dt;
    if before < MARGIN_DECAYS * tau_r.max(tau_g) || after < MARGIN_DECAYS * tau_r {
        return Err(Error::Truncation(format!(
            "herald at {before:.3e} s leaves {before:.3e} s / {after:.3e} s margins; need {:.3e} s / {:.3e} s",
            MARGIN_DECAYS * tau_r.max(tau_g),
            MARGIN_DECAYS * tau_r
        )));
    }
    // q is g reversed; rho[i] = r12 at lag (i − t0 − origin).
    let q: Vec<f64> = g.samples.iter().rev().copied().collect();
    let shift = t0_index as i64 + g.origin as i64;
    let rho: Vec<f64> = (0..(n + m - 1) as i64).map(|i| r12.at_lag(i - shift)).collect();
    let full = fft_convolve(&q, &rho);
    let mut h = full[m - 1..m - 1 + n].to_vec();
    apply_filter_chain(post_filters, dt, &mut h)?;
    TemporalMode::new(h, dt, t0_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1e-9, 1024).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let r = opo_correlation(3.7e6, grid()).unwrap();
        assert!((r.decay_time() - 43.0e-9).abs() < 0.05e-9);
        assert_eq!(r.at_lag(0), 1.0);
        assert_eq!(r.at_lag(5), r.at_lag(-5));
        for m in 0..=r.half_width() as i64 {
            assert!((r.at_lag(m) - r.at_lag(-m)).abs() < 1e-9);
        }
        let unit = opo_correlation(1.0 / (2.0 * PI), TimeGrid::new(0.01, 4096).unwrap()).unwrap();
        assert!((unit.at_lag(100) - (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn correlation_truncation() {
        let short = TimeGrid::new(1e-9, 128).unwrap();
        assert!(matches!(opo_correlation(3.7e6, short), Err(Error::Truncation(_))));
        assert!(opo_correlation(0.0, grid()).is_err());
    }

    #[test]
    fn cavity_response_is_one_sided_exponential() {
        let g = filter_impulse_response(&[FilterSpec::cavity(8.2e6).unwrap()], grid()).unwrap();
        let a = (-2.0 * PI * 8.2e6 * 1e-9_f64).exp();
        for k in 1..200 {
            let expect = g.samples[1] * a.powi(k as i32 - 1);
            assert!((g.samples[k] - expect).abs() < 1e-12 * g.samples[1], "k = {k}");
        }
        // The step itself is sampled at roughly half height.
        let ratio = g.samples[0] / g.samples[1];
        assert!((0.45..0.55).contains(&ratio), "{ratio}");
    }

    #[test]
    fn wide_fbg_is_nearly_a_delta() {
        let g = filter_impulse_response(&[FilterSpec::fbg(3.6e9).unwrap()], grid()).unwrap();
        let energy: f64 = g.samples.iter().map(|v| v * v).sum();
        assert!(g.samples[0].powi(2) / energy > 0.95);
    }

    #[test]
    fn chain_errors() {
        assert!(matches!(filter_impulse_response(&[], grid()), Err(Error::EmptyFilterChain)));
        let slow = FilterSpec::cavity(1e3).unwrap();
        assert!(matches!(
            filter_impulse_response(&[slow], grid()),
            Err(Error::GridResolution(_))
        ));
        let mut detuned = FilterSpec::cavity(8.2e6).unwrap();
        detuned.center_offset = 1e6;
        assert!(matches!(
            filter_impulse_response(&[detuned], grid()),
            Err(Error::UnsupportedFilter(_))
        ));
        assert!(FilterSpec::lowpass(-1.0).is_err());
    }

    #[test]
    fn time_domain_filter_matches_transform() {
        let chain = [FilterSpec::cavity(8.2e6).unwrap(), FilterSpec::lowpass(5e7).unwrap()];
        let g = filter_impulse_response(&chain, grid()).unwrap();
        let mut impulse = vec![0.0; 1024];
        impulse[0] = 1.0;
        apply_filter_chain(&chain, 1e-9, &mut impulse).unwrap();
        for (a, b) in g.samples.iter().zip(&impulse) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_filter_gives_two_sided_exponential() {
        let r = opo_correlation(3.7e6, grid()).unwrap();
        let h = heralded_mode(&r, &ImpulseResponse::delta(grid()), 512, &[]).unwrap();
        let expect = TemporalMode::new((0..1024).map(|k| r.at_lag(k as i64 - 512)).collect(), 1e-9, 512).unwrap();
        for (a, b) in h.samples.iter().zip(&expect.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn herald_margin_enforced() {
        let r = opo_correlation(3.7e6, grid()).unwrap();
        let g = ImpulseResponse::delta(grid());
        assert!(matches!(heralded_mode(&r, &g, 100, &[]), Err(Error::Truncation(_))));
        assert!(matches!(heralded_mode(&r, &g, 1000, &[]), Err(Error::Truncation(_))));
        assert!(heralded_mode(&r, &g, 300, &[]).is_ok());
    }

    #[test]
    fn mode_match_examples() {
        let r = opo_correlation(3.7e6, grid()).unwrap();
        let h = heralded_mode(&r, &ImpulseResponse::delta(grid()), 512, &[]).unwrap();
        assert!((mode_match(&h, &h).unwrap() - 1.0).abs() < 1e-12);
        let flipped = TemporalMode {
            samples: h.samples.iter().map(|v| -v).collect(),
            ..h.clone()
        };
        assert!((mode_match(&h, &flipped).unwrap() - 1.0).abs() < 1e-12);
        let other = TemporalMode::new(vec![1.0; 512], 1e-9, 256).unwrap();
        assert!(matches!(mode_match(&h, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn mode_sign_convention() {
        let m = TemporalMode::new(vec![0.1, -2.0, 0.3], 1.0, 1).unwrap();
        assert!(m.samples[1] > 0.0);
        let norm: f64 = m.samples.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(TemporalMode::new(vec![0.0; 4], 1.0, 0).is_err());
    }

    #[test]
    fn mode_csv() {
        let m = TemporalMode::new(vec![1.0, 0.0], 2e-9, 1).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t_seconds,amplitude\n-2e-9,1e0\n0e0,0e0\n");
    }
}
