//! Monte-Carlo generation of heralded homodyne frames.
//!
//! Every frame owns a ChaCha stream selected by its index, so an ensemble is
//! bit-identical for a given seed no matter how the work is scheduled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fock::{apply_loss, PhotonDistribution, QuadratureSampler};
use crate::spectral::{
    apply_filter_chain, filter_impulse_response, heralded_mode, opo_correlation, FilterSpec, TemporalMode,
    TimeGrid,
};

/// Streams at or above this index belong to signal-blocked reference frames.
const VACUUM_STREAM_BASE: u64 = 1 << 62;

/// Origin of a detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldClass {
    True,
    Dark,
    Stray,
}

/// `(P(true), P(dark), P(stray))` from the detector count rates.
pub fn herald_probabilities(config: &ExperimentConfig) -> [f64; 3] {
    let total = config.total_cps;
    [
        (total - config.dark_cps - config.stray_cps) / total,
        config.dark_cps / total,
        config.stray_cps / total,
    ]
}

pub fn herald_class_sampler<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> HeraldClass {
    let [_, p_dark, p_stray] = herald_probabilities(config);
    let u: f64 = rng.random();
    if u < p_dark {
        HeraldClass::Dark
    } else if u < p_dark + p_stray {
        HeraldClass::Stray
    } else {
        HeraldClass::True
    }
}

/// Signal state left by a click: a (mostly) single-photon state after all
/// optical losses for a true herald, vacuum for a false one.
pub fn heralded_state(config: &ExperimentConfig, class: HeraldClass) -> Result<PhotonDistribution> {
    let n_max = config.n_max.max(3);
    match class {
        HeraldClass::Dark | HeraldClass::Stray => PhotonDistribution::vacuum(n_max),
        HeraldClass::True => {
            let w2 = config.two_photon_weight;
            let w3 = config.three_photon_weight;
            let mut probs = vec![0.0; n_max + 1];
            probs[1] = 1.0 - w2 - w3;
            probs[2] = w2;
            probs[3] = w3;
            apply_loss(&PhotonDistribution::new(probs)?, config.optical_loss)
        }
    }
}

/// Exact photon statistics of the simulated ensemble: the herald-class
/// mixture of [`heralded_state`].
pub fn ensemble_state(config: &ExperimentConfig) -> Result<PhotonDistribution> {
    let [p_true, ..] = herald_probabilities(config);
    let signal = heralded_state(config, HeraldClass::True)?;
    let vacuum = PhotonDistribution::vacuum(signal.n_max())?;
    PhotonDistribution::mixture(&[(p_true, &signal), (1.0 - p_true, &vacuum)])
}

/// Loss equivalent of additive electronic noise once quadratures are scaled
/// to the measured vacuum level: `ε / (1 + ε)`.
pub fn electronic_loss_equivalent(noise_rel: f64) -> f64 {
    noise_rel / (1.0 + noise_rel)
}

/// State seen by tomography of shot-noise-calibrated quadratures: the
/// ensemble state with the electronic-noise loss equivalent applied.
pub fn detected_state(config: &ExperimentConfig) -> Result<PhotonDistribution> {
    apply_loss(
        &ensemble_state(config)?,
        electronic_loss_equivalent(config.electronic_noise_rel),
    )
}

/// Optical signal mode `N[r₁₂ ∗ gʳ]` for the configured OPO and idler
/// filters, herald at the frame centre. This is the mode frames are
/// synthesized in, before the homodyne electronics.
pub fn optical_mode(config: &ExperimentConfig) -> Result<TemporalMode> {
    let grid = config.grid()?;
    let r12 = opo_correlation(config.opo_hwhm, grid)?;
    let g = filter_impulse_response(&config.idler_filters()?, grid)?;
    heralded_mode(&r12, &g, grid.center(), &[])
}

/// Mode expected at the detector output: [`optical_mode`] followed by the
/// homodyne electrical filters.
pub fn theory_mode(config: &ExperimentConfig) -> Result<TemporalMode> {
    let grid = config.grid()?;
    let r12 = opo_correlation(config.opo_hwhm, grid)?;
    let g = filter_impulse_response(&config.idler_filters()?, grid)?;
    heralded_mode(&r12, &g, grid.center(), &config.homodyne_filters()?)
}

/// One homodyne record.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Quadrature samples in shot-noise units (vacuum variance 1/2 per
    /// mode before filtering).
    pub trace: Vec<f64>,
    /// Simulation ground truth, never used by the analysis.
    pub herald_class: HeraldClass,
    /// Quadrature drawn for the signal mode, ground truth as well.
    pub signal_quadrature: f64,
    pub rng_tag: u64,
}

/// Contiguous storage for many frames on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub grid: TimeGrid,
    traces: Vec<f64>,
}

impl FrameSet {
    pub fn new(grid: TimeGrid, traces: Vec<f64>) -> Result<Self> {
        if !traces.len().is_multiple_of(grid.len) {
            return Err(Error::GridMismatch(format!(
                "{} samples do not split into frames of {}",
                traces.len(),
                grid.len
            )));
        }
        Ok(Self { grid, traces })
    }

    pub fn empty(grid: TimeGrid) -> Self {
        Self {
            grid,
            traces: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.traces.len() / self.grid.len
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn frame_len(&self) -> usize {
        self.grid.len
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.traces[i * self.grid.len..(i + 1) * self.grid.len]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.traces.chunks_exact(self.grid.len)
    }

    /// All samples, frame after frame.
    pub fn as_slice(&self) -> &[f64] {
        &self.traces
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.traces
    }
}

/// Ground truth kept alongside a simulated ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTruth {
    pub herald_classes: Vec<HeraldClass>,
    pub signal_quadratures: Vec<f64>,
}

impl SimulationTruth {
    pub fn count(&self, class: HeraldClass) -> usize {
        self.herald_classes.iter().filter(|c| **c == class).count()
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub frames: FrameSet,
    pub truth: SimulationTruth,
}

/// Per-frame random stream `(seed, tag)`.
pub fn frame_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// Builds frames for one configuration and signal mode.
///
/// Each trace is `x_h·h + (w − (h·w)·h) + e` followed by the homodyne
/// filters: `w` is white vacuum noise of variance 1/2 per sample, so every
/// mode orthogonal to `h` holds vacuum; `e` is white electronic noise of
/// variance `ε/2`. A noise pre-roll lets the low-pass stage reach steady
/// state before the frame starts.
#[derive(Debug, Clone)]
pub struct FrameSynthesizer {
    mode: TemporalMode,
    filters: Vec<FilterSpec>,
    electronic_sigma: f64,
    preroll: usize,
}

impl FrameSynthesizer {
    pub fn new(config: &ExperimentConfig, mode: &TemporalMode) -> Result<Self> {
        mode.check_grid(config.grid()?)?;
        let filters = config.homodyne_filters()?;
        // Drawn even when the filters are off, so toggling them leaves the
        // optical noise realization of every frame unchanged.
        let tau = 1.0 / (2.0 * std::f64::consts::PI * config.lpf_cutoff);
        let preroll = ((20.0 * tau / config.dt).ceil() as usize).max(16);
        Ok(Self {
            mode: mode.clone(),
            filters,
            electronic_sigma: (0.5 * config.electronic_noise_rel).sqrt(),
            preroll,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.mode.len()
    }

    /// Writes one trace carrying signal quadrature `x_h` into `out`.
    pub fn synthesize_into<R: Rng + ?Sized>(&self, x_h: f64, rng: &mut R, out: &mut [f64]) -> Result<()> {
        let n = self.mode.len();
        debug_assert_eq!(out.len(), n);
        let h = &self.mode.samples;
        let vac_sigma = std::f64::consts::FRAC_1_SQRT_2;
        let mut pre = Vec::with_capacity(self.preroll + n);
        for _ in 0..self.preroll {
            let w: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            pre.push(vac_sigma * w + self.electronic_sigma * e);
        }
        let start = pre.len();
        for _ in 0..n {
            let w: f64 = rng.sample(StandardNormal);
            pre.push(vac_sigma * w);
        }
        let proj: f64 = pre[start..].iter().zip(h).map(|(w, hk)| w * hk).sum();
        for (v, hk) in pre[start..].iter_mut().zip(h) {
            let e: f64 = rng.sample(StandardNormal);
            *v += (x_h - proj) * hk + self.electronic_sigma * e;
        }
        apply_filter_chain(&self.filters, self.mode.dt, &mut pre)?;
        out.copy_from_slice(&pre[start..]);
        Ok(())
    }

    fn synthesize_with<R: Rng + ?Sized>(&self, sampler: &QuadratureSampler, rng: &mut R, out: &mut [f64]) -> Result<f64> {
        let x_h = sampler.sample(rng);
        self.synthesize_into(x_h, rng, out)?;
        Ok(x_h)
    }
}

/// One frame for a fixed signal state; the class tag is recorded as given.
pub fn synthesize_frame<R: Rng + ?Sized>(
    mode: &TemporalMode,
    state: &PhotonDistribution,
    herald_class: HeraldClass,
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<Frame> {
    let synth = FrameSynthesizer::new(config, mode)?;
    let mut trace = vec![0.0; synth.frame_len()];
    let x_h = synth.synthesize_with(&QuadratureSampler::new(state), rng, &mut trace)?;
    Ok(Frame {
        trace,
        herald_class,
        signal_quadrature: x_h,
        rng_tag: 0,
    })
}

/// `config.n_frames` independent heralded frames in `mode`.
///
/// Frame `i` draws its herald class, signal quadrature and noise from the
/// stream `(config.seed, i)`.
pub fn run_simulation(config: &ExperimentConfig, mode: &TemporalMode) -> Result<Simulation> {
    let synth = FrameSynthesizer::new(config, mode)?;
    let heralded = QuadratureSampler::new(&heralded_state(config, HeraldClass::True)?);
    let vacuum = QuadratureSampler::new(&PhotonDistribution::vacuum(config.n_max)?);
    let n = synth.frame_len();
    let mut traces = vec![0.0; n * config.n_frames];
    let outcomes = traces
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, out)| {
            let mut rng = frame_rng(config.seed, i as u64);
            let class = herald_class_sampler(config, &mut rng);
            let sampler = if class == HeraldClass::True { &heralded } else { &vacuum };
            let x_h = synth.synthesize_with(sampler, &mut rng, out)?;
            Ok((class, x_h))
        })
        .collect::<Result<Vec<_>>>()?;
    let (herald_classes, signal_quadratures) = outcomes.into_iter().unzip();
    Ok(Simulation {
        frames: FrameSet::new(config.grid()?, traces)?,
        truth: SimulationTruth {
            herald_classes,
            signal_quadratures,
        },
    })
}

/// Signal-blocked frames (vacuum in every mode, same electronics) used to
/// calibrate the shot-noise level. Streams never overlap with
/// [`run_simulation`]'s.
pub fn simulate_vacuum_reference(config: &ExperimentConfig, mode: &TemporalMode, count: usize) -> Result<FrameSet> {
    let synth = FrameSynthesizer::new(config, mode)?;
    let vacuum = QuadratureSampler::new(&PhotonDistribution::vacuum(1)?);
    let n = synth.frame_len();
    let mut traces = vec![0.0; n * count];
    traces
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, out)| {
            let mut rng = frame_rng(config.seed, VACUUM_STREAM_BASE + i as u64);
            synth.synthesize_with(&vacuum, &mut rng, out).map(|_| ())
        })?;
    FrameSet::new(config.grid()?, traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn herald_probabilities_from_counts() {
        let cfg = ExperimentConfig::reference_defaults();
        let [t, d, s] = herald_probabilities(&cfg);
        assert!((t - 0.97).abs() < 1e-15);
        assert!((d - 0.01).abs() < 1e-15);
        assert!((s - 0.02).abs() < 1e-15);
    }

    #[test]
    fn no_false_counts_means_always_true() {
        let cfg = ExperimentConfig {
            dark_cps: 0.0,
            stray_cps: 0.0,
            ..ExperimentConfig::reference_defaults()
        };
        let mut rng = frame_rng(3, 0);
        assert!((0..10_000).all(|_| herald_class_sampler(&cfg, &mut rng) == HeraldClass::True));
    }

    #[test]
    fn heralded_state_examples() {
        let cfg = ExperimentConfig {
            two_photon_weight: 0.0,
            three_photon_weight: 0.0,
            optical_loss: 0.13,
            ..ExperimentConfig::reference_defaults()
        };
        let s = heralded_state(&cfg, HeraldClass::True).unwrap();
        assert!((s.get(0) - 0.13).abs() < 1e-15 && (s.get(1) - 0.87).abs() < 1e-15);
        let d = heralded_state(&cfg, HeraldClass::Dark).unwrap();
        assert_eq!(d.get(0), 1.0);
        assert_eq!(heralded_state(&cfg, HeraldClass::Stray).unwrap(), d);
    }

    #[test]
    fn electronic_equivalent() {
        assert!((electronic_loss_equivalent(0.01) - 0.01 / 1.01).abs() < 1e-16);
        assert_eq!(electronic_loss_equivalent(0.0), 0.0);
    }

    #[test]
    fn frame_set_shape_checks() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(FrameSet::new(grid, vec![0.0; 7]).is_err());
        let fs = FrameSet::new(grid, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!(fs.frame(1), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(FrameSet::empty(grid).len(), 0);
    }

    #[test]
    fn synthesizer_rejects_foreign_grid() {
        let cfg = ExperimentConfig::reference_defaults();
        let mode = TemporalMode::new(vec![1.0; 16], cfg.dt, 8).unwrap();
        assert!(matches!(FrameSynthesizer::new(&cfg, &mode), Err(Error::GridMismatch(_))));
    }
}
