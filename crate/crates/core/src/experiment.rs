//! End-to-end orchestration: theory mode, simulated frames, analysis, and
//! the report files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    pca_modes, project_quadratures, tomography_with_errors, BootstrapOptions, BootstrapSe, EmOptions, PcaResult,
    Resample, ShotNoiseReference, TomographyResult,
};
use crate::budget::{opo_escape_efficiency, LossBudget};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fock::{fock_marginal, wigner_of, PhaseSpaceGrid, PhotonDistribution};
use crate::report::to_json_string;
use crate::sim::{
    detected_state, electronic_loss_equivalent, optical_mode, run_simulation, simulate_vacuum_reference,
    theory_mode, FrameSet, HeraldClass, Simulation,
};
use crate::spectral::{mode_match, TemporalMode};

/// Key added to the configured seed for the bootstrap streams.
const BOOTSTRAP_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;
/// Eigenvalues listed in the report.
const REPORTED_EIGENVALUES: usize = 20;
const HISTOGRAM_HALF_WIDTH: f64 = 6.0;
const HISTOGRAM_BINS: usize = 120;
const WIGNER_HALF_WIDTH: f64 = 5.0;
const WIGNER_POINTS: usize = 101;

/// Output of the simulation stage.
#[derive(Debug, Clone)]
pub struct SimulatedRun {
    /// Expected detector-output mode, homodyne filters included.
    pub theory_mode: TemporalMode,
    pub simulation: Simulation,
    /// Signal-blocked reference frames; `None` when `vacuum_frames = 0`.
    pub vacuum: Option<FrameSet>,
}

pub fn simulate(config: &ExperimentConfig) -> Result<SimulatedRun> {
    config.validate()?;
    let optical = optical_mode(config)?;
    let theory = theory_mode(config)?;
    log::info!("simulating {} frames of {} samples", config.n_frames, config.frame_len);
    let started = std::time::Instant::now();
    let simulation = run_simulation(config, &optical)?;
    let vacuum = match config.vacuum_frames {
        0 => None,
        n => Some(simulate_vacuum_reference(config, &optical, n)?),
    };
    log::info!("simulation took {:.1?}", started.elapsed());
    Ok(SimulatedRun {
        theory_mode: theory,
        simulation,
        vacuum,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub em: EmOptions,
    pub bootstrap_replicates: usize,
    pub bootstrap_seed: u64,
}

impl AnalysisOptions {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            em: EmOptions {
                n_max: config.n_max,
                max_iter: config.em_max_iter,
                tol: config.em_tol,
                record_trace: true,
            },
            bootstrap_replicates: config.bootstrap_replicates,
            bootstrap_seed: config.seed.wrapping_add(BOOTSTRAP_SEED_OFFSET),
        }
    }
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self::from_config(&ExperimentConfig::default())
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub pca: PcaResult,
    /// Projections onto the principal mode, in shot-noise units.
    pub quadratures: Vec<f64>,
    /// Factor applied to the raw projections (1 without a vacuum reference).
    pub shot_noise_scale: f64,
    pub tomography: TomographyResult,
    pub mode_match: Option<f64>,
}

/// Quadratures and tomography in one fixed mode.
#[derive(Debug, Clone)]
pub struct ModeTomography {
    /// Projections onto the mode, in shot-noise units.
    pub quadratures: Vec<f64>,
    /// Factor applied to the raw projections (1 without a vacuum reference).
    pub shot_noise_scale: f64,
    pub tomography: TomographyResult,
}

/// Projects `frames` onto `mode`, calibrates against `vacuum` when given,
/// and runs tomography with bootstrap errors.
pub fn tomography_in_mode(
    frames: &FrameSet,
    vacuum: Option<&FrameSet>,
    mode: &TemporalMode,
    options: &AnalysisOptions,
) -> Result<ModeTomography> {
    let mut quadratures = project_quadratures(frames, mode)?;
    let shot_noise_scale = match vacuum {
        Some(v) => {
            if v.grid != frames.grid {
                return Err(Error::GridMismatch("vacuum reference and signal frames use different grids".into()));
            }
            ShotNoiseReference::from_frames(v)?.scale_for(mode)?
        }
        None => 1.0,
    };
    for x in &mut quadratures {
        *x *= shot_noise_scale;
    }
    let bootstrap = BootstrapOptions {
        replicates: options.bootstrap_replicates,
        seed: options.bootstrap_seed,
        resample: Resample::WithReplacement,
        em: options.em.clone(),
    };
    let started = std::time::Instant::now();
    let tomography = tomography_with_errors(&quadratures, &bootstrap)?;
    log::info!(
        "tomography with {} bootstrap replicates took {:.1?}",
        bootstrap.replicates,
        started.elapsed()
    );
    Ok(ModeTomography {
        quadratures,
        shot_noise_scale,
        tomography,
    })
}

/// PCA, then [`tomography_in_mode`] in the principal mode. The theory mode,
/// when given, only enters the reported mode match.
pub fn analyze(
    frames: &FrameSet,
    vacuum: Option<&FrameSet>,
    theory: Option<&TemporalMode>,
    options: &AnalysisOptions,
) -> Result<Analysis> {
    let started = std::time::Instant::now();
    let pca = pca_modes(frames)?;
    log::info!("PCA on {} frames took {:.1?}", frames.len(), started.elapsed());
    let ModeTomography {
        quadratures,
        shot_noise_scale,
        tomography,
    } = tomography_in_mode(frames, vacuum, &pca.principal_mode, options)?;
    let mode_match = theory.map(|h| mode_match(&pca.principal_mode, h)).transpose()?;
    Ok(Analysis {
        pca,
        quadratures,
        shot_noise_scale,
        tomography,
        mode_match,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    /// The only field that differs between reruns of the same config.
    pub generated_at: String,
    pub software: String,
    pub quadrature_units: String,
    pub eigenvalue_units: String,
}

impl Metadata {
    fn now() -> Self {
        Self {
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            software: concat!("heralded ", env!("CARGO_PKG_VERSION")).into(),
            quadrature_units: "shot-noise units, vacuum variance 1/2".into(),
            eigenvalue_units: "modal quadrature variance, shot-noise units (vacuum 1/2)".into(),
        }
    }
}

/// Closed-form photon statistics of a simulated ensemble as seen by a
/// shot-noise-calibrated detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub photon_dist: Vec<f64>,
    pub wigner_origin: f64,
    pub electronic_loss_equivalent: f64,
}

impl GroundTruth {
    pub fn of(config: &ExperimentConfig) -> Result<Self> {
        let state = detected_state(config)?;
        Ok(Self {
            wigner_origin: state.wigner_origin(),
            photon_dist: state.probs().to_vec(),
            electronic_loss_equivalent: electronic_loss_equivalent(config.electronic_noise_rel),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldCounts {
    pub true_heralds: usize,
    pub dark_heralds: usize,
    pub stray_heralds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSummary {
    pub budget: LossBudget,
    pub total: f64,
    pub naive_sum: f64,
    pub opo_escape_efficiency: f64,
}

impl BudgetSummary {
    /// Reference budget and the AOPO escape efficiency for a 14.2 % output
    /// coupler with 0.22 % round-trip loss.
    pub fn reference() -> Result<Self> {
        let budget = LossBudget::reference();
        Ok(Self {
            total: budget.total()?,
            naive_sum: budget.naive_sum(),
            opo_escape_efficiency: opo_escape_efficiency(0.142, 0.0022)?,
            budget,
        })
    }
}

/// Content of `budget.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub loss_budget: BudgetSummary,
    pub ground_truth: Option<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub metadata: Metadata,
    pub photon_dist: Vec<f64>,
    pub wigner_origin: f64,
    pub se: Option<BootstrapSe>,
    pub eigenvalues: Vec<f64>,
    pub mode_match: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub n_frames: usize,
    pub component_count: usize,
    /// Top eigenvalue minus the median eigenvalue.
    pub eigenvalue_gap: f64,
    pub shot_noise_scale: f64,
    pub ground_truth: Option<GroundTruth>,
    pub herald_counts: Option<HeraldCounts>,
    pub loss_budget: BudgetSummary,
    pub config: Option<ExperimentConfig>,
}

impl Report {
    pub fn new(
        analysis: &Analysis,
        config: Option<&ExperimentConfig>,
        simulation: Option<&Simulation>,
    ) -> Result<Self> {
        let tomo = &analysis.tomography;
        let pca = &analysis.pca;
        let ground_truth = match (config, simulation) {
            (Some(c), Some(_)) => Some(GroundTruth::of(c)?),
            _ => None,
        };
        Ok(Self {
            metadata: Metadata::now(),
            photon_dist: tomo.photon_dist.probs().to_vec(),
            wigner_origin: tomo.wigner_origin,
            se: tomo.bootstrap_se.clone(),
            eigenvalues: pca.eigenvalues.iter().take(REPORTED_EIGENVALUES).copied().collect(),
            mode_match: analysis.mode_match,
            iterations: tomo.iterations,
            converged: tomo.converged,
            log_likelihood: tomo.log_likelihood,
            n_frames: analysis.quadratures.len(),
            component_count: pca.component_count,
            eigenvalue_gap: pca.top() - pca.median_eigenvalue(),
            shot_noise_scale: analysis.shot_noise_scale,
            ground_truth,
            herald_counts: simulation.map(|s| HeraldCounts {
                true_heralds: s.truth.count(HeraldClass::True),
                dark_heralds: s.truth.count(HeraldClass::Dark),
                stray_heralds: s.truth.count(HeraldClass::Stray),
            }),
            loss_budget: BudgetSummary::reference()?,
            config: config.cloned(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(to_json_string(self)?)
    }
}

/// Files written into an output directory, removed again unless the run
/// completes.
pub struct OutputSet {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let created_dir = !dir.exists();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            created_dir,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Creates `name` and hands a buffered writer to `fill`.
    pub fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
        let path = self.path(name);
        self.files.push(path.clone());
        let mut out = BufWriter::new(fs::File::create(&path)?);
        fill(&mut out)?;
        out.flush()?;
        Ok(path)
    }

    /// Registers a file written by other means.
    pub fn track(&mut self, name: &str) -> PathBuf {
        let path = self.path(name);
        self.files.push(path.clone());
        path
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Writes `report.json`, `mode.csv`, `histogram.csv`, `wigner.csv` and
/// `eigenvalues.csv`.
pub fn write_report_files(
    outputs: &mut OutputSet,
    report: &Report,
    analysis: &Analysis,
    theory: Option<&TemporalMode>,
) -> Result<()> {
    let json = report.to_json()?;
    outputs.write("report.json", |w| Ok(w.write_all(json.as_bytes())?))?;

    let estimated = &analysis.pca.principal_mode;
    outputs.write("mode.csv", |w| {
        writeln!(w, "t_seconds,h_theory,h_estimated")?;
        for (k, h) in estimated.samples.iter().enumerate() {
            let th = theory.map(|t| format!("{:e}", t.samples[k])).unwrap_or_default();
            writeln!(w, "{:e},{th},{h:e}", estimated.time(k))?;
        }
        Ok(())
    })?;

    let state = &analysis.tomography.photon_dist;
    outputs.write("histogram.csv", |w| write_histogram(w, &analysis.quadratures, state))?;

    let wigner = wigner_of(state, &PhaseSpaceGrid::square(WIGNER_HALF_WIDTH, WIGNER_POINTS))?;
    outputs.write("wigner.csv", |w| Ok(wigner.write_csv(w)?))?;

    outputs.write("eigenvalues.csv", |w| {
        writeln!(w, "index,variance")?;
        for (i, v) in analysis.pca.eigenvalues.iter().enumerate() {
            writeln!(w, "{i},{v:e}")?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Quadrature histogram on a fixed grid with the marginal density of the
/// reconstructed state at each bin centre.
pub fn write_histogram(out: &mut dyn Write, x: &[f64], state: &PhotonDistribution) -> Result<()> {
    let width = 2.0 * HISTOGRAM_HALF_WIDTH / HISTOGRAM_BINS as f64;
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for &v in x {
        let bin = ((v + HISTOGRAM_HALF_WIDTH) / width).floor();
        if bin >= 0.0 && (bin as usize) < HISTOGRAM_BINS {
            counts[bin as usize] += 1;
        }
    }
    writeln!(out, "bin_center,count,analytic_density")?;
    for (i, c) in counts.iter().enumerate() {
        let centre = -HISTOGRAM_HALF_WIDTH + (i as f64 + 0.5) * width;
        writeln!(out, "{centre:e},{c},{:e}", fock_marginal(state, centre))?;
    }
    Ok(())
}

/// Full pipeline for an in-memory configuration.
pub fn run_full(config: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<Report> {
    let mut outputs = OutputSet::new(out_dir)?;
    let run = simulate(config)?;
    let analysis = analyze(
        &run.simulation.frames,
        run.vacuum.as_ref(),
        Some(&run.theory_mode),
        &AnalysisOptions::from_config(config),
    )?;
    let report = Report::new(&analysis, Some(config), Some(&run.simulation))?;
    write_report_files(&mut outputs, &report, &analysis, Some(&run.theory_mode))?;
    outputs.commit();
    Ok(report)
}

/// Reads the configuration at `config_path` and runs [`run_full`].
pub fn run_experiment(config_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<Report> {
    let config = ExperimentConfig::from_file(config_path)?;
    run_full(&config, out_dir)
}
