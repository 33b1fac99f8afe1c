//! Heralded single-photon generation at telecom wavelength, simulated end to
//! end: OPO pair correlations and idler filtering, Monte-Carlo homodyne
//! frames, temporal-mode PCA, phase-insensitive maximum-likelihood
//! tomography with bootstrap errors, and loss-budget bookkeeping.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod budget;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod frames_io;
pub mod report;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{ConfigIssue, Error, Result};
pub use fock::{
    apply_loss, fock_marginal, fock_wavefunction, fock_wavefunctions, sample_quadrature, wigner_of,
    PhaseSpaceGrid, PhotonDistribution, QuadratureSampler, WignerGrid,
};
pub use spectral::{
    filter_impulse_response, heralded_mode, mode_match, opo_correlation, CorrelationFunction,
    FilterKind, FilterSpec, ImpulseResponse, TemporalMode, TimeGrid,
};
pub use sim::{
    detected_state, ensemble_state, herald_class_sampler, herald_probabilities, heralded_state, optical_mode,
    run_simulation, simulate_vacuum_reference, synthesize_frame, theory_mode, Frame, FrameSet, FrameSynthesizer,
    HeraldClass, Simulation, SimulationTruth,
};
