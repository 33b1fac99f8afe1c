use rand::Rng;
use rayon::prelude::*;

use super::tomography::{em_fit, BootstrapSe, DesignMatrix, EmOptions, TomographyResult};
use crate::error::{Error, Result};
use crate::sim::frame_rng;
use crate::stats::column_std;

pub const MIN_REPLICATES: usize = 50;

/// How replicate data sets are drawn from the original samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    /// Standard non-parametric bootstrap: K draws with replacement.
    WithReplacement,
    /// Every replicate is the original data set (a degenerate bootstrap
    /// whose spread is zero; useful as a control).
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    pub resample: Resample,
    pub em: EmOptions,
}

/// Replicate estimates, one per resampled data set.
#[derive(Debug, Clone)]
pub struct BootstrapRun {
    pub replicates: Vec<TomographyResult>,
    pub se: BootstrapSe,
}

/// Bootstrap standard errors of the populations and of the origin Wigner
/// value.
///
/// Replicate `b` draws its resample from stream `b` of `seed`, so the result
/// does not depend on scheduling. Every replicate starts from `full_fit`
/// (the estimate on the original data) rather than from the uniform
/// distribution: the likelihood is concave in `p`, so the fixed point is the
/// same, and the warm start cuts the iteration count severalfold.
pub fn bootstrap(design: &DesignMatrix, full_fit: &TomographyResult, options: &BootstrapOptions) -> Result<BootstrapRun> {
    if options.replicates < MIN_REPLICATES {
        return Err(Error::Domain {
            name: "bootstrap replicates",
            value: options.replicates as f64,
            domain: ">= 50",
        });
    }
    let k = design.samples();
    let em = EmOptions {
        record_trace: false,
        ..options.em.clone()
    };
    let start = full_fit.photon_dist.resized(design.n_max())?;
    let replicates = (0..options.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = frame_rng(options.seed, b as u64);
            let counts = match options.resample {
                Resample::WithReplacement => {
                    let mut counts = vec![0u32; k];
                    for _ in 0..k {
                        counts[rng.random_range(0..k)] += 1;
                    }
                    counts
                }
                Resample::Identity => vec![1u32; k],
            };
            em_fit(&design.reweighted(&counts), Some(start.probs()), &em)
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<Vec<f64>> = replicates
        .iter()
        .map(|r| {
            let mut row = r.photon_dist.probs().to_vec();
            row.push(r.wigner_origin);
            row
        })
        .collect();
    let mut sd = column_std(&rows);
    let wigner_origin = sd.pop().unwrap_or(0.0);
    Ok(BootstrapRun {
        se: BootstrapSe {
            photon_dist: sd,
            wigner_origin,
            replicates: options.replicates,
        },
        replicates,
    })
}

/// Tomography plus bootstrap errors on one sample vector.
pub fn tomography_with_errors(x: &[f64], options: &BootstrapOptions) -> Result<TomographyResult> {
    let design = DesignMatrix::new(x, options.em.n_max)?;
    let mut fit = em_fit(&design, None, &options.em)?;
    let run = bootstrap(&design, &fit, options)?;
    fit.bootstrap_se = Some(run.se);
    Ok(fit)
}
