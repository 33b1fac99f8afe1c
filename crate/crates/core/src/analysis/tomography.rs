use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{fill_wavefunctions, parity, PhotonDistribution, FOCK_ORDER_CAP};

pub const MIN_SAMPLES: usize = 100;

/// Populations decaying below this are set to exactly zero. They cannot
/// move any reported digit, and letting them sink into the subnormal range
/// slows every later iteration by two orders of magnitude.
const NEGLIGIBLE_POPULATION: f64 = 1e-100;

/// Stopping rule and starting point for the EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub n_max: usize,
    pub max_iter: usize,
    /// Stop once `max_n |Δp_n| < tol`.
    pub tol: f64,
    /// Keep the log-likelihood of every iterate.
    pub record_trace: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            n_max: crate::fock::DEFAULT_N_MAX,
            max_iter: 5000,
            tol: 1e-9,
            record_trace: true,
        }
    }
}

/// Standard errors attached to a tomography result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSe {
    pub photon_dist: Vec<f64>,
    pub wigner_origin: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyResult {
    pub photon_dist: PhotonDistribution,
    /// `Σ p_n (−1)^n / π`, recomputed from `photon_dist`.
    pub wigner_origin: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood of the starting point and of every iterate, when
    /// recorded.
    #[serde(skip)]
    pub log_likelihood_trace: Vec<f64>,
    pub bootstrap_se: Option<BootstrapSe>,
}

/// `ψ_n(x_k)²` for every order and sample, order-major, with optional
/// per-sample weights (integer multiplicities for bootstrap replicates).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    orders: usize,
    samples: usize,
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(x: &[f64], n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Domain {
                name: "n_max",
                value: n_max as f64,
                domain: "n_max >= 1",
            });
        }
        if n_max > FOCK_ORDER_CAP {
            return Err(Error::UnsupportedOrder {
                order: n_max,
                cap: FOCK_ORDER_CAP,
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData(i));
        }
        if x.len() < MIN_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "tomography needs at least {MIN_SAMPLES} quadrature samples, got {}",
                x.len()
            )));
        }
        let orders = n_max + 1;
        let mut values = vec![0.0; orders * x.len()];
        let mut psi = [0.0; FOCK_ORDER_CAP + 1];
        for (k, &xk) in x.iter().enumerate() {
            fill_wavefunctions(xk, &mut psi[..orders]);
            for n in 0..orders {
                values[n * x.len() + k] = psi[n] * psi[n];
            }
        }
        Ok(Self {
            orders,
            samples: x.len(),
            values,
            weights: None,
        })
    }

    pub fn n_max(&self) -> usize {
        self.orders - 1
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.samples..(n + 1) * self.samples]
    }

    /// Sub-design keeping samples with a non-zero count, weighted by it.
    pub fn reweighted(&self, counts: &[u32]) -> Self {
        assert_eq!(counts.len(), self.samples);
        let keep: Vec<usize> = (0..self.samples).filter(|&k| counts[k] > 0).collect();
        let mut values = Vec::with_capacity(self.orders * keep.len());
        for n in 0..self.orders {
            let row = self.row(n);
            values.extend(keep.iter().map(|&k| row[k]));
        }
        Self {
            orders: self.orders,
            samples: keep.len(),
            values,
            weights: Some(keep.iter().map(|&k| f64::from(counts[k])).collect()),
        }
    }

    fn total_weight(&self) -> f64 {
        match &self.weights {
            Some(w) => w.iter().sum(),
            None => self.samples as f64,
        }
    }

    /// Marginal density `Σ_n p_n ψ_n(x_k)²` at every sample.
    fn densities(&self, p: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (n, &pn) in p.iter().enumerate() {
            if pn == 0.0 {
                continue;
            }
            for (o, d) in out.iter_mut().zip(self.row(n)) {
                *o += pn * d;
            }
        }
    }

    /// `Σ_k w_k ln s_k`.
    fn log_likelihood(&self, densities: &[f64]) -> f64 {
        let mut ll = LogLikelihood::default();
        ll.add(densities, self.weights.as_deref());
        ll.value()
    }

    /// One pass over the design at populations `p`: sets
    /// `acc_n = Σ_k w_k ψ_n(x_k)² / s_k` for every `p_n > 0` and returns
    /// `Σ_k w_k ln s_k` when `with_ll`. Works in cache-sized blocks so each
    /// design entry is read from memory once per iteration.
    fn sweep(&self, p: &[f64], acc: &mut [f64], with_ll: bool) -> f64 {
        const BLOCK: usize = 2048;
        acc.fill(0.0);
        let mut ll = LogLikelihood::default();
        let mut s = [0.0; BLOCK];
        let mut ratio = [0.0; BLOCK];
        let mut start = 0;
        while start < self.samples {
            let end = (start + BLOCK).min(self.samples);
            let (s, ratio) = (&mut s[..end - start], &mut ratio[..end - start]);
            s.fill(0.0);
            for (n, &pn) in p.iter().enumerate() {
                if pn == 0.0 {
                    continue;
                }
                for (o, d) in s.iter_mut().zip(&self.row(n)[start..end]) {
                    *o += pn * d;
                }
            }
            let weights = self.weights.as_deref().map(|w| &w[start..end]);
            if with_ll {
                ll.add(s, weights);
            }
            match weights {
                Some(w) => {
                    for ((r, sk), wk) in ratio.iter_mut().zip(s.iter()).zip(w) {
                        *r = wk / sk;
                    }
                }
                None => {
                    for (r, sk) in ratio.iter_mut().zip(s.iter()) {
                        *r = 1.0 / sk;
                    }
                }
            }
            for (n, &pn) in p.iter().enumerate() {
                if pn != 0.0 {
                    acc[n] += dot(&self.row(n)[start..end], ratio);
                }
            }
            start = end;
        }
        ll.value()
    }
}

/// Accumulates `Σ w ln s`. Unweighted sums use running products with
/// occasional rescaling: one `ln` per few dozen samples instead of one
/// per sample.
struct LogLikelihood {
    total: f64,
    product: f64,
}

impl Default for LogLikelihood {
    fn default() -> Self {
        Self {
            total: 0.0,
            product: 1.0,
        }
    }
}

impl LogLikelihood {
    fn add(&mut self, densities: &[f64], weights: Option<&[f64]>) {
        match weights {
            Some(w) => self.total += densities.iter().zip(w).map(|(s, w)| w * s.ln()).sum::<f64>(),
            None => {
                for &s in densities {
                    self.product *= s;
                    if !(1e-200..=1e200).contains(&self.product) {
                        self.total += self.product.ln();
                        self.product = 1.0;
                    }
                }
            }
        }
    }

    fn value(&self) -> f64 {
        self.total + self.product.ln()
    }
}

/// Diagonal maximum-likelihood tomography of phase-averaged quadrature
/// samples with the default stopping rule and uniform start.
pub fn mle_tomography(x: &[f64], n_max: usize, max_iter: usize, tol: f64) -> Result<TomographyResult> {
    let design = DesignMatrix::new(x, n_max)?;
    let options = EmOptions {
        n_max,
        max_iter,
        tol,
        record_trace: true,
    };
    em_fit(&design, None, &options)
}

/// Expectation-maximization over the probability simplex,
/// `p_n ← p_n · (1/K) Σ_k w_k ψ_n(x_k)² / Σ_m p_m ψ_m(x_k)²`,
/// from `start` (uniform when `None`).
pub fn em_fit(design: &DesignMatrix, start: Option<&[f64]>, options: &EmOptions) -> Result<TomographyResult> {
    let orders = design.orders;
    let mut p = match start {
        Some(s) => {
            if s.len() != orders {
                return Err(Error::InvalidDistribution(format!(
                    "start vector has {} entries, expected {orders}",
                    s.len()
                )));
            }
            s.to_vec()
        }
        None => vec![1.0 / orders as f64; orders],
    };
    let total_weight = design.total_weight();
    let mut acc = vec![0.0; orders];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iter {
        let ll = design.sweep(&p, &mut acc, options.record_trace);
        if options.record_trace {
            trace.push(ll);
        }
        let mut max_step: f64 = 0.0;
        for (pn, a) in p.iter_mut().zip(&acc) {
            let mut next = *pn * a / total_weight;
            if next < NEGLIGIBLE_POPULATION {
                next = 0.0;
            }
            max_step = max_step.max((next - *pn).abs());
            *pn = next;
        }
        // Renormalize to absorb rounding; EM preserves the sum exactly in
        // exact arithmetic.
        let sum: f64 = p.iter().sum();
        for pn in &mut p {
            *pn /= sum;
        }
        iterations += 1;
        if !max_step.is_finite() {
            return Err(Error::Numerical("EM iteration produced non-finite populations".into()));
        }
        if max_step < options.tol {
            converged = true;
            break;
        }
    }
    let mut s = vec![0.0; design.samples];
    design.densities(&p, &mut s);
    let log_likelihood = design.log_likelihood(&s);
    if options.record_trace {
        trace.push(log_likelihood);
    }
    if !converged {
        log::warn!(
            "EM stopped after {iterations} iterations without reaching max |Δp| < {:e}",
            options.tol
        );
    }
    let photon_dist = PhotonDistribution::new(p)?;
    Ok(TomographyResult {
        wigner_origin: parity(photon_dist.probs()) / std::f64::consts::PI,
        photon_dist,
        log_likelihood,
        iterations,
        converged,
        log_likelihood_trace: trace,
        bootstrap_se: None,
    })
}

/// Dot product with independent partial sums, so the reduction pipelines
/// and vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0; LANES];
    let (a_main, a_tail) = a.split_at(a.len() - a.len() % LANES);
    let (b_main, b_tail) = b.split_at(a_main.len());
    for (x, y) in a_main.chunks_exact(LANES).zip(b_main.chunks_exact(LANES)) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = a_tail.iter().zip(b_tail).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_validation() {
        let x = vec![0.1; 200];
        assert!(matches!(mle_tomography(&x[..50], 10, 10, 1e-9), Err(Error::InsufficientData(_))));
        assert!(matches!(mle_tomography(&x, 0, 10, 1e-9), Err(Error::Domain { .. })));
        assert!(matches!(mle_tomography(&x, 61, 10, 1e-9), Err(Error::UnsupportedOrder { .. })));
        let mut bad = x.clone();
        bad[17] = f64::NAN;
        assert!(matches!(mle_tomography(&bad, 10, 10, 1e-9), Err(Error::NonFiniteData(17))));
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.618).sin() * 1.5).collect();
        let r = mle_tomography(&x, 6, 3, 1e-15).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert_eq!(r.log_likelihood_trace.len(), 4);
    }

    #[test]
    fn product_log_likelihood_matches_direct_sum() {
        let x: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.7548).sin() * 6.0).collect();
        let d = DesignMatrix::new(&x, 4).unwrap();
        let mut s = vec![0.0; x.len()];
        d.densities(&[0.2, 0.2, 0.2, 0.2, 0.2], &mut s);
        let direct: f64 = s.iter().map(|v| v.ln()).sum();
        assert!((d.log_likelihood(&s) - direct).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn unit_counts_reproduce_unweighted_fit() {
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.31).cos() * 1.2).collect();
        let d = DesignMatrix::new(&x, 5).unwrap();
        let opts = EmOptions {
            n_max: 5,
            max_iter: 200,
            ..EmOptions::default()
        };
        let a = em_fit(&d, None, &opts).unwrap();
        let b = em_fit(&d.reweighted(&vec![1; 400]), None, &opts).unwrap();
        for (p, q) in a.photon_dist.probs().iter().zip(b.photon_dist.probs()) {
            assert!((p - q).abs() < 1e-13);
        }
        assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-8);
    }
}
