//! Fock-space quantities for phase-insensitive single-mode states.
//!
//! Conventions: `[x, p] = i` with ħ = 1, so the vacuum quadrature variance is
//! 1/2 and `a = (x + i p)/√2`. Every state handled here is diagonal in the
//! Fock basis and is therefore fully described by a [`PhotonDistribution`].

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest Fock order supported by the recurrences below.
pub const FOCK_ORDER_CAP: usize = 60;

/// Default truncation of the photon-number basis.
pub const DEFAULT_N_MAX: usize = 10;

const NORM_TOL: f64 = 1e-9;

fn check_order(order: usize) -> Result<()> {
    if order > FOCK_ORDER_CAP {
        return Err(Error::UnsupportedOrder {
            order,
            cap: FOCK_ORDER_CAP,
        });
    }
    Ok(())
}

/// Fills `out[n] = ψ_n(x)` for `n = 0..out.len()` using the normalized
/// upward recurrence
/// `ψ_{n+1} = √(2/(n+1)) x ψ_n − √(n/(n+1)) ψ_{n−1}`.
///
/// The caller guarantees `out.len() <= FOCK_ORDER_CAP + 1`.
pub(crate) fn fill_wavefunctions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Harmonic-oscillator eigenfunction
/// `ψ_n(x) = π^(−1/4) (2^n n!)^(−1/2) H_n(x) e^(−x²/2)`.
pub fn fock_wavefunction(n: usize, x: f64) -> Result<f64> {
    check_order(n)?;
    let mut buf = [0.0; FOCK_ORDER_CAP + 1];
    fill_wavefunctions(x, &mut buf[..=n]);
    Ok(buf[n])
}

/// All wavefunctions `ψ_0(x) ..= ψ_{n_max}(x)`.
pub fn fock_wavefunctions(n_max: usize, x: f64) -> Result<Vec<f64>> {
    check_order(n_max)?;
    let mut out = vec![0.0; n_max + 1];
    fill_wavefunctions(x, &mut out);
    Ok(out)
}

/// Laguerre polynomial `L_n(y)` by the three-term recurrence.
pub fn laguerre(n: usize, y: f64) -> Result<f64> {
    check_order(n)?;
    let mut buf = [0.0; FOCK_ORDER_CAP + 1];
    fill_laguerre(y, &mut buf[..=n]);
    Ok(buf[n])
}

fn fill_laguerre(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 1.0 - y;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0 - y) * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

/// Photon-number populations `p_0 ..= p_{n_max}` of a Fock-diagonal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhotonDistribution {
    probs: Vec<f64>,
}

impl PhotonDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no entries".into()));
        }
        check_order(probs.len() - 1)?;
        for (n, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0 + 1e-12).contains(&p) {
                return Err(Error::InvalidDistribution(format!("p_{n} = {p} not in [0, 1]")));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    /// Builds a distribution from unnormalized non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite, non-negative and not all zero".into(),
            ));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn vacuum(n_max: usize) -> Result<Self> {
        Self::fock(0, n_max)
    }

    /// Number state `|n⟩` in a basis truncated at `n_max`.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidDistribution(format!("n = {n} above n_max = {n_max}")));
        }
        let mut probs = vec![0.0; n_max + 1];
        probs[n] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Highest photon number carrying non-zero weight.
    pub fn support_max(&self) -> usize {
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Wigner value at the phase-space origin, `Σ p_n (−1)^n / π`.
    pub fn wigner_origin(&self) -> f64 {
        parity(&self.probs) / PI
    }

    /// Same distribution zero-padded or truncated (and renormalized) to `n_max`.
    pub fn resized(&self, n_max: usize) -> Result<Self> {
        let mut probs = self.probs.clone();
        probs.resize(n_max + 1, 0.0);
        Self::from_weights(&probs)
    }

    /// Convex combination `Σ w_i d_i` of distributions, padded to the longest.
    pub fn mixture(parts: &[(f64, &PhotonDistribution)]) -> Result<Self> {
        let len = parts.iter().map(|(_, d)| d.probs.len()).max().unwrap_or(1);
        let mut probs = vec![0.0; len];
        for (w, d) in parts {
            for (acc, p) in probs.iter_mut().zip(&d.probs) {
                *acc += w * p;
            }
        }
        Self::new(probs)
    }
}

impl TryFrom<Vec<f64>> for PhotonDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<PhotonDistribution> for Vec<f64> {
    fn from(d: PhotonDistribution) -> Self {
        d.probs
    }
}

pub(crate) fn parity(probs: &[f64]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum()
}

/// Quadrature probability density `Σ p_n ψ_n(x)²`.
pub fn fock_marginal(dist: &PhotonDistribution, x: f64) -> f64 {
    let mut psi = [0.0; FOCK_ORDER_CAP + 1];
    let psi = &mut psi[..dist.probs.len()];
    fill_wavefunctions(x, psi);
    dist.probs.iter().zip(psi.iter()).map(|(p, v)| p * v * v).sum()
}

/// Cumulative distribution of [`fock_marginal`], tabulated once and
/// linearly interpolated.
#[derive(Debug, Clone)]
pub struct MarginalCdf {
    x_min: f64,
    step: f64,
    table: Vec<f64>,
}

impl MarginalCdf {
    const HALF_WIDTH: f64 = 14.0;
    const POINTS: usize = 28_001;

    pub fn new(dist: &PhotonDistribution) -> Self {
        let x_min = -Self::HALF_WIDTH;
        let step = 2.0 * Self::HALF_WIDTH / (Self::POINTS - 1) as f64;
        let density: Vec<f64> = (0..Self::POINTS)
            .map(|i| fock_marginal(dist, x_min + i as f64 * step))
            .collect();
        let mut table = Vec::with_capacity(Self::POINTS);
        let mut acc = 0.0;
        table.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            table.push(acc);
        }
        let total = acc;
        for v in &mut table {
            *v /= total;
        }
        Self { x_min, step, table }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.x_min) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.table.len() {
            return 1.0;
        }
        let frac = pos - i as f64;
        self.table[i] + frac * (self.table[i + 1] - self.table[i])
    }
}

/// Bounds and resolution of a rectangular phase-space lattice. Nodes include
/// both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl PhaseSpaceGrid {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            nx: n,
            np: n,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.p_min, self.p_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.p_max <= self.p_min {
            return Err(Error::InvalidGrid(format!(
                "bounds x ∈ [{}, {}], p ∈ [{}, {}] have non-positive extent",
                self.x_min, self.x_max, self.p_min, self.p_max
            )));
        }
        if self.nx < 2 || self.np < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {} × {}",
                self.nx, self.np
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }
}

/// Wigner function sampled on a [`PhaseSpaceGrid`], stored row-major with
/// `x` as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.np + j]
    }

    pub fn cell_area(&self) -> f64 {
        self.grid.dx() * self.grid.dp()
    }

    /// Riemann sum of the grid values times the cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `x,p,w`, one node per row, row-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,p,w")?;
        for i in 0..self.grid.nx {
            let x = self.grid.x(i);
            for j in 0..self.grid.np {
                writeln!(out, "{:e},{:e},{:e}", x, self.grid.p(j), self.value(i, j))?;
            }
        }
        Ok(())
    }
}

/// Wigner function of a phase-insensitive state at radius² `r2 = x² + p²`.
pub fn wigner_at(dist: &PhotonDistribution, r2: f64) -> f64 {
    let mut lag = [0.0; FOCK_ORDER_CAP + 1];
    let lag = &mut lag[..dist.probs.len()];
    fill_laguerre(2.0 * r2, lag);
    let series: f64 = dist
        .probs
        .iter()
        .zip(lag.iter())
        .enumerate()
        .map(|(n, (p, l))| if n % 2 == 0 { p * l } else { -p * l })
        .sum();
    series * (-r2).exp() / PI
}

/// `W(x, p) = Σ p_n (−1)^n / π · L_n(2(x² + p²)) e^(−(x² + p²))` on a grid.
pub fn wigner_of(dist: &PhotonDistribution, grid: &PhaseSpaceGrid) -> Result<WignerGrid> {
    grid.validate()?;
    let mut values = Vec::with_capacity(grid.nx * grid.np);
    for i in 0..grid.nx {
        let x = grid.x(i);
        for j in 0..grid.np {
            let p = grid.p(j);
            values.push(wigner_at(dist, x * x + p * p));
        }
    }
    Ok(WignerGrid { grid: *grid, values })
}

/// Pure-loss channel with loss fraction `loss` (beamsplitter of
/// transmissivity `1 − loss` with vacuum in the open port):
/// `p'_m = Σ_{n≥m} C(n, m) (1−L)^m L^(n−m) p_n`.
pub fn apply_loss(dist: &PhotonDistribution, loss: f64) -> Result<PhotonDistribution> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(Error::Domain {
            name: "loss",
            value: loss,
            domain: "[0, 1]",
        });
    }
    let eta = 1.0 - loss;
    let len = dist.probs.len();
    let mut out = vec![0.0; len];
    for (n, &pn) in dist.probs.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        let mut binom = 1.0;
        for (m, slot) in out.iter_mut().enumerate().take(n + 1) {
            *slot += binom * eta.powi(m as i32) * loss.powi((n - m) as i32) * pn;
            binom = binom * (n - m) as f64 / (m + 1) as f64;
        }
    }
    // Rounding in the binomial sums can push the total a few ulps off 1.
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    PhotonDistribution::new(out)
}

/// Rejection sampler for the quadrature marginal of a fixed distribution.
///
/// The proposal is a centred Gaussian of variance `k + 1/2`, where `k` is the
/// highest populated photon number; the envelope constant is found by a dense
/// scan of the density ratio with a 5 % safety margin.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    probs: Vec<f64>,
    sigma: f64,
    envelope: f64,
}

impl QuadratureSampler {
    pub fn new(dist: &PhotonDistribution) -> Self {
        let k = dist.support_max();
        let probs = dist.probs[..=k].to_vec();
        let sigma = (k as f64 + 0.5).sqrt();
        let truncated = PhotonDistribution { probs: probs.clone() };
        let reach = 8.0 * sigma + 4.0;
        let steps = 40_000;
        let mut ratio_max: f64 = 0.0;
        for i in 0..=steps {
            let x = -reach + 2.0 * reach * i as f64 / steps as f64;
            let ratio = fock_marginal(&truncated, x) / gaussian_pdf(x, sigma);
            ratio_max = ratio_max.max(ratio);
        }
        Self {
            probs,
            sigma,
            envelope: 1.05 * ratio_max,
        }
    }

    /// Expected fraction of proposals accepted.
    pub fn acceptance_rate(&self) -> f64 {
        1.0 / self.envelope
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut psi = [0.0; FOCK_ORDER_CAP + 1];
        let psi = &mut psi[..self.probs.len()];
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let y = self.sigma * z;
            fill_wavefunctions(y, psi);
            let density: f64 = self.probs.iter().zip(psi.iter()).map(|(p, v)| p * v * v).sum();
            let u: f64 = rng.random();
            if u * self.envelope * gaussian_pdf(y, self.sigma) <= density {
                return y;
            }
        }
    }
}

fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// One quadrature draw from `fock_marginal(dist, ·)`.
///
/// Builds a fresh [`QuadratureSampler`]; reuse one directly when drawing many
/// samples from the same distribution.
pub fn sample_quadrature<R: Rng + ?Sized>(dist: &PhotonDistribution, rng: &mut R) -> f64 {
    QuadratureSampler::new(dist).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist(p: &[f64]) -> PhotonDistribution {
        PhotonDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn wavefunction_reference_values() {
        assert!((fock_wavefunction(0, 0.0).unwrap() - 0.751_125_544_464_942_5).abs() < 1e-15);
        assert_eq!(fock_wavefunction(1, 0.0).unwrap(), 0.0);
        // 40-digit mpmath evaluation of the closed form.
        let oracle = [
            (5, 1.3, -0.399_391_462_813_750_734_573_320_503_893),
            (20, 2.5, -0.326_453_573_371_696_030_333_986_511_887),
            (40, -6.1, 0.309_005_046_444_990_609_389_235_063_551),
            (60, 3.7, -0.149_996_406_544_202_400_874_585_650_331),
        ];
        for (n, x, expect) in oracle {
            let got = fock_wavefunction(n, x).unwrap();
            assert!((got - expect).abs() < 1e-10, "ψ_{n}({x}) = {got}, expected {expect}");
        }
    }

    #[test]
    fn order_cap_is_enforced() {
        assert!(matches!(
            fock_wavefunction(61, 0.3),
            Err(Error::UnsupportedOrder { order: 61, cap: 60 })
        ));
        assert!(fock_wavefunctions(61, 0.0).is_err());
        assert!(PhotonDistribution::new(vec![0.0; 62].into_iter().chain([1.0]).collect()).is_err());
    }

    #[test]
    fn orthonormality_by_quadrature() {
        let n_max = 20;
        let h = 1e-3;
        let mut gram = vec![0.0; (n_max + 1) * (n_max + 1)];
        let mut x = -14.0;
        while x <= 14.0 {
            let psi = fock_wavefunctions(n_max, x).unwrap();
            for m in 0..=n_max {
                for n in 0..=n_max {
                    gram[m * (n_max + 1) + n] += psi[m] * psi[n] * h;
                }
            }
            x += h;
        }
        for m in 0..=n_max {
            for n in 0..=n_max {
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((gram[m * (n_max + 1) + n] - expect).abs() < 1e-8, "({m},{n})");
            }
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(PhotonDistribution::new(vec![]).is_err());
        assert!(PhotonDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(PhotonDistribution::new(vec![1.2, -0.2]).is_err());
        assert!(PhotonDistribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(PhotonDistribution::new(vec![0.3, 0.7 + 5e-10]).is_ok());
        let d = PhotonDistribution::from_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
    }

    #[test]
    fn marginal_examples() {
        let vac = PhotonDistribution::vacuum(10).unwrap();
        assert!((fock_marginal(&vac, 0.0) - 1.0 / PI.sqrt()).abs() < 1e-15);
        let one = PhotonDistribution::fock(1, 10).unwrap();
        assert_eq!(fock_marginal(&one, 0.0), 0.0);
        let lossy = dist(&[0.13, 0.87]);
        assert!((fock_marginal(&lossy, 0.0) - 0.13 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn marginal_normalized_and_cdf_consistent() {
        let d = dist(&[0.2, 0.3, 0.1, 0.15, 0.25]);
        let h = 1e-3;
        let total: f64 = (-12_000..=12_000).map(|i| fock_marginal(&d, i as f64 * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let cdf = MarginalCdf::new(&d);
        assert!((cdf.eval(0.0) - 0.5).abs() < 1e-9);
        assert_eq!(cdf.eval(-20.0), 0.0);
        assert_eq!(cdf.eval(20.0), 1.0);
    }

    #[test]
    fn wigner_examples() {
        let grid = PhaseSpaceGrid::square(3.0, 61);
        let origin = (30, 30);
        let one = wigner_of(&PhotonDistribution::fock(1, 10).unwrap(), &grid).unwrap();
        assert!((one.value(origin.0, origin.1) + 1.0 / PI).abs() < 1e-15);
        let vac = wigner_of(&PhotonDistribution::vacuum(10).unwrap(), &grid).unwrap();
        assert!((vac.value(origin.0, origin.1) - 1.0 / PI).abs() < 1e-15);
        let lossy = wigner_of(&dist(&[0.13, 0.87]), &grid).unwrap();
        assert!((lossy.value(origin.0, origin.1) - (2.0 * 0.13 - 1.0) / PI).abs() < 1e-15);
    }

    #[test]
    fn wigner_grid_validation() {
        let d = dist(&[1.0]);
        let mut g = PhaseSpaceGrid::square(3.0, 11);
        g.x_max = g.x_min;
        assert!(matches!(wigner_of(&d, &g), Err(Error::InvalidGrid(_))));
        let mut g = PhaseSpaceGrid::square(3.0, 11);
        g.np = 0;
        assert!(wigner_of(&d, &g).is_err());
    }

    #[test]
    fn wigner_csv_layout() {
        let w = wigner_of(&dist(&[1.0]), &PhaseSpaceGrid::square(1.0, 3)).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,p,w");
        assert_eq!(lines.len(), 10);
        assert!(lines[2].starts_with("-1e0,0e0,"));
    }

    #[test]
    fn loss_examples() {
        let one = dist(&[0.0, 1.0]);
        assert_eq!(apply_loss(&one, 0.0).unwrap().probs(), &[0.0, 1.0]);
        let l13 = apply_loss(&one, 0.13).unwrap();
        assert!((l13.get(0) - 0.13).abs() < 1e-15 && (l13.get(1) - 0.87).abs() < 1e-15);
        let two = apply_loss(&dist(&[0.0, 0.0, 1.0]), 0.2).unwrap();
        for (got, expect) in two.probs().iter().zip([0.04, 0.32, 0.64]) {
            assert!((got - expect).abs() < 1e-14);
        }
        assert!(matches!(apply_loss(&one, 1.5), Err(Error::Domain { .. })));
        assert!(apply_loss(&one, -0.1).is_err());
        assert_eq!(apply_loss(&one, 1.0).unwrap().probs(), &[1.0, 0.0]);
    }

    #[test]
    fn loss_moves_origin_through_zero_at_half() {
        let one = dist(&[0.0, 1.0]);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let l = i as f64 / 100.0;
            let w = apply_loss(&one, l).unwrap().wigner_origin();
            assert!(w > prev);
            prev = w;
        }
        assert!(apply_loss(&one, 0.5).unwrap().wigner_origin().abs() < 1e-12);
        assert!(apply_loss(&one, 0.5 - 1e-9).unwrap().wigner_origin() < 0.0);
        assert!(apply_loss(&one, 0.5 + 1e-9).unwrap().wigner_origin() > 0.0);
    }

    fn variance_of_samples(d: &PhotonDistribution, count: usize, seed: u64) -> f64 {
        let sampler = QuadratureSampler::new(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let x = sampler.sample(&mut rng);
            s += x;
            s2 += x * x;
        }
        let mean = s / count as f64;
        s2 / count as f64 - mean * mean
    }

    #[test]
    fn sampled_variances() {
        let million = 1_000_000;
        let v0 = variance_of_samples(&PhotonDistribution::vacuum(10).unwrap(), million, 1);
        assert!((v0 - 0.5).abs() < 0.002, "{v0}");
        let v1 = variance_of_samples(&PhotonDistribution::fock(1, 10).unwrap(), million, 2);
        assert!((v1 - 1.5).abs() < 0.005, "{v1}");
        let vm = variance_of_samples(&dist(&[0.13, 0.87]), million, 3);
        assert!((vm - 1.37).abs() < 0.005, "{vm}");
    }

    #[test]
    fn sampler_envelope_is_practical() {
        for n in 0..=10 {
            let s = QuadratureSampler::new(&PhotonDistribution::fock(n, 10).unwrap());
            assert!(s.acceptance_rate() > 0.15, "n = {n}: {}", s.acceptance_rate());
        }
    }
}
