//! Small statistical helpers: sample moments and the one-sample
//! Kolmogorov–Smirnov test.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample skewness `m₃ / m₂^{3/2}` (population moments).
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let (m2, m3) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = x - m;
        (a + d * d, b + d * d * d)
    });
    (m3 / n) / (m2 / n).powf(1.5)
}

/// Standard error of the sample skewness for a sample of size `n` drawn
/// from a symmetric distribution.
pub fn skewness_se(n: usize) -> f64 {
    let n = n as f64;
    (6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0))).sqrt()
}

/// Sample standard deviation of each column of `rows`.
pub fn column_std(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let b = rows.len() as f64;
    (0..first.len())
        .map(|j| {
            if rows.len() < 2 {
                return 0.0;
            }
            // Shifted by the first row: identical columns give exactly zero.
            let shift = rows[0][j];
            let d: Vec<f64> = rows.iter().map(|r| r[j] - shift).collect();
            let m = d.iter().sum::<f64>() / b;
            (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0)).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `samples` against a continuous CDF.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsOutcome> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("KS test needs at least one sample".into()));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteData(i));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsOutcome {
        statistic,
        p_value: ks_p_value(statistic, sorted.len()),
    })
}

/// Asymptotic p-value with Stephens' small-sample correction,
/// `Q_KS((√n + 0.12 + 0.11/√n)·D)`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_points() {
        // Critical values of the limiting distribution.
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_against_uniform() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let out = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((out.statistic - 0.0005).abs() < 1e-12);
        assert!(out.p_value > 0.999);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.8).collect();
        assert!(ks_test(&shifted, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 1e-6);
    }

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert!(skewness(&xs).abs() < 1e-15);
        assert!(skewness(&[0.0, 0.0, 0.0, 1.0]) > 1.0);
        let sd = column_std(&[vec![1.0, 0.1 + 0.2], vec![3.0, 0.1 + 0.2], vec![2.0, 0.1 + 0.2]]);
        assert!((sd[0] - 1.0).abs() < 1e-15 && sd[1] == 0.0);
    }
}
