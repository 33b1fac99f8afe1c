//! Optical loss bookkeeping.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossEntry {
    pub label: String,
    pub loss: f64,
}

/// Named losses composed as cascaded beam splitters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBudget {
    pub entries: Vec<LossEntry>,
}

impl LossBudget {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let entries = entries
            .into_iter()
            .map(|(label, loss)| LossEntry {
                label: label.into(),
                loss,
            })
            .collect::<Vec<_>>();
        for e in &entries {
            check_loss(e.loss)?;
        }
        Ok(Self { entries })
    }

    /// Reference budget of the telecom heralded-photon source: false
    /// heralds as loss equivalents, then optical and detection losses.
    pub fn reference() -> Self {
        Self::new([
            ("dark count (loss equivalent)", 0.01),
            ("stray count (loss equivalent)", 0.02),
            ("optical loss of AOPO", 0.02),
            ("propagation loss", 0.03),
            ("HD mode mismatch", 0.02),
            ("photodiode inefficiency", 0.03),
            ("circuit noise", 0.01),
        ])
        .expect("reference losses are valid")
    }

    /// `1 − Π (1 − L_i)`.
    pub fn total(&self) -> Result<f64> {
        compose_losses(&self.losses())
    }

    /// Plain sum of the entries, the small-loss approximation.
    pub fn naive_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.loss).sum()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.loss).collect()
    }

    /// Two-column text table with both totals.
    pub fn render(&self) -> Result<String> {
        let width = self.entries.iter().map(|e| e.label.len()).max().unwrap_or(0).max(26);
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{:<width$}  {:>5.1}%\n", e.label, 100.0 * e.loss));
        }
        out.push_str(&format!("{:<width$}  {:>5.1}%\n", "total (multiplicative)", 100.0 * self.total()?));
        out.push_str(&format!("{:<width$}  {:>5.1}%\n", "total (naive sum)", 100.0 * self.naive_sum()));
        Ok(out)
    }
}

fn check_loss(loss: f64) -> Result<()> {
    if !(0.0..1.0).contains(&loss) {
        return Err(Error::Domain {
            name: "loss",
            value: loss,
            domain: "[0, 1)",
        });
    }
    Ok(())
}

/// Total loss of cascaded channels, `1 − Π (1 − L_i)`.
pub fn compose_losses(losses: &[f64]) -> Result<f64> {
    let mut transmission = 1.0;
    for &l in losses {
        check_loss(l)?;
        transmission *= 1.0 - l;
    }
    Ok(1.0 - transmission)
}

/// Escape efficiency `T / (T + ℓ)` of a cavity with output-coupler
/// transmittance `T` and residual round-trip loss `ℓ`.
pub fn opo_escape_efficiency(t_coupler: f64, round_trip_loss: f64) -> Result<f64> {
    if t_coupler == 0.0 && round_trip_loss == 0.0 {
        return Err(Error::UndefinedEfficiency);
    }
    if !(t_coupler > 0.0 && t_coupler < 1.0) {
        return Err(Error::Domain {
            name: "t_coupler",
            value: t_coupler,
            domain: "(0, 1)",
        });
    }
    if !(0.0..1.0).contains(&round_trip_loss) {
        return Err(Error::Domain {
            name: "round_trip_loss",
            value: round_trip_loss,
            domain: "[0, 1)",
        });
    }
    Ok(t_coupler / (t_coupler + round_trip_loss))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_examples() {
        assert!((compose_losses(&[0.3]).unwrap() - 0.3).abs() < 1e-15);
        assert!((compose_losses(&[0.5, 0.5]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(compose_losses(&[]).unwrap(), 0.0);
        assert!(compose_losses(&[0.1, 1.0]).is_err());
    }

    #[test]
    fn reference_budget() {
        let b = LossBudget::reference();
        let total = b.total().unwrap();
        assert!((total - 0.132_055).abs() < 1e-6, "{total}");
        assert!((b.naive_sum() - 0.14).abs() < 1e-12);
        let text = b.render().unwrap();
        assert!(text.contains("13.2%") && text.contains("14.0%"));
    }

    #[test]
    fn escape_efficiency() {
        let eta = opo_escape_efficiency(0.142, 0.0022).unwrap();
        assert!((eta - 0.142 / 0.1442).abs() < 1e-15);
        assert!((1.0 - eta) <= 0.02);
        assert_eq!(opo_escape_efficiency(0.3, 0.0).unwrap(), 1.0);
        assert!((opo_escape_efficiency(0.1, 0.1).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(opo_escape_efficiency(0.0, 0.0), Err(Error::UndefinedEfficiency)));
        assert!(opo_escape_efficiency(1.2, 0.0).is_err());
    }
}
