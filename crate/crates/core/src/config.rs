//! Experiment configuration and its `key = value` text format.
//!
//! One assignment per line, `#` starts a comment, values are plain numbers
//! in base SI units (Hz, s, counts per second, fractions). Unit suffixes are
//! rejected rather than interpreted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};
use crate::fock::{DEFAULT_N_MAX, FOCK_ORDER_CAP};
use crate::spectral::{FilterSpec, TimeGrid};

/// All physical and numerical parameters of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// OPO resonance HWHM (Hz).
    pub opo_hwhm: f64,
    /// Idler filter-cavity HWHM (Hz).
    pub fc_hwhm: f64,
    /// Fibre Bragg grating HWHM (Hz).
    pub fbg_hwhm: f64,
    /// Homodyne high-pass corner (Hz).
    pub hpf_cutoff: f64,
    /// Homodyne low-pass corner (Hz).
    pub lpf_cutoff: f64,
    /// Sample spacing (s).
    pub dt: f64,
    pub frame_len: usize,
    pub total_cps: f64,
    pub dark_cps: f64,
    pub stray_cps: f64,
    /// Every non-herald optical loss, combined.
    pub optical_loss: f64,
    pub two_photon_weight: f64,
    pub three_photon_weight: f64,
    /// Electronic noise variance relative to the shot-noise variance.
    pub electronic_noise_rel: f64,
    pub n_frames: usize,
    pub seed: u64,

    /// Apply the homodyne HPF/LPF to simulated frames and to the theory mode.
    pub hd_filters: bool,
    /// Signal-blocked frames recorded for shot-noise calibration.
    pub vacuum_frames: usize,
    pub n_max: usize,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub bootstrap_replicates: usize,
}

const REQUIRED_KEYS: [&str; 16] = [
    "opo_hwhm",
    "fc_hwhm",
    "fbg_hwhm",
    "hpf_cutoff",
    "lpf_cutoff",
    "dt",
    "frame_len",
    "total_cps",
    "dark_cps",
    "stray_cps",
    "optical_loss",
    "two_photon_weight",
    "three_photon_weight",
    "electronic_noise_rel",
    "n_frames",
    "seed",
];

const OPTIONAL_KEYS: [&str; 6] = [
    "hd_filters",
    "vacuum_frames",
    "n_max",
    "em_max_iter",
    "em_tol",
    "bootstrap_replicates",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::reference_defaults()
    }
}

impl ExperimentConfig {
    /// Telecom heralding setup: 3.7 MHz AOPO, 8.2 MHz filter cavity, 3.6 GHz
    /// FBG, 10 kHz / 50 MHz homodyne filters, 3000 cps total of which 30 dark
    /// and 60 stray, 20 dB electronic-noise clearance.
    ///
    /// `optical_loss`, `two_photon_weight` and `three_photon_weight` are the
    /// least-squares fit that makes the detected ensemble state (false
    /// heralds and the electronic-noise loss equivalent included) reproduce
    /// photon populations (0.133, 0.851, 0.010, 0.005).
    pub fn reference_defaults() -> Self {
        Self {
            opo_hwhm: 3.7e6,
            fc_hwhm: 8.2e6,
            fbg_hwhm: 3.6e9,
            hpf_cutoff: 1e4,
            lpf_cutoff: 5e7,
            dt: 1e-9,
            frame_len: 1024,
            total_cps: 3000.0,
            dark_cps: 30.0,
            stray_cps: 60.0,
            optical_loss: 0.099_387_33,
            two_photon_weight: 0.010_809_51,
            three_photon_weight: 0.007_633_74,
            electronic_noise_rel: 0.01,
            n_frames: 20_000,
            seed: 1545,
            hd_filters: true,
            vacuum_frames: 20_000,
            n_max: DEFAULT_N_MAX,
            em_max_iter: 5000,
            em_tol: 1e-9,
            bootstrap_replicates: 100,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.dt, self.frame_len)
    }

    /// Idler-arm filters: filter cavity followed by the FBG.
    pub fn idler_filters(&self) -> Result<Vec<FilterSpec>> {
        Ok(vec![FilterSpec::cavity(self.fc_hwhm)?, FilterSpec::fbg(self.fbg_hwhm)?])
    }

    /// Electrical filters after the homodyne detector, empty when disabled.
    pub fn homodyne_filters(&self) -> Result<Vec<FilterSpec>> {
        if !self.hd_filters {
            return Ok(Vec::new());
        }
        Ok(vec![FilterSpec::highpass(self.hpf_cutoff)?, FilterSpec::lowpass(self.lpf_cutoff)?])
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Parses the text format, reporting every offending key at once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut issues = Vec::new();
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(issue(format!("line {}", lineno + 1), "expected `key = value`"));
                continue;
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !REQUIRED_KEYS.contains(&key.as_str()) && !OPTIONAL_KEYS.contains(&key.as_str()) {
                issues.push(issue(&key, "unknown key"));
                continue;
            }
            if values.insert(key.clone(), value).is_some() {
                issues.push(issue(&key, "assigned more than once"));
            }
        }
        for key in REQUIRED_KEYS {
            if !values.contains_key(key) {
                issues.push(issue(key, "missing required key"));
            }
        }

        let defaults = Self::reference_defaults();
        let mut reader = Reader {
            values: &values,
            issues: &mut issues,
        };
        let config = Self {
            opo_hwhm: reader.get("opo_hwhm", defaults.opo_hwhm),
            fc_hwhm: reader.get("fc_hwhm", defaults.fc_hwhm),
            fbg_hwhm: reader.get("fbg_hwhm", defaults.fbg_hwhm),
            hpf_cutoff: reader.get("hpf_cutoff", defaults.hpf_cutoff),
            lpf_cutoff: reader.get("lpf_cutoff", defaults.lpf_cutoff),
            dt: reader.get("dt", defaults.dt),
            frame_len: reader.get("frame_len", defaults.frame_len),
            total_cps: reader.get("total_cps", defaults.total_cps),
            dark_cps: reader.get("dark_cps", defaults.dark_cps),
            stray_cps: reader.get("stray_cps", defaults.stray_cps),
            optical_loss: reader.get("optical_loss", defaults.optical_loss),
            two_photon_weight: reader.get("two_photon_weight", defaults.two_photon_weight),
            three_photon_weight: reader.get("three_photon_weight", defaults.three_photon_weight),
            electronic_noise_rel: reader.get("electronic_noise_rel", defaults.electronic_noise_rel),
            n_frames: reader.get("n_frames", defaults.n_frames),
            seed: reader.get("seed", defaults.seed),
            hd_filters: reader.get("hd_filters", defaults.hd_filters),
            vacuum_frames: reader.get("vacuum_frames", defaults.vacuum_frames),
            n_max: reader.get("n_max", defaults.n_max),
            em_max_iter: reader.get("em_max_iter", defaults.em_max_iter),
            em_tol: reader.get("em_tol", defaults.em_tol),
            bootstrap_replicates: reader.get("bootstrap_replicates", defaults.bootstrap_replicates),
        };
        if issues.is_empty() {
            issues.extend(config.issues());
        }
        if issues.is_empty() {
            Ok(config)
        } else {
            Err(Error::Config(issues))
        }
    }

    /// [`ExperimentConfig::issues`] as a `Result`.
    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    /// Semantic checks; empty when the configuration is usable.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut positive = |key: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(issue(key, format!("{v} must be positive")));
            }
        };
        positive("opo_hwhm", self.opo_hwhm);
        positive("fc_hwhm", self.fc_hwhm);
        positive("fbg_hwhm", self.fbg_hwhm);
        positive("hpf_cutoff", self.hpf_cutoff);
        positive("lpf_cutoff", self.lpf_cutoff);
        positive("dt", self.dt);
        positive("total_cps", self.total_cps);
        positive("em_tol", self.em_tol);

        for (key, v) in [
            ("dark_cps", self.dark_cps),
            ("stray_cps", self.stray_cps),
            ("electronic_noise_rel", self.electronic_noise_rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(issue(key, format!("{v} must be non-negative")));
            }
        }
        for (key, v) in [
            ("optical_loss", self.optical_loss),
            ("two_photon_weight", self.two_photon_weight),
            ("three_photon_weight", self.three_photon_weight),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(issue(key, format!("{v} is not a fraction in [0, 1]")));
            }
        }
        if self.two_photon_weight + self.three_photon_weight >= 1.0 {
            out.push(issue(
                "three_photon_weight",
                "two_photon_weight + three_photon_weight must be below 1",
            ));
        }
        if self.dark_cps + self.stray_cps > self.total_cps {
            out.push(issue("dark_cps", "dark_cps + stray_cps exceeds total_cps"));
        }
        if self.frame_len < 2 {
            out.push(issue("frame_len", "need at least 2 samples per frame"));
        }
        if self.n_max < 3 || self.n_max > FOCK_ORDER_CAP {
            out.push(issue("n_max", format!("must lie in 3..={FOCK_ORDER_CAP}")));
        }
        if self.em_max_iter == 0 {
            out.push(issue("em_max_iter", "must be at least 1"));
        }
        if self.bootstrap_replicates < 50 {
            out.push(issue("bootstrap_replicates", "need at least 50 replicates"));
        }
        out
    }

    /// Renders the configuration in the text format, round-trippable through
    /// [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("opo_hwhm", format!("{:?}", self.opo_hwhm));
        line("fc_hwhm", format!("{:?}", self.fc_hwhm));
        line("fbg_hwhm", format!("{:?}", self.fbg_hwhm));
        line("hpf_cutoff", format!("{:?}", self.hpf_cutoff));
        line("lpf_cutoff", format!("{:?}", self.lpf_cutoff));
        line("dt", format!("{:?}", self.dt));
        line("frame_len", self.frame_len.to_string());
        line("total_cps", format!("{:?}", self.total_cps));
        line("dark_cps", format!("{:?}", self.dark_cps));
        line("stray_cps", format!("{:?}", self.stray_cps));
        line("optical_loss", format!("{:?}", self.optical_loss));
        line("two_photon_weight", format!("{:?}", self.two_photon_weight));
        line("three_photon_weight", format!("{:?}", self.three_photon_weight));
        line("electronic_noise_rel", format!("{:?}", self.electronic_noise_rel));
        line("n_frames", self.n_frames.to_string());
        line("seed", self.seed.to_string());
        line("hd_filters", self.hd_filters.to_string());
        line("vacuum_frames", self.vacuum_frames.to_string());
        line("n_max", self.n_max.to_string());
        line("em_max_iter", self.em_max_iter.to_string());
        line("em_tol", format!("{:?}", self.em_tol));
        line("bootstrap_replicates", self.bootstrap_replicates.to_string());
        s
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn issue(key: impl Into<String>, problem: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        key: key.into(),
        problem: problem.into(),
    }
}

struct Reader<'a> {
    values: &'a BTreeMap<String, String>,
    issues: &'a mut Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn get<T: ConfigValue>(&mut self, key: &str, default: T) -> T {
        match self.values.get(key) {
            None => default,
            Some(raw) => T::parse_value(raw).unwrap_or_else(|| {
                self.issues
                    .push(issue(key, format!("cannot read `{raw}` as {}", T::EXPECTED)));
                default
            }),
        }
    }
}

trait ConfigValue: Sized {
    const EXPECTED: &'static str;
    fn parse_value(raw: &str) -> Option<Self>;
}

impl ConfigValue for f64 {
    const EXPECTED: &'static str = "a plain number in base units (no unit suffix)";

    fn parse_value(raw: &str) -> Option<Self> {
        raw.parse::<f64>().ok().filter(|v| v.is_finite())
    }
}

impl ConfigValue for usize {
    const EXPECTED: &'static str = "a non-negative integer";

    fn parse_value(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
}

impl ConfigValue for u64 {
    const EXPECTED: &'static str = "a non-negative 64-bit integer";

    fn parse_value(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
}

impl ConfigValue for bool {
    const EXPECTED: &'static str = "`true` or `false`";

    fn parse_value(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys_of(err: Error) -> Vec<String> {
        match err {
            Error::Config(issues) => issues.into_iter().map(|i| i.key).collect(),
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = ExperimentConfig::reference_defaults();
        let parsed: ExperimentConfig = cfg.to_text().parse().unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header\n\n{}  # trailing\n", ExperimentConfig::reference_defaults().to_text());
        assert!(ExperimentConfig::parse(&text).is_ok());
    }

    #[test]
    fn optional_keys_fall_back_to_defaults() {
        let text: String = ExperimentConfig::reference_defaults()
            .to_text()
            .lines()
            .filter(|l| REQUIRED_KEYS.iter().any(|k| l.starts_with(&format!("{k} "))))
            .map(|l| format!("{l}\n"))
            .collect();
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.n_max, 10);
        assert!(cfg.hd_filters);
    }

    #[test]
    fn every_offending_key_is_listed() {
        let text = ExperimentConfig::reference_defaults()
            .to_text()
            .replace("dt = 1e-9", "")
            .replace("opo_hwhm = 3700000.0", "opo_hwhm = 3.7MHz")
            .replace("seed = 1545", "seed = 1545\nbogus = 1");
        let keys = keys_of(ExperimentConfig::parse(&text).unwrap_err());
        assert!(keys.contains(&"dt".to_string()), "{keys:?}");
        assert!(keys.contains(&"opo_hwhm".to_string()));
        assert!(keys.contains(&"bogus".to_string()));
    }

    #[test]
    fn semantic_validation() {
        let mut cfg = ExperimentConfig::reference_defaults();
        cfg.dark_cps = 2000.0;
        cfg.stray_cps = 1500.0;
        cfg.optical_loss = 1.2;
        let keys: Vec<_> = cfg.issues().into_iter().map(|i| i.key).collect();
        assert!(keys.contains(&"dark_cps".to_string()));
        assert!(keys.contains(&"optical_loss".to_string()));
        let keys = keys_of(ExperimentConfig::parse(&cfg.to_text()).unwrap_err());
        assert_eq!(keys.len(), 2);
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let text = format!("{}dt = 2e-9\nnot a pair\n", ExperimentConfig::reference_defaults().to_text());
        let keys = keys_of(ExperimentConfig::parse(&text).unwrap_err());
        assert!(keys.contains(&"dt".to_string()));
        assert!(keys.iter().any(|k| k.starts_with("line ")));
    }
}
