//! Experiment configuration, read from TOML.
//!
//! ```toml
//! dataset = "wine_red"        # wine_red | wine_white | synthetic
//! # dataset_path = "data/winequality-red.csv"
//! # reg_alpha = 100.0         # default: 100 (red), 32 (white), 1 (synthetic)
//! rho = 0.01
//! budgets = ["pure:0.5", "pure:1", "gdp:0.5", "gdp:1"]
//! methods = ["localized_asap", "output_perturb", "dp_gd_autoclip", "noisy_gd"]
//! repetitions = 50
//! seed = 20240101
//! tau = 1e-6
//! center_labels = true
//! # cert_radius = 1.0         # radius of the origin ball G is certified over
//!
//! [schedule]
//! c_h = 1.0
//! c_k = 1.0
//! c_tau = 1.0
//! k_max = 2000
//!
//! [dp_gd]
//! n_iters = 100
//! step_value = 0.1            # η = step_value / n
//!
//! [noisy_gd]
//! # n_iters = 50             # default ⌈κ ln n⌉
//!
//! [synthetic]
//! n = 50
//! d = 2
//! noise = 0.5
//! seed = 7
//! ```
//!
//! Every budget is the total a method may spend; localized ASAP divides it
//! evenly over its three stages.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::privacy::PrivacyBudget;
use crate::sampler::ScheduleConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    WineRed,
    WineWhite,
    Synthetic,
}

impl DatasetKind {
    /// α used when the config leaves `reg_alpha` unset.
    pub fn default_alpha(self) -> f64 {
        match self {
            DatasetKind::WineRed => 100.0,
            DatasetKind::WineWhite => 32.0,
            DatasetKind::Synthetic => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LocalizedAsap,
    OutputPerturb,
    DpGdAutoclip,
    /// Smooth-variant noisy GD (constant step, final iterate).
    NoisyGd,
    /// Lipschitz-variant noisy GD (η_t = 1/(αn t), weighted average).
    NoisyGdLipschitz,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::LocalizedAsap, Method::OutputPerturb, Method::DpGdAutoclip, Method::NoisyGd, Method::NoisyGdLipschitz];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::LocalizedAsap => "localized_asap",
            Method::OutputPerturb => "output_perturb",
            Method::DpGdAutoclip => "dp_gd_autoclip",
            Method::NoisyGd => "noisy_gd",
            Method::NoisyGdLipschitz => "noisy_gd_lipschitz",
        }
    }

    /// Stable id used when deriving random streams.
    pub fn stream_id(self) -> u64 {
        match self {
            Method::LocalizedAsap => 1,
            Method::OutputPerturb => 2,
            Method::DpGdAutoclip => 3,
            Method::NoisyGd => 4,
            Method::NoisyGdLipschitz => 5,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub c_h: f64,
    pub c_k: f64,
    pub c_tau: f64,
    pub k_max: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let c = ScheduleConstants::default();
        Self { c_h: c.c_h, c_k: c.c_k, c_tau: c.c_tau, k_max: c.k_max }
    }
}

impl From<ScheduleSection> for ScheduleConstants {
    fn from(s: ScheduleSection) -> Self {
        ScheduleConstants { c_h: s.c_h, c_k: s.c_k, c_tau: s.c_tau, k_max: s.k_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpGdSection {
    pub n_iters: usize,
    /// Step size times n.
    pub step_value: f64,
}

impl Default for DpGdSection {
    fn default() -> Self {
        Self { n_iters: 100, step_value: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyGdSection {
    /// Defaults to `⌈κ ln n⌉` for the smooth variant and `n` for the
    /// Lipschitz variant.
    pub n_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self { n: 50, d: 2, noise: 0.5, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg_alpha: Option<f64>,
    /// Failure probability of the localization step.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(serialize_with = "ser_budgets", deserialize_with = "de_budgets")]
    pub budgets: Vec<PrivacyBudget>,
    pub methods: Vec<Method>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_true")]
    pub center_labels: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert_radius: Option<f64>,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub dp_gd: DpGdSection,
    #[serde(default)]
    pub noisy_gd: NoisyGdSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
}

fn default_rho() -> f64 {
    0.01
}

fn default_repetitions() -> usize {
    50
}

fn default_tau() -> f64 {
    crate::localization::DEFAULT_TAU
}

fn default_true() -> bool {
    true
}

fn ser_budgets<S: Serializer>(budgets: &[PrivacyBudget], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(budgets.iter().map(|b| b.to_string()))
}

fn de_budgets<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<PrivacyBudget>, D::Error> {
    let raw = Vec::<String>::deserialize(d)?;
    raw.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(dataset: DatasetKind, budgets: Vec<PrivacyBudget>, methods: Vec<Method>) -> Self {
        Self {
            dataset,
            dataset_path: None,
            reg_alpha: None,
            rho: default_rho(),
            budgets,
            methods,
            repetitions: default_repetitions(),
            seed: 0,
            tau: default_tau(),
            center_labels: true,
            cert_radius: None,
            schedule: ScheduleSection::default(),
            dp_gd: DpGdSection::default(),
            noisy_gd: NoisyGdSection::default(),
            synthetic: SyntheticSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.repetitions == 0 {
            return bad("repetitions must be ≥ 1".into());
        }
        if let Some(a) = self.reg_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("reg_alpha must be > 0, got {a}"));
            }
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if let Some(r) = self.cert_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("cert_radius must be > 0, got {r}"));
            }
        }
        let s = &self.schedule;
        if !(s.c_h > 0.0 && s.c_k > 0.0 && s.c_tau > 0.0) || s.k_max == 0 {
            return bad("schedule constants must be positive".into());
        }
        if self.dp_gd.n_iters == 0 || !(self.dp_gd.step_value > 0.0) {
            return bad("dp_gd needs n_iters ≥ 1 and step_value > 0".into());
        }
        if self.noisy_gd.n_iters == Some(0) {
            return bad("noisy_gd.n_iters must be ≥ 1".into());
        }
        if self.dataset == DatasetKind::Synthetic && (self.synthetic.n < 2 || self.synthetic.d == 0) {
            return bad("synthetic data needs n ≥ 2 and d ≥ 1".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(m) = self.methods.iter().find(|m| !seen.insert(**m)) {
            return bad(format!("method `{m}` listed twice"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.reg_alpha.unwrap_or_else(|| self.dataset.default_alpha())
    }

    /// Canonical TOML with every default filled in.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        dataset = "synthetic"
        budgets = ["pure:1", "gdp:0.5"]
        methods = ["localized_asap", "noisy_gd"]
        repetitions = 3
        seed = 9

        [schedule]
        k_max = 100
    "#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.budgets, vec![PrivacyBudget::pure(1.0).unwrap(), PrivacyBudget::gdp(0.5).unwrap()]);
        assert_eq!(c.methods, vec![Method::LocalizedAsap, Method::NoisyGd]);
        assert_eq!(c.schedule.k_max, 100);
        assert_eq!(c.schedule.c_h, 1.0);
        assert_eq!(c.rho, 0.01);
        assert_eq!(c.alpha(), 1.0);
        assert_eq!(c.tau, 1e-6);
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash().unwrap(), again.hash().unwrap());
        let mut other = c.clone();
        other.seed = 10;
        assert_ne!(c.hash().unwrap(), other.hash().unwrap());
        assert_eq!(c.hash().unwrap().len(), 64);
    }

    #[test]
    fn rejects_invalid() {
        for bad in [
            SAMPLE.replace("repetitions = 3", "repetitions = 0"),
            SAMPLE.replace("pure:1", "pure:-1"),
            SAMPLE.replace("noisy_gd\"]", "noisy_gd\", \"noisy_gd\"]"),
            SAMPLE.replace("noisy_gd\"]", "sgd\"]"),
            SAMPLE.replace("seed = 9", "seed = 9\nunknown = 1"),
            SAMPLE.replace("seed = 9", "seed = 9\nrho = 2.0"),
        ] {
            assert!(ExperimentConfig::from_toml(&bad).is_err(), "{bad}");
        }
    }
}
