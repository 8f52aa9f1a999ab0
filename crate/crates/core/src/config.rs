//! JSON experiment configuration.
//!
//! A config is read, every default is filled in by [`ExperimentConfig::resolve`],
//! and the resolved form is what runs and what gets written next to the
//! outputs. Its hash goes into every CSV header.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bar::{GridSpec, DEFAULT_RAY_ALPHAS};
use crate::model::{HeavyTrafficSequence, NetworkSpec, RRule};
use crate::sim::SimOptions;
use crate::srbm::{ReflectionScheme, SrbmOptions};
use crate::{Error, Result};

pub const BUNDLED: [(&str, &str); 3] = [
    ("mm1", include_str!("../configs/mm1.json")),
    ("tandem2", include_str!("../configs/tandem2.json")),
    ("feedback3", include_str!("../configs/feedback3.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub warmup: Option<f64>,
    #[serde(default = "default_sim_horizon")]
    pub horizon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_n_list")]
    pub n_list: Vec<u64>,
    #[serde(default = "default_sweep_horizon")]
    pub horizon: f64,
    #[serde(default = "default_alphas")]
    pub ray_alphas: Vec<f64>,
    /// Compare marginals against a simulated SRBM.
    #[serde(default = "default_true")]
    pub srbm_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrbmSection {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_srbm_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub scheme: ReflectionScheme,
}

/// Pass/fail limits applied by `--assert`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Flow and prelimit checks: `|z| <= z`.
    #[serde(default = "default_z")]
    pub z: f64,
    /// Fraction of grid points whose prelimit residual must pass.
    #[serde(default = "default_pass_fraction")]
    pub prelimit_pass_fraction: f64,
    /// `sup(n_max) <= sup_ratio * sup(n_min)` in the sweep.
    #[serde(default = "default_half")]
    pub sup_ratio: f64,
    /// `error(n_max) <= expansion_ratio * error(n_min)` for the expansion table.
    #[serde(default = "default_half")]
    pub expansion_ratio: f64,
    /// SRBM `|residual| / ||theta||`.
    #[serde(default = "default_srbm_normalized")]
    pub srbm_normalized: f64,
    /// One-dimensional SRBM KS distance to the exponential law.
    #[serde(default = "default_srbm_ks")]
    pub srbm_ks: f64,
    /// Relative error of the regulator rate against `b`.
    #[serde(default = "default_regulator")]
    pub regulator_relative: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub network: NetworkSpec,
    pub b: Vec<f64>,
    #[serde(default)]
    pub r_rule: RRule,
    /// Sequence index for the single-network commands.
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_sim")]
    pub sim: SimSection,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_sweep")]
    pub sweep: SweepSection,
    #[serde(default = "default_srbm")]
    pub srbm: SrbmSection,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_sim_horizon() -> f64 {
    2e5
}
fn default_sweep_horizon() -> f64 {
    1e6
}
fn default_srbm_horizon() -> f64 {
    1e4
}
fn default_seed() -> u64 {
    1
}
fn default_batches() -> usize {
    32
}
fn default_n() -> u64 {
    16
}
fn default_n_list() -> Vec<u64> {
    vec![4, 16, 64]
}
fn default_alphas() -> Vec<f64> {
    DEFAULT_RAY_ALPHAS.to_vec()
}
fn default_true() -> bool {
    true
}
fn default_h() -> f64 {
    1e-3
}
fn default_record_every() -> usize {
    10
}
fn default_z() -> f64 {
    3.0
}
fn default_pass_fraction() -> f64 {
    0.95
}
fn default_half() -> f64 {
    0.5
}
fn default_srbm_normalized() -> f64 {
    0.05
}
fn default_srbm_ks() -> f64 {
    0.02
}
fn default_regulator() -> f64 {
    0.05
}
fn default_sim() -> SimSection {
    serde_json::from_str("{}").expect("all fields have defaults")
}
fn default_sweep() -> SweepSection {
    serde_json::from_str("{}").expect("all fields have defaults")
}
fn default_srbm() -> SrbmSection {
    serde_json::from_str("{}").expect("all fields have defaults")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, or a bundled config when `path` is one of the bundled
    /// names and no such file exists.
    pub fn load(path: &str) -> Result<Self> {
        if !Path::new(path).is_file() {
            if let Some(text) = bundled(path) {
                return Self::from_json(text);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
        Self::from_json(&text)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let text = bundled(name).ok_or_else(|| Error::Config(format!("no bundled config named {name:?}")))?;
        Self::from_json(text)
    }

    /// Fills in defaults that depend on other fields and validates
    /// everything that can be checked without running.
    pub fn resolve(mut self) -> Result<Self> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.sim.warmup.is_none() {
            self.sim.warmup = Some(0.1 * self.sim.horizon);
        }
        if self.srbm.burn_in.is_none() {
            self.srbm.burn_in = Some(0.1 * self.srbm.horizon);
        }
        if self.name.is_empty() {
            self.name = "experiment".into();
        }
        if self.out.is_none() {
            self.out = Some(format!("out/{}", self.name));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.sweep.n_list.contains(&0) {
            return Err(Error::Config("n-list entries must be at least 1".into()));
        }
        self.sequence().map_err(cfg)?;
        self.sim_options().check().map_err(cfg)?;
        self.sweep_sim_options().check().map_err(cfg)?;
        self.srbm_options().check().map_err(cfg)?;
        crate::bar::ThetaGrid::generate(self.network.d(), &self.grid).map_err(cfg)?;
        Ok(self)
    }

    /// Sets every simulation seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self.srbm.seed = seed;
        self
    }

    pub fn sequence(&self) -> Result<HeavyTrafficSequence> {
        HeavyTrafficSequence::new(self.network.clone(), self.b.clone(), self.r_rule)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            warmup: self.sim.warmup.unwrap_or(0.1 * self.sim.horizon),
            horizon: self.sim.horizon,
            seed: self.sim.seed,
            batches: self.sim.batches,
        }
    }

    /// Same seed and batching as [`Self::sim_options`], sweep horizon.
    pub fn sweep_sim_options(&self) -> SimOptions {
        let mut o = SimOptions::new(self.sweep.horizon, self.sim.seed);
        o.batches = self.sim.batches;
        o
    }

    pub fn srbm_options(&self) -> SrbmOptions {
        SrbmOptions {
            h: self.srbm.h,
            horizon: self.srbm.horizon,
            burn_in: self.srbm.burn_in.unwrap_or(0.1 * self.srbm.horizon),
            seed: self.srbm.seed,
            record_every: self.srbm.record_every,
            batches: self.srbm.batches,
            scheme: self.srbm.scheme,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the pretty-printed JSON without the output directory,
    /// so the same experiment hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        Sha256::digest(c.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_resolve() {
        for (name, _) in BUNDLED {
            let c = ExperimentConfig::bundled(name).unwrap().resolve().unwrap();
            assert_eq!(c.name, name);
            assert!(c.sim.warmup.is_some() && c.srbm.burn_in.is_some());
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::bundled("tandem2").unwrap().resolve().unwrap();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap().resolve().unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_ne!(c.hash(), c.clone().with_seed(99).hash());
        let mut moved = c.clone();
        moved.out = Some("elsewhere".into());
        assert_eq!(c.hash(), moved.hash());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(bundled("mm1").unwrap()).unwrap();
        v["sim"]["horizn"] = 5.0.into();
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    }

    #[test]
    fn unstable_network_is_a_config_error() {
        let mut c = ExperimentConfig::bundled("tandem2").unwrap();
        c.network.routing[1][0] = 1.0;
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }
}
