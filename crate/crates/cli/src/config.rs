//! Run configuration: a TOML file with an optional `seed`, an optional
//! `[defaults]` table and one section per subcommand.

use std::path::Path;

use chaoslab::chaos::{check_radius, MuMode};
use chaoslab::dist::DistSpec;
use chaoslab::experiments::Estimator;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Version of the defaults table below; bumped whenever a default changes.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub m_star: usize,
    pub oversample: usize,
    pub l1: f64,
    pub c4: f64,
    pub c5: f64,
    pub enumeration_budget: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            m_star: 16,
            oversample: 16,
            l1: 40.0,
            c4: 8.0,
            c5: 4.0,
            enumeration_budget: 20_000_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub defaults: Defaults,
    pub oracle: Option<OracleConfig>,
    pub moments: Option<MomentsConfig>,
    pub phase_scan: Option<PhaseScanConfig>,
    pub chaos: Option<ChaosConfig>,
    pub tightness: Option<TightnessConfig>,
    pub sobolev: Option<SobolevConfig>,
    pub bench: Option<BenchConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub dists: Vec<DistSpec>,
    pub n: Vec<usize>,
    /// Smallest allowed part for each constraint row; `1` is unconstrained.
    #[serde(default = "one_part")]
    pub min_part: Vec<usize>,
}

fn one_part() -> Vec<usize> {
    vec![1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    /// Conditional in heavy-tail regimes, plain otherwise.
    Auto,
    Plain,
    X1Conditional,
}

impl EstimatorChoice {
    pub fn fixed(self) -> Option<Estimator> {
        match self {
            EstimatorChoice::Auto => None,
            EstimatorChoice::Plain => Some(Estimator::Plain),
            EstimatorChoice::X1Conditional => Some(Estimator::X1Conditional),
        }
    }
}

fn auto() -> EstimatorChoice {
    EstimatorChoice::Auto
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub dists: Vec<DistSpec>,
    pub q: Vec<f64>,
    pub n: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "auto")]
    pub estimator: EstimatorChoice,
    #[serde(default)]
    pub force_plain: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exp,
    Se,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseScanConfig {
    pub family: Family,
    /// `γ` values for `exp`, `p` values for `se`.
    pub params: Vec<f64>,
    pub q: Vec<f64>,
    pub n: Vec<usize>,
    pub replicates: usize,
}

impl PhaseScanConfig {
    pub fn dist(&self, param: f64) -> DistSpec {
        match self.family {
            Family::Exp => DistSpec::Exponential { gamma: param },
            Family::Se => DistSpec::StretchedExponential { p: param },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuModeChoice {
    TiltedExact,
    LeadingTerm,
}

impl From<MuModeChoice> for MuMode {
    fn from(m: MuModeChoice) -> Self {
        match m {
            MuModeChoice::TiltedExact => MuMode::TiltedExact,
            MuModeChoice::LeadingTerm => MuMode::LeadingTerm,
        }
    }
}

fn tilted() -> MuModeChoice {
    MuModeChoice::TiltedExact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    pub dist: DistSpec,
    pub k: Vec<usize>,
    pub r: Vec<f64>,
    /// Mass moment exponents.
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub replicates: usize,
    /// Barrier levels.
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub barrier_replicates: usize,
    #[serde(default = "tilted")]
    pub mu_mode: MuModeChoice,
    pub m_star: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessConfig {
    pub dist: DistSpec,
    pub n: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "quarter")]
    pub power: f64,
}

fn quarter() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevConfig {
    pub dist: DistSpec,
    pub s: Vec<f64>,
    pub n_max: usize,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub n: Vec<usize>,
    #[serde(default = "three")]
    pub repeats: usize,
}

fn three() -> usize {
    3
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: vec![256, 1024, 4096],
            repeats: 3,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_dist(d: &DistSpec) -> CliResult<()> {
    d.validate().map_err(|e| bad(e.to_string()))
}

fn non_empty<T>(v: &[T], what: &str) -> CliResult<()> {
    if v.is_empty() {
        Err(bad(format!("{what} list is empty")))
    } else {
        Ok(())
    }
}

fn positive_q(qs: &[f64]) -> CliResult<()> {
    match qs.iter().find(|q| !(**q > 0.0) || !q.is_finite()) {
        Some(q) => Err(bad(format!("moment exponent must be positive, got {q}"))),
        None => Ok(()),
    }
}

impl OracleConfig {
    pub fn validate(&self) -> CliResult<()> {
        non_empty(&self.dists, "dists")?;
        non_empty(&self.n, "n")?;
        non_empty(&self.min_part, "min_part")?;
        self.dists.iter().try_for_each(check_dist)?;
        if self.min_part.contains(&0) {
            return Err(bad("min_part must be at least 1"));
        }
        Ok(())
    }
}

impl MomentsConfig {
    pub fn validate(&self) -> CliResult<()> {
        non_empty(&self.dists, "dists")?;
        non_empty(&self.n, "n")?;
        non_empty(&self.q, "q")?;
        self.dists.iter().try_for_each(check_dist)?;
        positive_q(&self.q)?;
        if self.replicates == 0 {
            return Err(bad("replicates must be positive"));
        }
        Ok(())
    }
}

impl PhaseScanConfig {
    pub fn validate(&self) -> CliResult<()> {
        non_empty(&self.params, "params")?;
        non_empty(&self.q, "q")?;
        non_empty(&self.n, "n")?;
        positive_q(&self.q)?;
        self.params.iter().try_for_each(|p| check_dist(&self.dist(*p)))?;
        if self.replicates == 0 {
            return Err(bad("replicates must be positive"));
        }
        Ok(())
    }
}

impl ChaosConfig {
    pub fn validate(&self, defaults: &Defaults) -> CliResult<()> {
        check_dist(&self.dist)?;
        non_empty(&self.k, "k")?;
        non_empty(&self.r, "r")?;
        positive_q(&self.q)?;
        if self.k.iter().any(|k| *k < 2) {
            return Err(bad("K must be at least 2"));
        }
        for &k in &self.k {
            for &r in &self.r {
                check_radius(r, k, defaults.c5).map_err(|e| bad(e.to_string()))?;
            }
        }
        if !self.q.is_empty() && self.replicates == 0 {
            return Err(bad("mass moments need replicates > 0"));
        }
        if !self.a.is_empty() && self.barrier_replicates == 0 {
            return Err(bad("barrier levels need barrier_replicates > 0"));
        }
        if self.q.is_empty() && self.a.is_empty() {
            return Err(bad("nothing to do: give mass exponents q or barrier levels a"));
        }
        Ok(())
    }
}

impl TightnessConfig {
    pub fn validate(&self) -> CliResult<()> {
        check_dist(&self.dist)?;
        non_empty(&self.n, "n")?;
        if self.replicates == 0 {
            return Err(bad("replicates must be positive"));
        }
        Ok(())
    }
}

impl SobolevConfig {
    pub fn validate(&self) -> CliResult<()> {
        check_dist(&self.dist)?;
        non_empty(&self.s, "s")?;
        if self.replicates == 0 || self.n_max < 4 {
            return Err(bad("need replicates > 0 and n_max >= 4"));
        }
        Ok(())
    }
}

impl BenchConfig {
    pub fn validate(&self) -> CliResult<()> {
        non_empty(&self.n, "n")?;
        if self.repeats == 0 {
            return Err(bad("repeats must be positive"));
        }
        Ok(())
    }
}
