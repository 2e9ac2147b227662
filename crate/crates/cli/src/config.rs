//! Experiment configuration files (TOML, or JSON by extension).

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use twoprice::certificates::InfCase;
use twoprice::policies::{Method, Policy};
use twoprice::reward::{reward_from_wtp, Objective, RewardFunction, WtpDistribution};
use twoprice::simulator::DurationDistribution;
use twoprice::ProblemInstance;

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn field(path: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {e}"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WtpSpec {
    Discrete(Vec<[f64; 2]>),
    Uniform([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKindSpec {
    Wtp(WtpSpec),
    Uniform([f64; 2]),
    /// `[intercept, slope]` pairs.
    MinAffine(Vec<[f64; 2]>),
    /// `[c1, c2]` for `c1 x + c2 x^2`.
    Quadratic([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
pub struct RewardSpec {
    #[serde(flatten)]
    pub kind: RewardKindSpec,
    #[serde(default)]
    pub objective: Objective,
}

impl RewardSpec {
    pub fn build(&self, path: &str) -> Result<RewardFunction, CliError> {
        let pairs = |v: &[[f64; 2]]| v.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
        match &self.kind {
            RewardKindSpec::Wtp(WtpSpec::Discrete(v)) => {
                let dist = WtpDistribution::discrete(&pairs(v)).map_err(|e| field(&format!("{path}.wtp.discrete"), e))?;
                reward_from_wtp(&dist, self.objective).map_err(|e| field(&format!("{path}.wtp"), e))
            }
            RewardKindSpec::Wtp(WtpSpec::Uniform([lo, hi])) | RewardKindSpec::Uniform([lo, hi]) => {
                let dist = WtpDistribution::uniform(*lo, *hi).map_err(|e| field(&format!("{path}.uniform"), e))?;
                reward_from_wtp(&dist, self.objective).map_err(|e| field(&format!("{path}.uniform"), e))
            }
            RewardKindSpec::MinAffine(v) => {
                RewardFunction::min_affine(&pairs(v)).map_err(|e| field(&format!("{path}.min_affine"), e))
            }
            RewardKindSpec::Quadratic([c1, c2]) => {
                RewardFunction::quadratic(*c1, *c2).map_err(|e| field(&format!("{path}.quadratic"), e))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub c: usize,
    pub lambda: f64,
    #[serde(default = "one")]
    pub d: f64,
    pub reward: RewardSpec,
}

fn one() -> f64 {
    1.0
}

impl InstanceSpec {
    pub fn build(&self, path: &str) -> Result<ProblemInstance, CliError> {
        let g = self.reward.build(&format!("{path}.reward"))?;
        let inst = ProblemInstance::new(self.c, self.lambda, self.d, g).map_err(|e| field(path, e))?;
        if inst.xstar() >= 1.0 {
            log::warn!("{path}: x* = {} >= 1, capacity is not scarce", inst.xstar());
        }
        Ok(inst)
    }
}

pub fn parse_methods(labels: &[String], path: &str) -> Result<Vec<Method>, CliError> {
    labels
        .iter()
        .map(|l| {
            Method::from_label(l).ok_or_else(|| {
                field(
                    path,
                    format!("unknown policy '{l}' (expected fluid, static_opt, two_price_opt, two_price_theory, sd_opt)"),
                )
            })
        })
        .collect()
}

fn default_policies() -> Vec<String> {
    ["fluid", "static_opt", "two_price_opt", "sd_opt"].iter().map(|s| s.to_string()).collect()
}

/// Expected value with an absolute tolerance.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub value: f64,
    pub tol: f64,
}

impl Expect {
    pub fn holds(&self, v: f64) -> bool {
        (v - self.value).abs() <= self.tol
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub instance: InstanceSpec,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    /// Extra policies to evaluate, by name.
    #[serde(default)]
    pub evaluate: BTreeMap<String, PolicySpec>,
    /// Checked with `--check`: policy label (or `flu`) to expected reward.
    #[serde(default)]
    pub expect: BTreeMap<String, Expect>,
    #[serde(default)]
    pub seed: u64,
}

/// A policy given inline: tagged form, bare admission vector, or `"fluid"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Tagged(Policy),
    Vector(Vec<f64>),
    Named(String),
}

/// Base instance of a scaling family; `lambda / c` is held fixed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    pub c: usize,
    pub lambda: f64,
    #[serde(default = "one")]
    pub d: f64,
    pub reward: RewardSpec,
    /// Checked with `--check`: policy label to `[lo, hi]` slope range.
    #[serde(default)]
    pub expect: BTreeMap<String, [f64; 2]>,
}

impl FamilySpec {
    pub fn instance(&self) -> InstanceSpec {
        InstanceSpec {
            c: self.c,
            lambda: self.lambda,
            d: self.d,
            reward: self.reward.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub scales: Vec<usize>,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    pub family: Vec<FamilySpec>,
    #[serde(default)]
    pub seed: u64,
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.scales.len() < 3 {
            return Err(field("scales", "at least three scale points are required"));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) || self.scales[0] == 0 {
            return Err(field("scales", "scale points must be positive and increasing"));
        }
        if self.family.is_empty() {
            return Err(field("family", "at least one family is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallStockConfig {
    pub families: Vec<twoprice::experiments::SmallStockFamily>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_small_c")]
    pub c: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Checked with `--check`: `family -> c -> policy -> expectation` of
    /// the mean ratio.
    #[serde(default)]
    pub expect: BTreeMap<String, BTreeMap<String, BTreeMap<String, Expect>>>,
}

fn default_instances() -> usize {
    100
}

fn default_small_c() -> Vec<usize> {
    vec![20, 40, 60, 80, 100]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertificateSpec {
    /// Fitted from the local shape of `g`.
    Auto,
    Alpha1 { big_r: f64, r: f64 },
    AlphaInf { r1: f64, r2: f64, b2: f64, b3: f64, case: InfCase },
    Static { r: f64, b: f64, q: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub certificates: Vec<CertificateSpec>,
    /// Previously written certificate JSON files to re-verify.
    #[serde(default)]
    pub replay: Vec<String>,
    /// Compare each certificate with the optimal stock-dependent reward.
    #[serde(default = "yes")]
    pub compare_sd: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub instance: InstanceSpec,
    pub policy: PolicySpec,
    pub durations: Vec<DurationSpec>,
    pub horizon: f64,
    pub warmup: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// Duration distribution with the mean defaulting to the instance's `d`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DurationSpec {
    Full(DurationDistribution),
    Short(ShortDuration),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShortDuration {
    Exponential,
    Deterministic,
    LogNormal { cv: f64 },
    HyperExponential { cv: f64 },
}

impl DurationSpec {
    pub fn resolve(&self, d: f64) -> DurationDistribution {
        match self {
            DurationSpec::Full(x) => *x,
            DurationSpec::Short(ShortDuration::Exponential) => DurationDistribution::Exponential { mean: d },
            DurationSpec::Short(ShortDuration::Deterministic) => DurationDistribution::Deterministic { value: d },
            DurationSpec::Short(ShortDuration::LogNormal { cv }) => DurationDistribution::LogNormal { mean: d, cv: *cv },
            DurationSpec::Short(ShortDuration::HyperExponential { cv }) => {
                DurationDistribution::HyperExponential { mean: d, cv: *cv }
            }
        }
    }
}
