//! Declarative experiment configuration (TOML).
//!
//! A config names one of the built-in experiments (or `custom`), the
//! penalty (either a fixed strength `rho` or an expected-distance budget
//! `budget`, never both), the sampler settings, and experiment-specific
//! parameters. Reports are regenerable bit for bit from a config plus its
//! seed, so everything that influences the run lives here.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dset_core::hmc::HmcConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub hmc: HmcSection,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<RidgeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vmf: Option<VmfSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contingency: Option<ContingencySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub output_dir: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RidgeBall,
    RobustVmf,
    Contingency,
    Custom,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::RidgeBall => "ridge_ball",
            ExperimentKind::RobustVmf => "robust_vmf",
            ExperimentKind::Contingency => "contingency",
            ExperimentKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmcSection {
    pub step_size: f64,
    pub num_steps: usize,
    pub num_warmup: usize,
    pub num_samples: usize,
    pub num_chains: usize,
    pub step_size_adapt: bool,
    pub target_accept: f64,
    pub step_jitter: f64,
    pub mass_diag: Vec<f64>,
}

impl Default for HmcSection {
    fn default() -> Self {
        HmcSection {
            step_size: 0.0,
            num_steps: 32,
            num_warmup: 1000,
            num_samples: 1000,
            num_chains: 2,
            step_size_adapt: true,
            target_accept: 0.8,
            step_jitter: 0.2,
            mass_diag: Vec::new(),
        }
    }
}

impl HmcSection {
    pub fn to_core(&self, seed: u64) -> HmcConfig {
        HmcConfig {
            step_size: self.step_size,
            num_steps: self.num_steps,
            mass_diag: self.mass_diag.clone(),
            num_warmup: self.num_warmup,
            num_samples: self.num_samples,
            num_chains: self.num_chains,
            seed,
            step_size_adapt: self.step_size_adapt,
            target_accept: self.target_accept,
            step_jitter: self.step_jitter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    pub flavor: FlavorName,
    /// Fixed penalty strength; mutually exclusive with `budget`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Expected `½dist²` budget for calibration; mutually exclusive with
    /// `rho`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlavorName {
    #[default]
    Squared,
    Unsquared,
    LevelSet,
    Sharp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RidgeSection {
    pub beta_true: Vec<f64>,
    pub n_obs: usize,
    pub sigma2: f64,
    pub radius: f64,
}

impl Default for RidgeSection {
    fn default() -> Self {
        RidgeSection {
            beta_true: vec![-1.295, -0.532],
            n_obs: 100,
            sigma2: 1.0,
            radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VmfSection {
    pub location: Vec<f64>,
    pub sigma2: f64,
    pub dof: f64,
    /// Penalty sweep for the two-flavor comparison table.
    pub rhos: Vec<f64>,
}

impl Default for VmfSection {
    fn default() -> Self {
        let f = 1.0 / 3f64.sqrt();
        VmfSection {
            location: vec![f, f, f],
            sigma2: 0.1,
            dof: 3.0,
            rhos: vec![1e3, 1e4, 1e5, 1e6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContingencySection {
    /// CSV of I rows by J integer columns.
    pub counts_csv: String,
    /// Shared Dirichlet parameter for every cell.
    pub alpha: f64,
}

impl Default for ContingencySection {
    fn default() -> Self {
        ContingencySection { counts_csv: "data/trauma_counts.csv".into(), alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSection {
    GaussianLinear { x: Vec<Vec<f64>>, y: Vec<f64>, sigma2: f64 },
    StudentT { location: Vec<f64>, dof: f64, sigma2: f64 },
    MultinomialTable { counts_csv: String, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSection {
    Ball { center: Vec<f64>, radius: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { dim: usize },
    Polyhedron {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        e: Vec<Vec<f64>>,
        #[serde(default)]
        d: Vec<f64>,
    },
    StochasticDominance { rows: usize, cols: usize },
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config = Config::parse(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.penalty.rho.is_some() && self.penalty.budget.is_some() {
            bail!("penalty.rho and penalty.budget are mutually exclusive; set exactly one");
        }
        if let Some(rho) = self.penalty.rho {
            if !(rho > 0.0) {
                bail!("penalty.rho must be positive");
            }
        }
        if let Some(budget) = self.penalty.budget {
            if !(budget > 0.0) {
                bail!("penalty.budget must be positive");
            }
        }
        match self.experiment.kind {
            ExperimentKind::Custom => {
                if self.model.is_none() || self.constraint.is_none() {
                    bail!("custom experiments need [model] and [constraint] sections");
                }
            }
            ExperimentKind::RobustVmf => {
                if let Some(vmf) = &self.vmf {
                    if vmf.rhos.is_empty() {
                        bail!("vmf.rhos must be nonempty");
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The fixed penalty strength, falling back to the experiment default.
    pub fn rho_or_default(&self) -> Option<f64> {
        self.penalty.rho.or(match self.experiment.kind {
            ExperimentKind::RidgeBall => Some(1e3),
            ExperimentKind::Contingency => Some(7.5e5),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[experiment]
kind = "ridge_ball"
output_dir = "out/ridge"
seed = 42

[penalty]
flavor = "squared"
rho = 1000.0

[hmc]
num_warmup = 500
num_samples = 800
"#;

    #[test]
    fn parse_serialize_parse_is_identity() {
        let parsed = Config::parse(EXAMPLE).unwrap();
        let serialized = parsed.to_toml().unwrap();
        let reparsed = Config::parse(&serialized).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn rho_and_budget_are_exclusive() {
        let bad = r#"
[experiment]
kind = "ridge_ball"
output_dir = "out"
seed = 1

[penalty]
rho = 10.0
budget = 0.1
"#;
        assert!(Config::parse(bad).is_err());
    }

    #[test]
    fn custom_requires_model_and_constraint() {
        let bad = r#"
[experiment]
kind = "custom"
output_dir = "out"
seed = 1
"#;
        assert!(Config::parse(bad).is_err());

        let good = r#"
[experiment]
kind = "custom"
output_dir = "out"
seed = 1

[penalty]
rho = 5.0

[model]
type = "student_t"
location = [0.5, 0.5]
dof = 3.0
sigma2 = 0.1

[constraint]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0
"#;
        let config = Config::parse(good).unwrap();
        assert_eq!(config.experiment.kind, ExperimentKind::Custom);
        let round = Config::parse(&config.to_toml().unwrap()).unwrap();
        assert_eq!(config, round);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let config = Config::parse(EXAMPLE).unwrap();
        assert_eq!(config.hmc.num_chains, 2);
        assert_eq!(config.hmc.num_warmup, 500);
        assert_eq!(config.rho_or_default(), Some(1000.0));
        assert!(config.vmf.is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = EXAMPLE.replace("[penalty]", "[penalty]\nbogus_field = 1.0");
        assert!(Config::parse(&bad).is_err());
    }
}
