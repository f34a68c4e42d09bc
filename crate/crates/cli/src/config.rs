//! The run configuration read by `simulate`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use annoplan::corpus::Role;
use annoplan::scorer::ScorerConfig;
use annoplan::simulation::{Metric, SimulationConfig, DEFAULT_BATCH_FRACTION, DEFAULT_SATURATION_THRESHOLD};
use annoplan::strategies::StrategySpec;
use annoplan::{Error, Result};

pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.1;

/// Role `train` is the simulation pool, `dev` the in-domain holdout and
/// `test` a generalization set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub role: Role,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetEntry>,
    /// Share of training contexts held out when no `dev` set is given.
    #[serde(default = "default_holdout_fraction")]
    pub holdout_fraction: f64,
    /// Relative to the config file.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub strategy: Option<StrategySpec>,
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
    #[serde(default = "default_batch_fraction")]
    pub batch_fraction: f64,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_threshold")]
    pub saturation_threshold: f64,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// Drop answers longer than this many tokens before simulating.
    #[serde(default)]
    pub max_answer_tokens: Option<usize>,
    #[serde(default)]
    pub scorer: ScorerConfig,
}

fn default_holdout_fraction() -> f64 {
    DEFAULT_HOLDOUT_FRACTION
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_batch_fraction() -> f64 {
    DEFAULT_BATCH_FRACTION
}

fn default_threshold() -> f64 {
    DEFAULT_SATURATION_THRESHOLD
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut config.datasets {
            d.path = base.join(&d.path);
        }
        config.output_dir = base.join(&config.output_dir);
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let count = |role| self.datasets.iter().filter(|d| d.role == role).count();
        if count(Role::Train) != 1 {
            return Err(Error::Config("exactly one dataset with role \"train\" is required".into()));
        }
        if count(Role::Dev) > 1 {
            return Err(Error::Config("at most one dataset with role \"dev\" is allowed".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "holdout_fraction must be in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        if self.strategy.is_some() && !self.strategies.is_empty() {
            return Err(Error::Config("give either \"strategy\" or \"strategies\", not both".into()));
        }
        for config in self.simulation_configs(0) {
            config.validate()?;
        }
        Ok(())
    }

    pub fn strategies(&self) -> Vec<StrategySpec> {
        match (&self.strategy, self.strategies.is_empty()) {
            (Some(s), _) => vec![s.clone()],
            (None, false) => self.strategies.clone(),
            (None, true) => vec![StrategySpec::Random],
        }
    }

    /// One simulation per strategy. Without explicit seeds, three seeds
    /// starting at `base_seed` are used.
    pub fn simulation_configs(&self, base_seed: u64) -> Vec<SimulationConfig> {
        let seeds = self
            .seeds
            .clone()
            .unwrap_or_else(|| (0..3).map(|i| base_seed.wrapping_add(i)).collect());
        self.strategies()
            .into_iter()
            .map(|strategy| SimulationConfig {
                batch_fraction: self.batch_fraction,
                strategy,
                metric: self.metric,
                saturation_threshold: self.saturation_threshold,
                seeds: seeds.clone(),
                max_iterations: self.max_iterations,
                scorer: self.scorer.clone(),
            })
            .collect()
    }
}
