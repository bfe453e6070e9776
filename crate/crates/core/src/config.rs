//! Scenario files: one JSON document declaring the graph, agent model,
//! router, workload, cost weights, sampler, and evolution settings.
//!
//! The hash of the raw file bytes is embedded in every output so results can
//! be traced back to the exact configuration that produced them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::CostWeights;
use crate::error::{Error, Result};
use crate::evolution::{
    AlwaysAcceptJudge, AlwaysRejectJudge, EvaporationScope, EvolutionParams, QualityJudge, ThresholdJudge,
};
use crate::graph::GraphConfig;
use crate::pheromone::SamplerParams;
use crate::router::{IntentRouter, KeywordRouter, TableRouter, TaskSet, WeightVector};
use crate::sim::{AgentModel, StressConfig, WorkloadConfig};

/// Router declaration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RouterConfig {
    /// Exact query lookup with explicit target mixtures.
    Table {
        #[serde(default)]
        entries: BTreeMap<String, Vec<f64>>,
    },
    /// Keyword-count router.
    Keyword { keywords: BTreeMap<String, Vec<String>> },
}

/// Quality judge declaration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JudgeConfig {
    Threshold { threshold: f64 },
    AcceptAll,
    RejectAll,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig::Threshold { threshold: 0.5 }
    }
}

impl JudgeConfig {
    pub fn build(&self) -> Box<dyn QualityJudge> {
        match self {
            JudgeConfig::Threshold { threshold } => Box::new(ThresholdJudge { threshold: *threshold }),
            JudgeConfig::AcceptAll => Box::new(AlwaysAcceptJudge),
            JudgeConfig::RejectAll => Box::new(AlwaysRejectJudge),
        }
    }
}

/// Online evolution settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionConfig {
    #[serde(flatten)]
    pub params: EvolutionParams,
    #[serde(default = "default_sampling_rate")]
    pub sampling_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub online_evaporation: EvaporationScope,
    #[serde(default)]
    pub judge: JudgeConfig,
}

fn default_sampling_rate() -> f64 {
    0.1
}

fn default_batch_size() -> usize {
    32
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            params: EvolutionParams::default(),
            sampling_rate: default_sampling_rate(),
            batch_size: default_batch_size(),
            online_evaporation: EvaporationScope::default(),
            judge: JudgeConfig::default(),
        }
    }
}

/// Whole experiment scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub graph: GraphConfig,
    #[serde(default)]
    pub agents: AgentModel,
    pub router: RouterConfig,
    pub workload: WorkloadConfig,
    pub cost: CostWeights,
    #[serde(default)]
    pub sampler: SamplerParams,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub stress: Option<StressConfig>,
    #[serde(default = "default_warmup_iterations")]
    pub warmup_iterations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_warmup_iterations() -> usize {
    200
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.agents.validate()?;
        self.cost.validate()?;
        self.sampler.validate()?;
        self.evolution.params.validate()?;
        if !(0.0..=1.0).contains(&self.evolution.sampling_rate) {
            return Err(Error::Config(format!(
                "sampling_rate must be in [0, 1], got {}",
                self.evolution.sampling_rate
            )));
        }
        if self.evolution.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.warmup_iterations == 0 {
            return Err(Error::Config("warmup_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Builds the configured router over the graph's task set.
    pub fn build_router(&self) -> Result<Box<dyn IntentRouter>> {
        let tasks = TaskSet::new(self.graph.tasks.clone())?;
        match &self.router {
            RouterConfig::Table { entries } => {
                let mut rows = Vec::with_capacity(entries.len());
                for (query, weights) in entries {
                    rows.push((query.clone(), WeightVector::new(weights.clone())?));
                }
                Ok(Box::new(TableRouter::new(tasks, rows)?))
            }
            RouterConfig::Keyword { keywords } => Ok(Box::new(KeywordRouter::new(tasks, keywords.clone())?)),
        }
    }
}

/// SHA-256 hex digest of raw bytes.
pub fn hash_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Loads and validates a scenario, returning it with the file-byte hash.
pub fn load_scenario(path: &Path) -> Result<(ScenarioConfig, String)> {
    let bytes = fs::read(path)?;
    let config: ScenarioConfig =
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok((config, hash_bytes(&bytes)))
}
