//! The settings file, the scoring engine shared by the CLI and the HTTP
//! service, and the batch request/response schema.

pub mod cli;
pub mod service;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, ProblemRecord};
use crate::reward::{group_advantages, Correctness, FormatPolicy, RewardBreakdown, RewardWeights, RolloutScorer, TestExecutor, UnavailablePolicy};
use crate::runner::{PoolOptions, RunLimits, RunnerCommand, RunnerPool};
use crate::scoring::{merge_json, Analyzer, AnalyzerConfig, AnalyzerError, ConfigError, REPORT_SCHEMA_VERSION};

/// Version of the batch request/response schema.
pub const API_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSettings {
    pub weights: RewardWeights,
    pub format_policy: FormatPolicy,
    pub unavailable: UnavailablePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerSettings {
    /// Worker command line; the environment variable takes precedence.
    pub command: Option<String>,
    pub pool_size: usize,
    pub timeout_seconds: f64,
    pub memory_limit_mb: u32,
}

impl Default for RunnerSettings {
    fn default() -> Self {
        let limits = RunLimits::default();
        Self {
            command: None,
            pool_size: PoolOptions::default().size,
            timeout_seconds: limits.timeout_seconds,
            memory_limit_mb: limits.memory_limit_mb,
        }
    }
}

impl RunnerSettings {
    /// Environment overrides file: the command and pool size may come from
    /// `CODEQUAL_TESTRUNNER` and `CODEQUAL_TESTRUNNER_POOL`.
    pub fn resolve_command(&self) -> Option<RunnerCommand> {
        RunnerCommand::from_env().or_else(|| self.command.as_deref().and_then(RunnerCommand::parse))
    }

    pub fn pool_options(&self) -> PoolOptions {
        let env = PoolOptions::from_env();
        let size = if std::env::var(crate::runner::POOL_SIZE_ENV).is_ok() { env.size } else { self.pool_size.max(1) };
        PoolOptions {
            size,
            limits: RunLimits { timeout_seconds: self.timeout_seconds, memory_limit_mb: self.memory_limit_mb },
            ..env
        }
    }
}

/// The whole configuration file:
///
/// ```toml
/// [analyzer]
/// disabled_rules = ["MAINT-NAMING"]
/// [analyzer.severity_weights]
/// info = 0.5
/// [reward]
/// unavailable = "renormalize"
/// [runner]
/// pool_size = 4
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub analyzer: AnalyzerConfig,
    pub reward: RewardSettings,
    pub runner: RunnerSettings,
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let settings: Self = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        settings.validate()?;
        Ok(settings)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.analyzer.validate()?;
        self.reward.weights.validate().map_err(ConfigError::Invalid)?;
        let p = &self.reward.format_policy;
        if [p.single_complete, p.single_incomplete, p.multiple, p.none].iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ConfigError::Invalid("format rewards must lie in [0, 1]".into()));
        }
        if self.runner.timeout_seconds.is_nan() || self.runner.timeout_seconds <= 0.0 || self.runner.memory_limit_mb == 0 {
            return Err(ConfigError::Invalid("runner limits must be strictly positive".into()));
        }
        Ok(())
    }

    /// Request-level overrides of the `analyzer` and `reward` sections.
    pub fn with_overrides(&self, overrides: &Value) -> Result<Self, ConfigError> {
        let Some(object) = overrides.as_object() else {
            return Err(ConfigError::Invalid("config_overrides must be an object".into()));
        };
        if let Some(key) = object.keys().find(|k| !matches!(k.as_str(), "analyzer" | "reward")) {
            return Err(ConfigError::Invalid(format!("config_overrides may only contain `analyzer` and `reward`, not `{key}`")));
        }
        let mut base = serde_json::to_value(self).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        merge_json(&mut base, overrides);
        let merged: Self = serde_json::from_value(base).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        merged.validate()?;
        Ok(merged)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
}

/// Settings resolved into a ready-to-use scorer.
#[derive(Clone)]
pub struct Engine {
    settings: Settings,
    scorer: RolloutScorer,
    fingerprint: String,
}

impl Engine {
    pub fn new(settings: Settings, executor: Option<Arc<dyn TestExecutor>>) -> Result<Self, EngineError> {
        settings.validate()?;
        let analyzer = Analyzer::new(settings.analyzer.clone())?;
        let reward = serde_json::json!({
            "analyzer": analyzer.fingerprint(),
            "reward": settings.reward,
            "limits": [settings.runner.timeout_seconds, settings.runner.memory_limit_mb],
        });
        let digest = Sha256::digest(reward.to_string().as_bytes());
        let fingerprint = format!("sha256:{}", digest.iter().map(|b| format!("{b:02x}")).collect::<String>());
        let scorer = RolloutScorer {
            analyzer,
            weights: settings.reward.weights,
            format_policy: settings.reward.format_policy,
            executor,
            unavailable: settings.reward.unavailable,
        };
        Ok(Self { settings, scorer, fingerprint })
    }

    /// Engine plus a runner pool when one is configured.
    pub fn from_settings(settings: Settings) -> Result<Self, EngineError> {
        let executor = settings
            .runner
            .resolve_command()
            .map(|command| Arc::new(RunnerPool::new(command, settings.runner.pool_options())) as Arc<dyn TestExecutor>);
        Self::new(settings, executor)
    }

    /// A copy with request overrides applied; the runner pool is shared.
    pub fn with_overrides(&self, overrides: Option<&Value>) -> Result<Self, EngineError> {
        match overrides {
            None => Ok(self.clone()),
            Some(o) => Self::new(self.settings.with_overrides(o)?, self.scorer.executor.clone()),
        }
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.scorer.analyzer
    }

    pub fn scorer(&self) -> &RolloutScorer {
        &self.scorer
    }

    pub fn has_runner(&self) -> bool {
        self.scorer.executor.is_some()
    }

    /// Digest of the analyzer fingerprint plus reward settings and run limits.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn score(&self, completion: &str, problem: Option<&ProblemRecord>) -> RewardBreakdown {
        self.scorer.score(completion, problem)
    }

    /// Scores a validated batch; rollouts run in parallel, output keeps
    /// request order.
    pub fn score_batch(&self, request: &BatchScoreRequest, dataset: &Dataset) -> Result<BatchScoreResponse, BatchError> {
        request.validate()?;
        let mut inline = Dataset::default();
        for p in &request.problems {
            inline.insert(p.clone()).map_err(|id| BatchError::Invalid(format!("duplicate inline problem `{id}`")))?;
        }
        let lookup = |id: &str| inline.get(id).or_else(|| dataset.get(id));
        let results: Vec<RolloutResult> = request
            .rollouts
            .par_iter()
            .map(|r| {
                let started = Instant::now();
                let (breakdown, error) = match r.problem_id.as_deref() {
                    Some(id) => match lookup(id) {
                        Some(problem) => (Some(self.score(&r.completion, Some(problem))), None),
                        None => (None, Some(format!("unknown problem_id `{id}`"))),
                    },
                    None => (Some(self.score(&r.completion, None)), None),
                };
                RolloutResult {
                    rollout_id: r.rollout_id.clone(),
                    breakdown,
                    error,
                    elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
                }
            })
            .collect();
        let groups = request
            .groups
            .iter()
            .map(|g| {
                let members = &results[g.start..g.end];
                let scored: Vec<f64> = members.iter().filter_map(|m| m.breakdown.as_ref().map(|b| b.r_total)).collect();
                let mut advantages = group_advantages(&scored).into_iter();
                GroupResult {
                    start: g.start,
                    end: g.end,
                    advantages: members.iter().map(|m| m.breakdown.as_ref().and_then(|_| advantages.next())).collect(),
                }
            })
            .collect();
        Ok(BatchScoreResponse {
            schema_version: API_SCHEMA_VERSION,
            config_fingerprint: self.fingerprint.clone(),
            results,
            groups,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutInput {
    pub rollout_id: String,
    pub completion: String,
    #[serde(default)]
    pub problem_id: Option<String>,
}

/// Half-open index range `[start, end)` into the rollout list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBounds {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchScoreRequest {
    pub rollouts: Vec<RolloutInput>,
    #[serde(default)]
    pub groups: Vec<GroupBounds>,
    /// Problems supplied with the request; they shadow the served dataset.
    #[serde(default)]
    pub problems: Vec<ProblemRecord>,
    #[serde(default)]
    pub config_overrides: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BatchError {
    #[error("invalid batch: {0}")]
    Invalid(String),
}

impl BatchScoreRequest {
    /// Groups must be non-empty, in range, and pairwise disjoint.
    pub fn validate(&self) -> Result<(), BatchError> {
        let n = self.rollouts.len();
        let mut sorted = self.groups.clone();
        sorted.sort_by_key(|g| (g.start, g.end));
        for g in &sorted {
            if g.start >= g.end || g.end > n {
                return Err(BatchError::Invalid(format!("group [{}, {}) is empty or outside 0..{n}", g.start, g.end)));
            }
        }
        if let Some(pair) = sorted.windows(2).find(|p| p[1].start < p[0].end) {
            return Err(BatchError::Invalid(format!(
                "groups [{}, {}) and [{}, {}) overlap",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub rollout_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<RewardBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: f64,
}

impl RolloutResult {
    pub fn retryable(&self) -> bool {
        matches!(
            self.breakdown.as_ref().map(|b| &b.correctness),
            Some(Correctness::Unavailable { retryable: true, .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub start: usize,
    pub end: usize,
    /// One entry per member; `null` for rollouts that could not be scored,
    /// which are left out of the normalization.
    pub advantages: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchScoreResponse {
    pub schema_version: u32,
    pub config_fingerprint: String,
    pub results: Vec<RolloutResult>,
    pub groups: Vec<GroupResult>,
}

/// Version string reported by the CLI and the service.
pub fn version_info() -> Value {
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "report_schema": REPORT_SCHEMA_VERSION,
        "api_schema": API_SCHEMA_VERSION,
    })
}
