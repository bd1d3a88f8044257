use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::findings::{registry, registry_lookup, SeverityWeights};
use crate::maintainability::MaintainabilityThresholds;
use crate::performance::PerformanceThresholds;
use crate::security::SecretHeuristics;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Syntax(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Everything that influences analysis output.
///
/// Loaded from TOML; every field is optional and falls back to the
/// built-in default. Rule selection: `enabled_rules` (when present) is the
/// allow-list, then `disabled_rules` is subtracted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerConfig {
    pub enabled_rules: Option<BTreeSet<String>>,
    pub disabled_rules: BTreeSet<String>,
    pub advisory_db_path: Option<PathBuf>,
    pub severity_weights: SeverityWeights,
    pub maintainability: MaintainabilityThresholds,
    pub performance: PerformanceThresholds,
    pub secrets: SecretHeuristics,
}

impl AnalyzerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        self.severity_weights.validate().map_err(invalid)?;
        self.maintainability.validate().map_err(invalid)?;
        self.performance.validate().map_err(invalid)?;
        self.secrets.validate().map_err(invalid)?;
        let named = self.enabled_rules.iter().flatten().chain(&self.disabled_rules);
        for rule in named {
            registry_lookup(rule).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// The effective rule set after allow- and deny-lists.
    pub fn active_rules(&self) -> BTreeSet<String> {
        let base: BTreeSet<String> = match &self.enabled_rules {
            Some(allow) => allow.clone(),
            None => registry().keys().map(|k| k.to_string()).collect(),
        };
        base.difference(&self.disabled_rules).cloned().collect()
    }

    /// Apply a JSON object of overrides on top of this config.
    ///
    /// Objects merge key by key; any other value replaces what was there.
    pub fn with_overrides(&self, overrides: &Value) -> Result<Self, ConfigError> {
        if !overrides.is_object() {
            return Err(ConfigError::Invalid("config overrides must be an object".into()));
        }
        let mut base = serde_json::to_value(self).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        merge_json(&mut base, overrides);
        let merged: Self = serde_json::from_value(base).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        merged.validate()?;
        Ok(merged)
    }
}

/// Deep-merge `patch` into `base`: objects merge key by key, anything else
/// replaces.
pub fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(AnalyzerConfig::from_toml_str("").unwrap(), AnalyzerConfig::default());
    }

    #[test]
    fn partial_tables_keep_other_defaults() {
        let c = AnalyzerConfig::from_toml_str("disabled_rules = [\"MAINT-NAMING\"]\n[severity_weights]\ncritical = 20.0\n[maintainability]\nmax_parameters = 7\n").unwrap();
        assert_eq!(c.severity_weights.critical, 20.0);
        assert_eq!(c.severity_weights.medium, 2.5);
        assert_eq!(c.maintainability.max_parameters, 7);
        assert_eq!(c.maintainability.cyclomatic_medium, 10);
        assert!(!c.active_rules().contains("MAINT-NAMING"));
        assert!(c.active_rules().contains("SEC-WEAK-HASH"));
    }

    #[test]
    fn rejects_unknown_rules_keys_and_bad_weights() {
        assert!(matches!(AnalyzerConfig::from_toml_str("enabled_rules = [\"NOPE\"]"), Err(ConfigError::Invalid(_))));
        assert!(matches!(AnalyzerConfig::from_toml_str("colour = 1"), Err(ConfigError::Syntax(_))));
        assert!(AnalyzerConfig::from_toml_str("[severity_weights]\nlow = 9.0").is_err());
    }

    #[test]
    fn json_overrides_merge() {
        let base = AnalyzerConfig::default();
        let c = base.with_overrides(&json!({"severity_weights": {"info": 0.0}, "enabled_rules": ["SEC-WEAK-HASH"]})).unwrap();
        assert_eq!(c.severity_weights.info, 0.0);
        assert_eq!(c.severity_weights.critical, 10.0);
        assert_eq!(c.active_rules().into_iter().collect::<Vec<_>>(), ["SEC-WEAK-HASH"]);
        assert!(base.with_overrides(&json!([1])).is_err());
        assert!(base.with_overrides(&json!({"performance": {"bogus": 1}})).is_err());
    }
}
