//! TOML configuration. Relative paths inside the file resolve against
//! the config file's own directory, so a config travels with its
//! fixtures.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use rsp_core::hunter::rate::RateLimitPolicy;
use rsp_core::hunter::HuntLimits;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub store: StoreSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub rate_limit: RateLimitSection,
    #[serde(default)]
    pub adapters: Vec<AdapterSection>,
    #[serde(default)]
    pub fetch: FetchSection,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub hunt: HuntSection,

    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    pub binary: Option<PathBuf>,
    /// Contact-segment classifier used by the hunt's keyword extraction.
    pub segment: Option<PathBuf>,
    pub contact_type: Option<PathBuf>,
    pub category: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLimitSection {
    pub tokens_per_interval: u32,
    pub interval_ms: u64,
    pub backoff_ms: u64,
}

impl Default for RateLimitSection {
    fn default() -> RateLimitSection {
        RateLimitSection {
            tokens_per_interval: 10,
            interval_ms: 1000,
            backoff_ms: 100,
        }
    }
}

impl RateLimitSection {
    pub fn policy(&self) -> RateLimitPolicy {
        RateLimitPolicy {
            tokens_per_interval: self.tokens_per_interval,
            interval: Duration::from_millis(self.interval_ms),
            backoff_on_limit: Duration::from_millis(self.backoff_ms),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterSection {
    pub id: String,
    /// MockDoc JSONL corpus backing this engine.
    pub corpus: PathBuf,
    #[serde(default = "default_true")]
    pub site_filter: bool,
    #[serde(default = "default_max_results")]
    pub max_results: usize,
}

fn default_true() -> bool {
    true
}

fn default_max_results() -> usize {
    10
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchSection {
    /// "scenario" (default) or "http".
    #[serde(default)]
    pub backend: Option<String>,
    pub scenario: Option<PathBuf>,
    pub proxy: Option<String>,
    pub vantage: Option<String>,
    #[serde(default)]
    pub vantages: Vec<String>,
    pub hop_cap: Option<usize>,
    #[serde(default)]
    pub block_patterns: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    /// Account fixture JSON for the mock messaging transport.
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HuntSection {
    pub max_rounds: u32,
    pub max_queries: usize,
}

impl Default for HuntSection {
    fn default() -> HuntSection {
        let limits = HuntLimits::default();
        HuntSection {
            max_rounds: limits.max_rounds,
            max_queries: limits.max_queries,
        }
    }
}

impl HuntSection {
    pub fn limits(&self) -> HuntLimits {
        HuntLimits {
            max_rounds: self.max_rounds,
            max_queries: self.max_queries,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read config `{}`: {e}", path.display())))?;
        let mut config: Config = toml::from_str(&text)
            .map_err(|e| CliError(format!("bad config `{}`: {e}", path.display())))?;
        config.base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(config)
    }

    /// Resolves a config-relative path against the config's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}
