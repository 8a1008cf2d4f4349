//! Application settings: defaults, then the TOML file, then environment
//! variables, then command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sentaug::augment::FailurePolicy;
use sentaug::llm::RetryPolicy;
use sentaug::train::TrainerConfig;

pub const CONFIG_ENV: &str = "SENTAUG_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub backend: BackendChoice,
    pub base_url: String,
    pub model_id: String,
    pub timeout_secs: u64,
    /// Minimum spacing between requests from one worker thread.
    pub min_interval_ms: u64,
    pub cache_dir: Option<PathBuf>,
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub failure_policy: FailurePolicy,
    pub max_failure_rate: f64,
    pub trainer: TrainerConfig,
    pub out_dir: PathBuf,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            backend: BackendChoice::Mock,
            base_url: "https://api.openai.com/v1".into(),
            model_id: "gpt-3.5-turbo".into(),
            timeout_secs: 60,
            min_interval_ms: 0,
            cache_dir: None,
            parallelism: 0,
            retry: RetryPolicy::default(),
            failure_policy: FailurePolicy::Strict,
            max_failure_rate: 0.0,
            trainer: TrainerConfig::reference(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).context("config file is not valid TOML")?;
        if table.keys().any(|k| k.contains("api_key") || k.contains("token")) {
            bail!("the API key is read only from the SENTAUG_API_KEY environment variable, not from the config file");
        }
        Ok(toml::from_str(text)?)
    }

    /// Defaults, overlaid with `file` (or `$SENTAUG_CONFIG`) and then the
    /// `SENTAUG_*` environment variables.
    pub fn load(file: Option<&Path>) -> Result<Self> {
        let path = file
            .map(Path::to_path_buf)
            .or_else(|| env(CONFIG_ENV).map(PathBuf::from));
        let mut cfg = match &path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => AppConfig::default(),
        };
        cfg.apply_env()?;
        Ok(cfg)
    }

    fn apply_env(&mut self) -> Result<()> {
        if let Some(v) = env("SENTAUG_BACKEND") {
            self.backend = BackendChoice::from_str(&v, true)
                .map_err(|_| anyhow::anyhow!("SENTAUG_BACKEND must be http or mock, got {v:?}"))?;
        }
        if let Some(v) = env("SENTAUG_BASE_URL") {
            self.base_url = v;
        }
        if let Some(v) = env("SENTAUG_MODEL") {
            self.model_id = v;
        }
        if let Some(v) = env("SENTAUG_CACHE_DIR") {
            self.cache_dir = Some(v.into());
        }
        if let Some(v) = env("SENTAUG_PARALLELISM") {
            self.parallelism = v.parse().context("SENTAUG_PARALLELISM")?;
        }
        if let Some(v) = env("SENTAUG_OUT") {
            self.out_dir = v.into();
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<()> {
        self.retry.validate()?;
        self.trainer.validate()?;
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            bail!("max_failure_rate must be within [0, 1]");
        }
        if self.model_id.trim().is_empty() {
            bail!("model_id must not be empty");
        }
        Ok(())
    }
}
