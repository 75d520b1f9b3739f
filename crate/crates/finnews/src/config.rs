//! TOML configuration shared by `serve` and the store-facing subcommands.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! store = "data"
//! checkpoint = "model.ffck"
//! cors_allowlist = ["http://localhost:5173"]
//!
//! [search]
//! w_hashtag = 2.0
//! w_content = 1.0
//!
//! [clusterer]
//! tau = 0.3
//! k_hashtags = 5
//!
//! [translator]
//! mode = "glossary-stub"
//! glossary_path = "glossary.tsv"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use finnews_core::{ClustererConfig, SearchWeights};
use serde::Deserialize;

use crate::corpus::TranslatorConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub store: PathBuf,
    /// Without a checkpoint the fact-check endpoint answers 503.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Origins allowed to make cross-origin requests; empty denies all.
    #[serde(default)]
    pub cors_allowlist: Vec<String>,
    #[serde(default)]
    pub search: SearchWeights,
    /// Overrides the settings saved in the store by `cluster`.
    #[serde(default)]
    pub clusterer: Option<ClustererConfig>,
    /// Defaults to the glossary stub with an empty glossary.
    #[serde(default)]
    pub translator: Option<TranslatorConfig>,
}

impl ServerConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ServerConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: base.to_path_buf(), source: Box::new(e) })?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file and applies environment overrides for secrets.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.to_path_buf(), source },
            other => other,
        })?;
        cfg.translator = cfg.translator.map(TranslatorConfig::with_env_overrides);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.store);
        if let Some(c) = self.checkpoint.as_mut() {
            join(c);
        }
        if let Some(t) = self.translator.as_mut() {
            if let Some(g) = t.glossary_path.as_mut() {
                join(g);
            }
            join(&mut t.cache_path);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.bind.port() == 0 {
            return Err(ConfigError::Invalid("bind port must be in 1-65535".into()));
        }
        self.search.validate().map_err(|e| ConfigError::Invalid(format!("search: {e}")))?;
        if let Some(c) = &self.clusterer {
            c.validate().map_err(|e| ConfigError::Invalid(format!("clusterer: {e}")))?;
        }
        if let Some(t) = &self.translator {
            t.validate().map_err(|e| ConfigError::Invalid(format!("translator: {e}")))?;
        }
        for origin in &self.cors_allowlist {
            if !(origin.starts_with("http://") || origin.starts_with("https://")) {
                return Err(ConfigError::Invalid(format!("cors origin {origin:?} must start with http:// or https://")));
            }
        }
        Ok(())
    }
}
