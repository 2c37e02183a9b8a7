//! Server configuration file.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! base_model = "sv"
//! pool_size = 10000
//!
//! [models.sv]
//! path = "models/sv.posgram"
//!
//! [lexicon]
//! path = "data/wordfreq/sv_lexicon.txt"
//! exclusions = "data/sv_exclusions.txt"
//!
//! [store]
//! path = "sessions.jsonl"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::ServiceError;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_BASE_MODEL: &str = "sv";
pub const DEFAULT_POOL_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Model that generates candidates and gives the primary ranking.
    #[serde(default = "default_base_model")]
    pub base_model: String,
    /// Sampled candidates drawn per request for lengths 6 and up.
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default)]
    pub models: BTreeMap<String, ModelEntry>,
    pub lexicon: Option<LexiconEntry>,
    pub store: Option<StoreEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconEntry {
    pub path: PathBuf,
    pub exclusions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreEntry {
    /// Append-only JSON-lines file; sessions live in memory when absent.
    pub path: PathBuf,
}

fn default_bind() -> String {
    DEFAULT_BIND.to_string()
}

fn default_base_model() -> String {
    DEFAULT_BASE_MODEL.to_string()
}

fn default_pool_size() -> usize {
    DEFAULT_POOL_SIZE
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ServiceError> {
        let config: Config = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        if config.pool_size == 0 {
            return Err(ServiceError::Config("pool_size must be positive".into()));
        }
        Ok(config)
    }

    /// Reads `path` and resolves the paths inside it against its directory.
    pub fn load(path: &Path) -> Result<Config, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Config::parse(&text)?;
        config.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for entry in self.models.values_mut() {
            fix(&mut entry.path);
        }
        if let Some(lex) = &mut self.lexicon {
            fix(&mut lex.path);
            if let Some(ex) = &mut lex.exclusions {
                fix(ex);
            }
        }
        if let Some(store) = &mut self.store {
            fix(&mut store.path);
        }
    }
}
