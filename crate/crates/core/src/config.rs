//! Runtime settings: defaults, an optional TOML file, then environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::html::DEFAULT_MIN_PARAGRAPH_CHARS;
use crate::textseg::{Lexicon, BUNDLED_ABBREVIATIONS, BUNDLED_STOPWORDS};

pub const DEFAULT_ENDPOINT: &str = "https://en.wikipedia.org/w/api.php";
pub const DEFAULT_CACHE_TTL_SECS: u64 = 7 * 24 * 60 * 60;
pub const DEFAULT_FETCH_TIMEOUT_SECS: u64 = 30;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}: cannot parse `{value}`")]
    Env { name: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub endpoint: String,
    pub offline: bool,
    pub offline_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub cache_ttl_secs: u64,
    pub min_paragraph_chars: usize,
    pub fetch_timeout_secs: u64,
    pub stopwords: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            offline: false,
            offline_dir: None,
            cache_dir: None,
            cache_ttl_secs: DEFAULT_CACHE_TTL_SECS,
            min_paragraph_chars: DEFAULT_MIN_PARAGRAPH_CHARS,
            fetch_timeout_secs: DEFAULT_FETCH_TIMEOUT_SECS,
            stopwords: None,
            abbreviations: None,
        }
    }
}

impl Settings {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Defaults or `path`, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        base.with_env(|k| std::env::var(k).ok())
    }

    /// Applies `EVOBASE_*` overrides looked up through `var`.
    pub fn with_env(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parse<T: std::str::FromStr>(name: &'static str, value: String) -> Result<T, ConfigError> {
            value.trim().parse().map_err(|_| ConfigError::Env { name, value })
        }
        if let Some(v) = var("EVOBASE_ENDPOINT") {
            self.endpoint = v;
        }
        if let Some(v) = var("EVOBASE_OFFLINE") {
            self.offline = match v.trim().to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => true,
                "0" | "false" | "no" | "off" | "" => false,
                _ => return Err(ConfigError::Env { name: "EVOBASE_OFFLINE", value: v }),
            };
        }
        if let Some(v) = var("EVOBASE_OFFLINE_DIR") {
            self.offline_dir = Some(v.into());
        }
        if let Some(v) = var("EVOBASE_CACHE_DIR") {
            self.cache_dir = Some(v.into());
        }
        if let Some(v) = var("EVOBASE_CACHE_TTL_SECS") {
            self.cache_ttl_secs = parse("EVOBASE_CACHE_TTL_SECS", v)?;
        }
        if let Some(v) = var("EVOBASE_MIN_PARAGRAPH_CHARS") {
            self.min_paragraph_chars = parse("EVOBASE_MIN_PARAGRAPH_CHARS", v)?;
        }
        if let Some(v) = var("EVOBASE_FETCH_TIMEOUT_SECS") {
            self.fetch_timeout_secs = parse("EVOBASE_FETCH_TIMEOUT_SECS", v)?;
        }
        if let Some(v) = var("EVOBASE_STOPWORDS") {
            self.stopwords = Some(v.into());
        }
        if let Some(v) = var("EVOBASE_ABBREVIATIONS") {
            self.abbreviations = Some(v.into());
        }
        Ok(self)
    }

    /// The bundled lexicon unless either list is overridden.
    pub fn lexicon(&self) -> std::io::Result<Lexicon> {
        let read = |p: &Option<PathBuf>, bundled: &str| -> std::io::Result<String> {
            match p {
                Some(p) => std::fs::read_to_string(p),
                None => Ok(bundled.to_string()),
            }
        };
        Ok(Lexicon::from_lists(
            &read(&self.stopwords, BUNDLED_STOPWORDS)?,
            &read(&self.abbreviations, BUNDLED_ABBREVIATIONS)?,
        ))
    }
}
