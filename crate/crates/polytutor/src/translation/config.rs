//! Backend selection from the environment.
//!
//! | variable              | meaning                                            |
//! |-----------------------|----------------------------------------------------|
//! | `TRANSLATOR_BACKEND`  | `identity`, `glossary` (default) or `remote`       |
//! | `GLOSSARY_PATH`       | glossary file; the built-in demo glossary if unset |
//! | `TRANSLATOR_ENDPOINT` | base URL, required for `remote`                    |
//! | `TRANSLATOR_API_KEY`  | bearer credential for `remote`, optional           |

use std::fmt;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use polytutor_core::translation::{IdentityBackend, Translator};

use super::cache::{CachedTranslator, TranslationCache, DEFAULT_CACHE_ENTRIES};
use super::remote::{RemoteBackend, RemoteConfig};
use crate::glossary::{load_glossary, GlossaryError};

pub const BACKEND_VAR: &str = "TRANSLATOR_BACKEND";
pub const ENDPOINT_VAR: &str = "TRANSLATOR_ENDPOINT";
pub const API_KEY_VAR: &str = "TRANSLATOR_API_KEY";
pub const GLOSSARY_VAR: &str = "GLOSSARY_PATH";

/// A backend usable from any thread.
pub type SharedTranslator = Arc<dyn Translator + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendKind {
    Identity,
    #[default]
    Glossary,
    Remote,
}

impl FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Self::Identity),
            "glossary" => Ok(Self::Glossary),
            "remote" => Ok(Self::Remote),
            other => Err(ConfigError::UnknownBackend(other.to_string())),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Glossary => "glossary",
            Self::Remote => "remote",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown translator backend `{0}` (expected identity, glossary or remote)")]
    UnknownBackend(String),
    #[error("{ENDPOINT_VAR} must be set for the remote backend")]
    MissingEndpoint,
    #[error(transparent)]
    Glossary(#[from] GlossaryError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslatorSettings {
    pub backend: BackendKind,
    pub glossary_path: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub cache_entries: NonZeroUsize,
}

impl Default for TranslatorSettings {
    fn default() -> Self {
        Self {
            backend: BackendKind::default(),
            glossary_path: None,
            endpoint: None,
            api_key: None,
            cache_entries: NonZeroUsize::new(DEFAULT_CACHE_ENTRIES).expect("nonzero"),
        }
    }
}

impl TranslatorSettings {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|name| std::env::var(name).ok())
    }

    /// Like [`from_env`](Self::from_env) with an explicit variable source.
    /// Empty values count as unset.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |name| lookup(name).filter(|v| !v.trim().is_empty());
        let backend = match get(BACKEND_VAR) {
            Some(v) => v.trim().parse()?,
            None => BackendKind::default(),
        };
        Ok(Self {
            backend,
            glossary_path: get(GLOSSARY_VAR).map(PathBuf::from),
            endpoint: get(ENDPOINT_VAR),
            api_key: get(API_KEY_VAR),
            ..Self::default()
        })
    }

    /// The configured backend behind a fresh cache.
    pub fn build(&self) -> Result<SharedTranslator, ConfigError> {
        let cache = || TranslationCache::new(self.cache_entries);
        Ok(match self.backend {
            BackendKind::Identity => Arc::new(IdentityBackend) as SharedTranslator,
            BackendKind::Glossary => {
                let glossary = match &self.glossary_path {
                    Some(path) => load_glossary(path)?,
                    None => crate::demo::demo_glossary()?,
                };
                Arc::new(CachedTranslator::new(glossary, cache()))
            }
            BackendKind::Remote => {
                let endpoint = self.endpoint.clone().ok_or(ConfigError::MissingEndpoint)?;
                let mut config = RemoteConfig::new(endpoint);
                config.api_key = self.api_key.clone();
                Arc::new(CachedTranslator::new(RemoteBackend::new(config), cache()))
            }
        })
    }
}
