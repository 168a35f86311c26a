//! Translation backends for the service: the response cache, a remote HTTP
//! client, a local stub server implementing the same contract, and
//! environment-driven backend selection.

pub mod cache;
pub mod config;
pub mod remote;
pub mod stub;

pub use cache::{cached_translate, CacheKey, CacheStats, CachedTranslator, TranslationCache};
pub use config::{BackendKind, ConfigError, SharedTranslator, TranslatorSettings};
pub use remote::{RemoteBackend, RemoteConfig};
