use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use lru::LruCache;
use polytutor_core::translation::{translate, LanguageCode, TranslateError, TranslationRequest, Translator};
use sha2::{Digest, Sha256};

pub const DEFAULT_CACHE_ENTRIES: usize = 10_000;

/// (source, target, SHA-256 of the text).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub source: LanguageCode,
    pub target: LanguageCode,
    pub digest: [u8; 32],
}

impl CacheKey {
    pub fn of(request: &TranslationRequest) -> Self {
        Self {
            source: request.source.clone(),
            target: request.target.clone(),
            digest: Sha256::digest(request.text.as_bytes()).into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

/// Bounded LRU map from request key to translated text. Errors are never
/// cached.
#[derive(Debug)]
pub struct TranslationCache {
    entries: Mutex<LruCache<CacheKey, String>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl TranslationCache {
    pub fn new(capacity: NonZeroUsize) -> Self {
        Self {
            entries: Mutex::new(LruCache::new(capacity)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        let found = self.lock().get(key).cloned();
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn put(&self, key: CacheKey, value: String) {
        self.lock().put(key, value);
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, LruCache<CacheKey, String>> {
        // a panic while holding the lock cannot leave the map half-updated
        self.entries.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

impl Default for TranslationCache {
    fn default() -> Self {
        Self::new(NonZeroUsize::new(DEFAULT_CACHE_ENTRIES).expect("nonzero"))
    }
}

/// [`translate`] through `cache`. Same-language requests skip both.
pub fn cached_translate<B: Translator + ?Sized>(
    cache: &TranslationCache,
    backend: &B,
    request: &TranslationRequest,
) -> Result<String, TranslateError> {
    if request.is_identity() {
        return Ok(request.text.clone());
    }
    let key = CacheKey::of(request);
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    let text = translate(backend, request)?;
    cache.put(key, text.clone());
    Ok(text)
}

/// A backend wrapped with its own cache.
#[derive(Debug)]
pub struct CachedTranslator<B> {
    backend: B,
    cache: TranslationCache,
}

impl<B: Translator> CachedTranslator<B> {
    pub fn new(backend: B, cache: TranslationCache) -> Self {
        Self { backend, cache }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }
}

impl<B: Translator> Translator for CachedTranslator<B> {
    fn supports(&self, source: &LanguageCode, target: &LanguageCode) -> bool {
        self.backend.supports(source, target)
    }

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        cached_translate(&self.cache, &self.backend, request)
    }
}
