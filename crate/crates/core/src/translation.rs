//! Translation contract: language codes, requests, the backend trait, the
//! identity fast path and a deterministic glossary backend.
//!
//! Network backends and the shared cache live in the std crate; everything
//! here is pure.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Default maximum request length, in characters.
pub const DEFAULT_MAX_CHARS: usize = 10_000;

/// Lowercase two- or three-letter primary language subtag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid language code `{0}` (expected 2-3 lowercase ASCII letters)")]
pub struct InvalidLanguageCode(pub String);

impl LanguageCode {
    pub fn new(code: &str) -> Result<Self, InvalidLanguageCode> {
        let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
        if ok {
            Ok(LanguageCode(code.into()))
        } else {
            Err(InvalidLanguageCode(code.into()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = InvalidLanguageCode;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        LanguageCode::new(&value)
    }
}

impl From<LanguageCode> for String {
    fn from(code: LanguageCode) -> String {
        code.0
    }
}

impl core::str::FromStr for LanguageCode {
    type Err = InvalidLanguageCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageCode::new(s)
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Number of directed translation pairs between `n` distinct languages.
pub fn pair_count(languages: &BTreeSet<LanguageCode>) -> u64 {
    let n = languages.len() as u64;
    n * n.saturating_sub(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub source: LanguageCode,
    pub target: LanguageCode,
    pub text: String,
}

impl TranslationRequest {
    pub fn new(source: LanguageCode, target: LanguageCode, text: impl Into<String>) -> Result<Self, TranslateError> {
        Self::with_limit(source, target, text, DEFAULT_MAX_CHARS)
    }

    pub fn with_limit(
        source: LanguageCode,
        target: LanguageCode,
        text: impl Into<String>,
        max_chars: usize,
    ) -> Result<Self, TranslateError> {
        let text = text.into();
        let len = text.chars().count();
        if len > max_chars {
            return Err(TranslateError::TextTooLong { len, max: max_chars });
        }
        Ok(Self { source, target, text })
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("translation {from} -> {to} is not supported")]
    UnsupportedPair { from: LanguageCode, to: LanguageCode },
    #[error("translation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("text of {len} characters exceeds the limit of {max}")]
    TextTooLong { len: usize, max: usize },
    #[error("translation backend rejected the credentials")]
    AuthFailure,
}

impl TranslateError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TranslateError::BackendUnavailable(_))
    }
}

/// A translation backend. Implementations must error, never return text,
/// for pairs outside their capability.
pub trait Translator {
    fn supports(&self, source: &LanguageCode, target: &LanguageCode) -> bool;

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError>;
}

impl<T: Translator + ?Sized> Translator for &T {
    fn supports(&self, source: &LanguageCode, target: &LanguageCode) -> bool {
        (**self).supports(source, target)
    }

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        (**self).translate_text(request)
    }
}

impl<T: Translator + ?Sized> Translator for alloc::boxed::Box<T> {
    fn supports(&self, source: &LanguageCode, target: &LanguageCode) -> bool {
        (**self).supports(source, target)
    }

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        (**self).translate_text(request)
    }
}

impl<T: Translator + ?Sized> Translator for alloc::sync::Arc<T> {
    fn supports(&self, source: &LanguageCode, target: &LanguageCode) -> bool {
        (**self).supports(source, target)
    }

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        (**self).translate_text(request)
    }
}

/// Translate with the identity fast path: same-language requests never reach
/// the backend.
pub fn translate<T: Translator + ?Sized>(backend: &T, request: &TranslationRequest) -> Result<String, TranslateError> {
    if request.is_identity() {
        return Ok(request.text.clone());
    }
    if !backend.supports(&request.source, &request.target) {
        return Err(TranslateError::UnsupportedPair {
            from: request.source.clone(),
            to: request.target.clone(),
        });
    }
    backend.translate_text(request)
}

/// Backend that supports nothing; only same-language requests succeed
/// through [`translate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBackend;

impl Translator for IdentityBackend {
    fn supports(&self, source: &LanguageCode, target: &LanguageCode) -> bool {
        source == target
    }

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        if request.is_identity() {
            Ok(request.text.clone())
        } else {
            Err(TranslateError::UnsupportedPair {
                from: request.source.clone(),
                to: request.target.clone(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlossaryEntry {
    pub source: LanguageCode,
    pub target: LanguageCode,
    pub term: String,
    pub translation: String,
}

#[derive(Debug, Clone, Default)]
struct PairGlossary {
    // key: term words joined by a single space
    terms: BTreeMap<String, String>,
    longest: usize,
}

/// Term-substitution backend. Input is split on whitespace; runs of tokens
/// that exactly match a term are replaced, longest match first; everything
/// else, including the original whitespace, passes through.
#[derive(Debug, Clone, Default)]
pub struct GlossaryBackend {
    pairs: BTreeMap<(LanguageCode, LanguageCode), PairGlossary>,
}

impl GlossaryBackend {
    pub fn new(entries: impl IntoIterator<Item = GlossaryEntry>) -> Self {
        let mut backend = Self::default();
        for entry in entries {
            backend.insert(entry);
        }
        backend
    }

    /// Declare a pair as supported even if it has no terms.
    pub fn declare_pair(&mut self, source: LanguageCode, target: LanguageCode) {
        self.pairs.entry((source, target)).or_default();
    }

    pub fn insert(&mut self, entry: GlossaryEntry) {
        let words: Vec<&str> = entry.term.split_whitespace().collect();
        let pair = self.pairs.entry((entry.source, entry.target)).or_default();
        if words.is_empty() {
            return;
        }
        pair.longest = pair.longest.max(words.len());
        pair.terms.insert(words.join(" "), entry.translation);
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(LanguageCode, LanguageCode)> {
        self.pairs.keys()
    }

    /// Every language that appears on either side of a supported pair.
    pub fn languages(&self) -> BTreeSet<LanguageCode> {
        self.pairs.keys().flat_map(|(s, t)| [s.clone(), t.clone()]).collect()
    }
}

impl Translator for GlossaryBackend {
    fn supports(&self, source: &LanguageCode, target: &LanguageCode) -> bool {
        source == target || self.pairs.contains_key(&(source.clone(), target.clone()))
    }

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        if request.is_identity() {
            return Ok(request.text.clone());
        }
        let glossary = self
            .pairs
            .get(&(request.source.clone(), request.target.clone()))
            .ok_or_else(|| TranslateError::UnsupportedPair {
                from: request.source.clone(),
                to: request.target.clone(),
            })?;
        Ok(substitute(glossary, &request.text))
    }
}

fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

fn substitute(glossary: &PairGlossary, text: &str) -> String {
    let spans = token_spans(text);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    let mut i = 0;
    let mut key = String::new();
    while i < spans.len() {
        let max_len = glossary.longest.min(spans.len() - i);
        let mut matched = None;
        for len in (1..=max_len).rev() {
            key.clear();
            for (k, (s, e)) in spans[i..i + len].iter().enumerate() {
                if k > 0 {
                    key.push(' ');
                }
                key.push_str(&text[*s..*e]);
            }
            if let Some(translation) = glossary.terms.get(&key) {
                matched = Some((len, translation));
                break;
            }
        }
        match matched {
            Some((len, translation)) => {
                out.push_str(&text[cursor..spans[i].0]);
                out.push_str(translation);
                cursor = spans[i + len - 1].1;
                i += len;
            }
            None => i += 1,
        }
    }
    out.push_str(&text[cursor..]);
    out
}
