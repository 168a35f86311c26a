//! Glossary file format.
//!
//! UTF-8 text, one record per line, fields separated by a single tab:
//!
//! ```text
//! source<TAB>target<TAB>term<TAB>translation
//! source<TAB>target
//! ```
//!
//! The two-field form declares a supported pair with no entries, so that
//! texts in that direction pass through unchanged instead of failing. Blank
//! lines and lines starting with `#` are ignored. Terms may contain spaces.

use std::fs;
use std::path::Path;

use polytutor_core::translation::{GlossaryBackend, GlossaryEntry, LanguageCode};

#[derive(Debug, thiserror::Error)]
pub enum GlossaryError {
    #[error("cannot read glossary {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("glossary line {line}: {message}")]
    Syntax { line: usize, message: String },
}

pub fn parse_glossary(text: &str) -> Result<GlossaryBackend, GlossaryError> {
    let mut pairs = Vec::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let code = |s: &str| {
            LanguageCode::new(s).map_err(|e| GlossaryError::Syntax {
                line,
                message: e.to_string(),
            })
        };
        match fields.as_slice() {
            [source, target] => pairs.push((code(source)?, code(target)?)),
            [source, target, term, translation] => {
                if term.trim().is_empty() {
                    return Err(GlossaryError::Syntax {
                        line,
                        message: "empty term".into(),
                    });
                }
                entries.push(GlossaryEntry {
                    source: code(source)?,
                    target: code(target)?,
                    term: term.to_string(),
                    translation: translation.to_string(),
                });
            }
            _ => {
                return Err(GlossaryError::Syntax {
                    line,
                    message: format!("expected 2 or 4 tab-separated fields, found {}", fields.len()),
                })
            }
        }
    }
    let mut backend = GlossaryBackend::new(entries);
    for (source, target) in pairs {
        backend.declare_pair(source, target);
    }
    Ok(backend)
}

pub fn load_glossary(path: &Path) -> Result<GlossaryBackend, GlossaryError> {
    let text = fs::read_to_string(path).map_err(|source| GlossaryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_glossary(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use polytutor_core::translation::{translate, TranslateError, TranslationRequest};

    fn req(source: &str, target: &str, text: &str) -> TranslationRequest {
        TranslationRequest {
            source: LanguageCode::new(source).unwrap(),
            target: LanguageCode::new(target).unwrap(),
            text: text.into(),
        }
    }

    #[test]
    fn parses_entries_pairs_and_comments() {
        let g = parse_glossary("# comment\n\nen\tfa\tbook\tکتاب\r\nen\tde\n").unwrap();
        assert_eq!(translate(&g, &req("en", "fa", "the book")).unwrap(), "the کتاب");
        assert_eq!(translate(&g, &req("en", "de", "the book")).unwrap(), "the book");
        assert!(matches!(
            translate(&g, &req("fa", "en", "کتاب")),
            Err(TranslateError::UnsupportedPair { .. })
        ));
    }

    #[test]
    fn reports_line_numbers() {
        match parse_glossary("en\tfa\tbook\tکتاب\nen fa book\n") {
            Err(GlossaryError::Syntax { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_glossary("EN\tfa\n") {
            Err(GlossaryError::Syntax { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
