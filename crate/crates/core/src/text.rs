//! Authorable text that may carry several language versions.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::translation::LanguageCode;

/// Either a plain string in the pack's default language or an explicit
/// per-language map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LocalizedText {
    Plain(String),
    Multi(BTreeMap<LanguageCode, String>),
}

impl LocalizedText {
    pub fn plain(text: impl Into<String>) -> Self {
        LocalizedText::Plain(text.into())
    }

    /// Panics if `lang` is not a valid language code.
    pub fn single(lang: &str, text: impl Into<String>) -> Self {
        let mut map = BTreeMap::new();
        map.insert(LanguageCode::new(lang).expect("valid language code"), text.into());
        LocalizedText::Multi(map)
    }

    pub fn is_empty(&self) -> bool {
        match self {
            LocalizedText::Plain(_) => false,
            LocalizedText::Multi(map) => map.is_empty(),
        }
    }

    /// Pick the version to show a reader of `target`: an authored version in
    /// `target` if any, else the default-language version, else the first
    /// authored one. Returns the language the text is written in.
    pub fn resolve<'a>(&'a self, target: &LanguageCode, default: &LanguageCode) -> Option<(LanguageCode, &'a str)> {
        match self {
            LocalizedText::Plain(s) => Some((default.clone(), s.as_str())),
            LocalizedText::Multi(map) => map
                .get_key_value(target)
                .or_else(|| map.get_key_value(default))
                .or_else(|| map.iter().next())
                .map(|(lang, s)| (lang.clone(), s.as_str())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_prefers_target_then_default() {
        let en = LanguageCode::new("en").unwrap();
        let fa = LanguageCode::new("fa").unwrap();
        let es = LanguageCode::new("es").unwrap();
        let mut map = BTreeMap::new();
        map.insert(en.clone(), String::from("book"));
        map.insert(fa.clone(), String::from("کتاب"));
        let text = LocalizedText::Multi(map);
        assert_eq!(text.resolve(&fa, &en), Some((fa.clone(), "کتاب")));
        assert_eq!(text.resolve(&es, &en), Some((en.clone(), "book")));
        assert_eq!(text.resolve(&es, &es), Some((en.clone(), "book")));
        assert_eq!(LocalizedText::plain("x").resolve(&fa, &en), Some((en, "x")));
        assert!(LocalizedText::Multi(BTreeMap::new()).resolve(&fa, &es).is_none());
    }

    #[test]
    fn deserializes_plain_or_map() {
        let t: LocalizedText = serde_json::from_str(r#""hello""#).unwrap();
        assert_eq!(t, LocalizedText::plain("hello"));
        let t: LocalizedText = serde_json::from_str(r#"{"en":"hi","fa":"سلام"}"#).unwrap();
        assert!(matches!(t, LocalizedText::Multi(ref m) if m.len() == 2));
    }
}
