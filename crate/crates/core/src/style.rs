//! Learning-style profiling.
//!
//! A questionnaire is a list of Likert items, each loading on one of the five
//! styles. Scoring sums the responses per scale (reverse-scored items count
//! `6 - r`) and picks the dominant style with a fixed tie-break order.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::text::LocalizedText;

/// The five learning styles. Declaration order is the tie-break order:
/// earlier variants win ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearningStyle {
    #[serde(rename = "SS")]
    SensationSeeking,
    #[serde(rename = "GOA")]
    GoalOrientedAchiever,
    #[serde(rename = "EIA")]
    EmotionallyIntelligentAchiever,
    #[serde(rename = "CA")]
    ConscientiousAchiever,
    #[serde(rename = "DLA")]
    DeepLearningAchiever,
}

impl LearningStyle {
    pub const ALL: [LearningStyle; 5] = [
        LearningStyle::SensationSeeking,
        LearningStyle::GoalOrientedAchiever,
        LearningStyle::EmotionallyIntelligentAchiever,
        LearningStyle::ConscientiousAchiever,
        LearningStyle::DeepLearningAchiever,
    ];

    /// Order in which lesson variants are tried when the exact style is
    /// missing: most to least structured.
    pub const FALLBACK_CHAIN: [LearningStyle; 5] = [
        LearningStyle::DeepLearningAchiever,
        LearningStyle::ConscientiousAchiever,
        LearningStyle::EmotionallyIntelligentAchiever,
        LearningStyle::GoalOrientedAchiever,
        LearningStyle::SensationSeeking,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            LearningStyle::SensationSeeking => "SS",
            LearningStyle::GoalOrientedAchiever => "GOA",
            LearningStyle::EmotionallyIntelligentAchiever => "EIA",
            LearningStyle::ConscientiousAchiever => "CA",
            LearningStyle::DeepLearningAchiever => "DLA",
        }
    }

    /// The style after `self` in the fallback chain, wrapping around.
    pub fn next_in_chain(self) -> LearningStyle {
        let pos = Self::FALLBACK_CHAIN.iter().position(|s| *s == self).unwrap_or(0);
        Self::FALLBACK_CHAIN[(pos + 1) % Self::FALLBACK_CHAIN.len()]
    }
}

impl fmt::Display for LearningStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown learning style code `{0}`")]
pub struct UnknownStyle(pub String);

impl FromStr for LearningStyle {
    type Err = UnknownStyle;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearningStyle::ALL
            .into_iter()
            .find(|style| style.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownStyle(s.into()))
    }
}

/// One questionnaire item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    pub item_id: String,
    pub prompt: LocalizedText,
    pub scale: LearningStyle,
    #[serde(default)]
    pub reverse_scored: bool,
}

/// Per-scale scores plus the dominant style they imply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StyleVector {
    scores: [u32; 5],
    dominant: LearningStyle,
}

impl StyleVector {
    pub fn from_scores(scores: [u32; 5]) -> Self {
        Self {
            scores,
            dominant: argmax(&scores),
        }
    }

    pub fn score(&self, style: LearningStyle) -> u32 {
        self.scores[style.index()]
    }

    pub fn scores(&self) -> [u32; 5] {
        self.scores
    }

    pub fn dominant(&self) -> LearningStyle {
        self.dominant
    }
}

fn argmax(scores: &[u32; 5]) -> LearningStyle {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    LearningStyle::ALL[best]
}

/// Dominant style of `v`: argmax of the five scores, earlier style wins ties.
pub fn dominant_style(v: &StyleVector) -> LearningStyle {
    argmax(&v.scores)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("no response for questionnaire item `{0}`")]
    MissingResponse(String),
    #[error("response for item `{0}` is not a Likert value in 1..=5")]
    InvalidLikert(String),
}

/// Score a questionnaire. Responses for ids not in `items` are ignored.
pub fn score_questionnaire(
    items: &[QuestionnaireItem],
    responses: &BTreeMap<String, u8>,
) -> Result<StyleVector, ProfileError> {
    let mut scores = [0u32; 5];
    for item in items {
        let r = *responses
            .get(&item.item_id)
            .ok_or_else(|| ProfileError::MissingResponse(item.item_id.clone()))?;
        if !(1..=5).contains(&r) {
            return Err(ProfileError::InvalidLikert(item.item_id.clone()));
        }
        let points = if item.reverse_scored { 6 - r } else { r };
        scores[item.scale.index()] += u32::from(points);
    }
    Ok(StyleVector::from_scores(scores))
}

// Serialized as {"scores": {"SS": n, ...}, "dominant": "SS"}. The dominant
// field is recomputed on input so a hand-edited log cannot desynchronize it.
impl Serialize for StyleVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            scores: &'a ScoreMap,
            dominant: LearningStyle,
        }
        Repr {
            scores: &ScoreMap(self.scores),
            dominant: self.dominant,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StyleVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            scores: ScoreMap,
            #[allow(dead_code)]
            dominant: Option<LearningStyle>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Ok(StyleVector::from_scores(repr.scores.0))
    }
}

struct ScoreMap([u32; 5]);

impl Serialize for ScoreMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(5))?;
        for style in LearningStyle::ALL {
            map.serialize_entry(style.code(), &self.0[style.index()])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ScoreMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScoreVisitor;

        impl<'de> Visitor<'de> for ScoreVisitor {
            type Value = ScoreMap;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map with a score for each of the five styles")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<ScoreMap, A::Error> {
                let mut scores: [Option<u32>; 5] = [None; 5];
                while let Some((style, score)) = access.next_entry::<LearningStyle, u32>()? {
                    if scores[style.index()].replace(score).is_some() {
                        return Err(de::Error::custom("duplicate style score"));
                    }
                }
                let mut out = [0u32; 5];
                for style in LearningStyle::ALL {
                    out[style.index()] =
                        scores[style.index()].ok_or_else(|| de::Error::custom("missing style score"))?;
                }
                Ok(ScoreMap(out))
            }
        }

        deserializer.deserialize_map(ScoreVisitor)
    }
}
