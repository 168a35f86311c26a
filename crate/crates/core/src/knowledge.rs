//! The knowledge base: concepts, per-style lesson variants, question banks and
//! the profiling questionnaire, validated as one immutable content pack.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::assessment::Level;
use crate::rules::Rule;
use crate::style::{LearningStyle, QuestionnaireItem};
use crate::text::LocalizedText;
use crate::translation::LanguageCode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_id: String,
    pub title: LocalizedText,
    pub sections: Vec<String>,
    #[serde(default)]
    pub prerequisites: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentBlock {
    pub lang: LanguageCode,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LessonVariant {
    pub concept_id: String,
    pub style: LearningStyle,
    pub blocks: Vec<ContentBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalKind {
    Conceptual,
    Objective,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub concept_id: String,
    pub section_id: String,
    pub level: Level,
    pub score_weight: u32,
    pub eval_kind: EvalKind,
    pub stem: LocalizedText,
    pub choices: Vec<LocalizedText>,
    pub correct_index: usize,
}

/// Unvalidated pack contents as read from disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PackParts {
    pub pack_id: String,
    pub version: String,
    pub default_language: Option<LanguageCode>,
    pub concepts: Vec<Concept>,
    pub variants: Vec<LessonVariant>,
    pub questions: Vec<Question>,
    pub questionnaire: Vec<QuestionnaireItem>,
    pub rules: Option<Vec<Rule>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackError {
    #[error("pack manifest is missing")]
    MissingManifest,
    #[error("{entity} references unknown id `{id}`")]
    DanglingReference { entity: String, id: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("cyclic prerequisites: {}", CyclePath(.0))]
    CyclicPrerequisites(Vec<String>),
    #[error("invalid {entity} `{id}`: {reason}")]
    Invalid { entity: String, id: String, reason: String },
}

struct CyclePath<'a>(&'a [String]);

impl fmt::Display for CyclePath<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" -> ")?;
            }
            f.write_str(id)?;
        }
        Ok(())
    }
}

impl PackError {
    pub fn kind(&self) -> &'static str {
        match self {
            PackError::MissingManifest => "MissingManifest",
            PackError::DanglingReference { .. } => "DanglingReference",
            PackError::DuplicateId(_) => "DuplicateId",
            PackError::CyclicPrerequisites(_) => "CyclicPrerequisites",
            PackError::Invalid { .. } => "Invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KnowledgeError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("concept `{0}` has no lesson variants")]
    NoVariant(String),
}

/// A validated, immutable content pack. Every collection is sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentPack {
    pack_id: String,
    version: String,
    default_language: LanguageCode,
    concepts: Vec<Concept>,
    variants: Vec<LessonVariant>,
    banks: BTreeMap<String, Vec<Question>>,
    questionnaire: Vec<QuestionnaireItem>,
    rules: Option<Vec<Rule>>,
    course_order: Vec<String>,
}

impl ContentPack {
    /// Validate `parts`, all-or-nothing. Returns the first problem found; use
    /// [`check_parts`] for the full list.
    pub fn from_parts(parts: PackParts) -> Result<Self, PackError> {
        if let Some(err) = check_parts(&parts).into_iter().next() {
            return Err(err);
        }
        let PackParts {
            pack_id,
            version,
            default_language,
            mut concepts,
            mut variants,
            questions,
            mut questionnaire,
            rules,
        } = parts;
        concepts.sort_by(|a, b| a.concept_id.cmp(&b.concept_id));
        variants.sort_by(|a, b| (&a.concept_id, a.style).cmp(&(&b.concept_id, b.style)));
        questionnaire.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        let mut banks: BTreeMap<String, Vec<Question>> =
            concepts.iter().map(|c| (c.concept_id.clone(), Vec::new())).collect();
        for q in questions {
            banks.entry(q.concept_id.clone()).or_default().push(q);
        }
        for bank in banks.values_mut() {
            bank.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        }
        let course_order = topological_order(&concepts);
        Ok(Self {
            pack_id,
            version,
            default_language: default_language.ok_or(PackError::MissingManifest)?,
            concepts,
            variants,
            banks,
            questionnaire,
            rules,
            course_order,
        })
    }

    pub fn pack_id(&self) -> &str {
        &self.pack_id
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn default_language(&self) -> &LanguageCode {
        &self.default_language
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept(&self, concept_id: &str) -> Option<&Concept> {
        self.concepts
            .binary_search_by(|c| c.concept_id.as_str().cmp(concept_id))
            .ok()
            .map(|i| &self.concepts[i])
    }

    pub fn variants(&self) -> &[LessonVariant] {
        &self.variants
    }

    pub fn variants_of<'a>(&'a self, concept_id: &'a str) -> impl Iterator<Item = &'a LessonVariant> + 'a {
        self.variants.iter().filter(move |v| v.concept_id == concept_id)
    }

    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.banks.values().flatten()
    }

    pub fn questionnaire(&self) -> &[QuestionnaireItem] {
        &self.questionnaire
    }

    /// Rule set shipped with the pack, if any.
    pub fn rules(&self) -> Option<&[Rule]> {
        self.rules.as_deref()
    }

    /// Concepts in prerequisite order; among concepts whose prerequisites
    /// are all placed, the smallest id comes first.
    pub fn course_order(&self) -> &[String] {
        &self.course_order
    }

    pub fn variant_for(&self, concept_id: &str, style: LearningStyle) -> Result<&LessonVariant, KnowledgeError> {
        variant_for(self, concept_id, style)
    }

    pub fn bank_for(&self, concept_id: &str) -> Result<&[Question], KnowledgeError> {
        bank_for(self, concept_id)
    }
}

/// The lesson variant for `style`, falling back along
/// DLA -> CA -> EIA -> GOA -> SS when the exact style is missing.
pub fn variant_for<'a>(
    pack: &'a ContentPack,
    concept_id: &str,
    style: LearningStyle,
) -> Result<&'a LessonVariant, KnowledgeError> {
    if pack.concept(concept_id).is_none() {
        return Err(KnowledgeError::UnknownConcept(concept_id.into()));
    }
    let find = |s: LearningStyle| {
        pack.variants
            .binary_search_by(|v| (v.concept_id.as_str(), v.style).cmp(&(concept_id, s)))
            .ok()
            .map(|i| &pack.variants[i])
    };
    find(style)
        .or_else(|| LearningStyle::FALLBACK_CHAIN.into_iter().find_map(find))
        .ok_or_else(|| KnowledgeError::NoVariant(concept_id.into()))
}

/// All questions for `concept_id`, sorted by question id.
pub fn bank_for<'a>(pack: &'a ContentPack, concept_id: &str) -> Result<&'a [Question], KnowledgeError> {
    pack.banks
        .get(concept_id)
        .map(Vec::as_slice)
        .ok_or_else(|| KnowledgeError::UnknownConcept(concept_id.into()))
}

fn invalid(entity: &str, id: &str, reason: impl Into<String>) -> PackError {
    PackError::Invalid {
        entity: entity.into(),
        id: id.into(),
        reason: reason.into(),
    }
}

fn dangling(entity: &str, id: &str) -> PackError {
    PackError::DanglingReference {
        entity: entity.into(),
        id: id.into(),
    }
}

/// Every validation problem in `parts`, in a stable order.
pub fn check_parts(parts: &PackParts) -> Vec<PackError> {
    let mut errors = Vec::new();
    if parts.default_language.is_none() {
        errors.push(PackError::MissingManifest);
    }
    if parts.pack_id.trim().is_empty() {
        errors.push(invalid("manifest", "", "pack_id is empty"));
    }

    let mut concept_sections: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for c in &parts.concepts {
        if c.concept_id.is_empty() {
            errors.push(invalid("concept", "", "empty concept_id"));
        }
        if concept_sections.contains_key(c.concept_id.as_str()) {
            errors.push(PackError::DuplicateId(c.concept_id.clone()));
            continue;
        }
        if c.title.is_empty() {
            errors.push(invalid("concept", &c.concept_id, "title has no text"));
        }
        if c.sections.is_empty() {
            errors.push(invalid("concept", &c.concept_id, "no sections"));
        }
        let mut sections = BTreeSet::new();
        for s in &c.sections {
            if !sections.insert(s.as_str()) {
                errors.push(PackError::DuplicateId(format!("{}/{}", c.concept_id, s)));
            }
        }
        concept_sections.insert(&c.concept_id, sections);
    }
    for c in &parts.concepts {
        for p in &c.prerequisites {
            if !concept_sections.contains_key(p.as_str()) {
                errors.push(dangling("prerequisite", p));
            }
        }
    }
    if let Some(cycle) = find_cycle(&parts.concepts) {
        errors.push(PackError::CyclicPrerequisites(cycle));
    }

    let mut variant_keys = BTreeSet::new();
    for v in &parts.variants {
        let key = format!("{}.{}", v.concept_id, v.style);
        if !concept_sections.contains_key(v.concept_id.as_str()) {
            errors.push(dangling("lesson variant", &v.concept_id));
        }
        if !variant_keys.insert(key.clone()) {
            errors.push(PackError::DuplicateId(key.clone()));
        }
        if v.blocks.is_empty() {
            errors.push(invalid("lesson variant", &key, "no content blocks"));
        }
    }

    let mut question_ids = BTreeSet::new();
    for q in &parts.questions {
        let id = q.question_id.as_str();
        if !question_ids.insert(id) {
            errors.push(PackError::DuplicateId(q.question_id.clone()));
        }
        match concept_sections.get(q.concept_id.as_str()) {
            None => errors.push(dangling("question concept", &q.concept_id)),
            Some(sections) if !sections.contains(q.section_id.as_str()) => {
                errors.push(dangling("question section", &q.section_id))
            }
            Some(_) => {}
        }
        if q.score_weight == 0 {
            errors.push(invalid("question", id, "score_weight must be at least 1"));
        }
        if q.choices.len() < 2 {
            errors.push(invalid("question", id, "needs at least two choices"));
        }
        if q.correct_index >= q.choices.len() {
            errors.push(invalid("question", id, "correct_index out of range"));
        }
        if q.stem.is_empty() || q.choices.iter().any(LocalizedText::is_empty) {
            errors.push(invalid("question", id, "empty text"));
        }
    }

    let mut item_ids = BTreeSet::new();
    for item in &parts.questionnaire {
        if !item_ids.insert(item.item_id.as_str()) {
            errors.push(PackError::DuplicateId(item.item_id.clone()));
        }
    }
    errors
}

/// First prerequisite cycle found by a depth-first walk in id order, as the
/// path `a -> b -> ... -> a`.
fn find_cycle(concepts: &[Concept]) -> Option<Vec<String>> {
    let graph: BTreeMap<&str, Vec<&str>> = concepts
        .iter()
        .map(|c| {
            let mut prereqs: Vec<&str> = c.prerequisites.iter().map(String::as_str).collect();
            prereqs.sort_unstable();
            (c.concept_id.as_str(), prereqs)
        })
        .collect();

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();

    fn visit<'a>(
        node: &'a str,
        graph: &BTreeMap<&'a str, Vec<&'a str>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        marks.insert(node, Mark::Active);
        stack.push(node);
        for &next in graph.get(node).into_iter().flatten() {
            if !graph.contains_key(next) {
                continue;
            }
            match marks.get(next) {
                Some(Mark::Active) => {
                    let start = stack.iter().position(|n| *n == next).unwrap_or(0);
                    let mut path: Vec<String> = stack[start..].iter().map(|s| String::from(*s)).collect();
                    path.push(next.into());
                    return Some(path);
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(path) = visit(next, graph, marks, stack) {
                        return Some(path);
                    }
                }
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
        None
    }

    let mut stack = Vec::new();
    for &node in graph.keys() {
        if !marks.contains_key(node) {
            if let Some(path) = visit(node, &graph, &mut marks, &mut stack) {
                return Some(path);
            }
        }
    }
    None
}

fn topological_order(concepts: &[Concept]) -> Vec<String> {
    let mut placed: BTreeSet<&str> = BTreeSet::new();
    let mut order = Vec::with_capacity(concepts.len());
    while order.len() < concepts.len() {
        // concepts are sorted by id, so the first ready one is the smallest
        let next = concepts.iter().find(|c| {
            !placed.contains(c.concept_id.as_str()) && c.prerequisites.iter().all(|p| placed.contains(p.as_str()))
        });
        match next {
            Some(c) => {
                placed.insert(&c.concept_id);
                order.push(c.concept_id.clone());
            }
            None => break,
        }
    }
    order
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;

    pub fn lang(s: &str) -> LanguageCode {
        LanguageCode::new(s).unwrap()
    }

    pub fn concept(id: &str, sections: &[&str], prereqs: &[&str]) -> Concept {
        Concept {
            concept_id: id.into(),
            title: LocalizedText::plain(id),
            sections: sections.iter().map(|s| String::from(*s)).collect(),
            prerequisites: prereqs.iter().map(|s| String::from(*s)).collect(),
        }
    }

    pub fn variant(concept: &str, style: LearningStyle) -> LessonVariant {
        LessonVariant {
            concept_id: concept.into(),
            style,
            blocks: vec![ContentBlock {
                lang: lang("en"),
                text: format!("{concept} for {style}"),
            }],
        }
    }

    pub fn question(id: &str, concept: &str, section: &str, level: Level, weight: u32, kind: EvalKind) -> Question {
        Question {
            question_id: id.into(),
            concept_id: concept.into(),
            section_id: section.into(),
            level,
            score_weight: weight,
            eval_kind: kind,
            stem: LocalizedText::plain(format!("stem of {id}")),
            choices: vec![LocalizedText::plain("yes"), LocalizedText::plain("no")],
            correct_index: 0,
        }
    }

    pub fn minimal_parts() -> PackParts {
        PackParts {
            pack_id: "mini".into(),
            version: "1".into(),
            default_language: Some(lang("en")),
            concepts: vec![concept("c1", &["s1"], &[])],
            variants: vec![variant("c1", LearningStyle::SensationSeeking)],
            questions: vec![
                question("q1", "c1", "s1", Level::Good, 1, EvalKind::Conceptual),
                question("q2", "c1", "s1", Level::Good, 1, EvalKind::Objective),
            ],
            questionnaire: Vec::new(),
            rules: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use LearningStyle::*;

    #[test]
    fn minimal_pack_loads() {
        let pack = ContentPack::from_parts(minimal_parts()).unwrap();
        assert_eq!(pack.concepts().len(), 1);
        assert_eq!(pack.bank_for("c1").unwrap().len(), 2);
        assert_eq!(pack.course_order(), ["c1"]);
    }

    #[test]
    fn dangling_section_rejected() {
        let mut parts = minimal_parts();
        parts.questions[0].section_id = "s9".into();
        assert_eq!(
            ContentPack::from_parts(parts),
            Err(PackError::DanglingReference {
                entity: "question section".into(),
                id: "s9".into()
            })
        );
    }

    #[test]
    fn prerequisite_cycle_rejected() {
        let mut parts = minimal_parts();
        parts.concepts = vec![
            concept("A", &["s"], &["B"]),
            concept("B", &["s"], &["C"]),
            concept("C", &["s"], &["A"]),
        ];
        parts.variants.clear();
        parts.questions.clear();
        let err = ContentPack::from_parts(parts).unwrap_err();
        assert_eq!(
            err,
            PackError::CyclicPrerequisites(vec!["A".into(), "B".into(), "C".into(), "A".into()])
        );
        assert_eq!(
            alloc::string::ToString::to_string(&err),
            "cyclic prerequisites: A -> B -> C -> A"
        );
    }

    #[test]
    fn self_prerequisite_is_a_cycle() {
        let mut parts = minimal_parts();
        parts.concepts[0].prerequisites.push("c1".into());
        assert!(matches!(
            ContentPack::from_parts(parts),
            Err(PackError::CyclicPrerequisites(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut parts = minimal_parts();
        parts.questions[1].question_id = "q1".into();
        assert_eq!(ContentPack::from_parts(parts), Err(PackError::DuplicateId("q1".into())));

        let mut parts = minimal_parts();
        parts.variants.push(variant("c1", SensationSeeking));
        assert_eq!(
            ContentPack::from_parts(parts),
            Err(PackError::DuplicateId("c1.SS".into()))
        );
    }

    #[test]
    fn malformed_questions_rejected() {
        let mut parts = minimal_parts();
        parts.questions[0].correct_index = 2;
        parts.questions[1].score_weight = 0;
        let errs = check_parts(&parts);
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| e.kind() == "Invalid"));
    }

    #[test]
    fn missing_default_language_is_missing_manifest() {
        let mut parts = minimal_parts();
        parts.default_language = None;
        assert_eq!(ContentPack::from_parts(parts), Err(PackError::MissingManifest));
    }

    fn pack_with_variants(styles: &[LearningStyle]) -> ContentPack {
        let mut parts = minimal_parts();
        parts.concepts.push(concept("c2", &["s1"], &[]));
        parts.variants = styles.iter().map(|s| variant("c1", *s)).collect();
        ContentPack::from_parts(parts).unwrap()
    }

    #[test]
    fn variant_selection() {
        let pack = pack_with_variants(&[SensationSeeking, DeepLearningAchiever]);
        assert_eq!(
            pack.variant_for("c1", SensationSeeking).unwrap().style,
            SensationSeeking
        );
        assert_eq!(
            pack.variant_for("c1", GoalOrientedAchiever).unwrap().style,
            DeepLearningAchiever
        );

        // only CA present: walking DLA -> CA finds CA
        let pack = pack_with_variants(&[ConscientiousAchiever]);
        assert_eq!(
            pack.variant_for("c1", SensationSeeking).unwrap().style,
            ConscientiousAchiever
        );

        assert_eq!(
            pack.variant_for("c2", SensationSeeking),
            Err(KnowledgeError::NoVariant("c2".into()))
        );
        assert_eq!(
            pack.variant_for("zz", SensationSeeking),
            Err(KnowledgeError::UnknownConcept("zz".into()))
        );
    }

    #[test]
    fn bank_sorted_and_unknown() {
        let mut parts = minimal_parts();
        parts
            .questions
            .push(question("q0", "c1", "s1", Level::Weak, 2, EvalKind::Objective));
        let pack = ContentPack::from_parts(parts).unwrap();
        let ids: Vec<_> = pack
            .bank_for("c1")
            .unwrap()
            .iter()
            .map(|q| q.question_id.as_str())
            .collect();
        assert_eq!(ids, ["q0", "q1", "q2"]);
        assert_eq!(
            pack.bank_for("nope"),
            Err(KnowledgeError::UnknownConcept("nope".into()))
        );
    }

    #[test]
    fn course_order_respects_prerequisites_then_id() {
        let mut parts = minimal_parts();
        parts.concepts = vec![
            concept("a", &["s"], &["c"]),
            concept("b", &["s"], &[]),
            concept("c", &["s"], &[]),
            concept("d", &["s"], &["a", "b"]),
        ];
        parts.variants.clear();
        parts.questions.clear();
        let pack = ContentPack::from_parts(parts).unwrap();
        assert_eq!(pack.course_order(), ["b", "c", "a", "d"]);
    }

    /// Random small packs: (concepts, questions as (concept idx, section idx)).
    fn arb_pack() -> impl Strategy<Value = PackParts> {
        (
            1usize..5,
            prop::collection::vec((0usize..5, 0usize..3, 0usize..5), 0..20),
        )
            .prop_map(|(n, qs)| {
                let mut parts = minimal_parts();
                parts.concepts = (0..n)
                    .map(|i| {
                        let prereqs: Vec<String> = (0..i).step_by(2).map(|j| format!("c{j}")).collect();
                        let mut c = concept(&format!("c{i}"), &["s0", "s1", "s2"], &[]);
                        c.prerequisites = prereqs;
                        c
                    })
                    .collect();
                parts.variants = (0..n)
                    .map(|i| variant(&format!("c{i}"), LearningStyle::ALL[i % 5]))
                    .collect();
                parts.questions = qs
                    .iter()
                    .enumerate()
                    .map(|(k, (c, s, l))| {
                        question(
                            &format!("q{k:02}"),
                            &format!("c{}", c % n),
                            &format!("s{s}"),
                            Level::ALL[*l],
                            1,
                            EvalKind::Conceptual,
                        )
                    })
                    .collect();
                parts
            })
    }

    proptest! {
        #[test]
        fn valid_random_packs_load(parts in arb_pack()) {
            prop_assert!(ContentPack::from_parts(parts.clone()).is_ok());
            prop_assert_eq!(ContentPack::from_parts(parts.clone()), ContentPack::from_parts(parts));
        }

        #[test]
        fn bank_equals_brute_force_filter(parts in arb_pack()) {
            let pack = ContentPack::from_parts(parts.clone()).unwrap();
            for c in pack.concepts() {
                let mut expected: Vec<&Question> = parts.questions.iter().filter(|q| q.concept_id == c.concept_id).collect();
                expected.sort_by(|a, b| a.question_id.cmp(&b.question_id));
                let got: Vec<&Question> = pack.bank_for(&c.concept_id).unwrap().iter().collect();
                prop_assert_eq!(got, expected);
            }
        }

        #[test]
        fn variant_for_is_total(parts in arb_pack(), s in 0usize..5) {
            let pack = ContentPack::from_parts(parts).unwrap();
            for c in pack.concepts() {
                prop_assert!(pack.variant_for(&c.concept_id, LearningStyle::ALL[s]).is_ok());
            }
        }

        #[test]
        fn one_corrupted_reference_rejects_the_pack(parts in arb_pack(), which in 0usize..3, pick in any::<prop::sample::Index>()) {
            let mut parts = parts;
            match which {
                0 if !parts.questions.is_empty() => {
                    let i = pick.index(parts.questions.len());
                    parts.questions[i].section_id = "missing".into();
                }
                1 => {
                    let i = pick.index(parts.variants.len());
                    parts.variants[i].concept_id = "missing".into();
                }
                _ => {
                    let i = pick.index(parts.concepts.len());
                    parts.concepts[i].prerequisites.push("missing".into());
                }
            }
            let rejected = matches!(ContentPack::from_parts(parts), Err(PackError::DanglingReference { .. }));
            prop_assert!(rejected);
        }
    }
}
