//! Session orchestration: turns learner state plus a content pack into the
//! next pedagogical step, and learner responses into new events.
//!
//! Every operation is a pure function of `(pack, rules, config, state,
//! request, timestamp)`. It returns the events to persist and the state they
//! produce; nothing is stored here.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assessment::{
    default_question_count, score_test, select_questions, AssessmentError, Level, TestInstance, TestPhase, TestResult,
    TestSpec,
};
use crate::knowledge::{ContentPack, KnowledgeError};
use crate::learner::{
    Decision, EventBatch, EventPayload, LearnerEvent, LearnerState, MasteryRecord, MasteryStatus, ModelError, Modeler,
    SessionPhase,
};
use crate::rules::{default_policy, facts, infer, InferError, PedagogicalAction, Rule, WorkingMemory};
use crate::style::{score_questionnaire, LearningStyle, ProfileError, StyleVector};
use crate::text::LocalizedText;
use crate::translation::{translate, LanguageCode, TranslationRequest, Translator};

pub const DEFAULT_MAX_ITERATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TutorConfig {
    pub modeler: Modeler,
    pub max_iterations: usize,
    /// Base seed for question selection; per-test seeds are derived from it,
    /// the learner id and the event sequence number.
    pub seed: u64,
    /// Fixed test length; `None` uses [`default_question_count`].
    pub question_count: Option<usize>,
}

impl Default for TutorConfig {
    fn default() -> Self {
        Self {
            modeler: Modeler::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            question_count: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TutorError {
    #[error("learner is not registered")]
    NotRegistered,
    #[error("request not valid in phase {phase}")]
    WrongPhase { phase: &'static str },
    #[error("unknown test `{0}`")]
    UnknownTest(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
    #[error("content unavailable: {0}")]
    Content(#[from] KnowledgeError),
    #[error("rule engine: {0}")]
    Inference(#[from] InferError),
    #[error("policy produced an illegal step: {0}")]
    Model(#[from] ModelError),
}

/// What the learner should do next, before translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    Questionnaire,
    Test {
        instance: TestInstance,
    },
    Lesson {
        concept_id: String,
        style: LearningStyle,
        attempt_no: u32,
    },
    Completed,
}

/// Result of a state-changing call: the step to show, the events to append
/// and the state they produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub step: Step,
    pub events: Vec<LearnerEvent>,
    pub state: LearnerState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestOutcome {
    pub result: TestResult,
    /// Set for post-tests only.
    pub decision: Option<Decision>,
    pub turn: Turn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileOutcome {
    pub vector: StyleVector,
    pub events: Vec<LearnerEvent>,
    pub state: LearnerState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub learner_id: String,
    pub language: Option<LanguageCode>,
    pub phase: Option<SessionPhase>,
    pub active_concept: Option<String>,
    pub style: Option<StyleVector>,
    /// One record per concept in course order; untouched concepts are
    /// NotStarted.
    pub concepts: Vec<MasteryRecord>,
}

#[derive(Debug, Clone)]
pub struct Tutor {
    pack: ContentPack,
    rules: Vec<Rule>,
    config: TutorConfig,
}

impl Tutor {
    /// Uses the pack's rules if it ships any, else [`default_policy`].
    pub fn new(pack: ContentPack, config: TutorConfig) -> Self {
        let rules = pack.rules().map(<[Rule]>::to_vec).unwrap_or_else(default_policy);
        Self { pack, rules, config }
    }

    pub fn with_rules(pack: ContentPack, rules: Vec<Rule>, config: TutorConfig) -> Self {
        Self { pack, rules, config }
    }

    pub fn pack(&self) -> &ContentPack {
        &self.pack
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn config(&self) -> &TutorConfig {
        &self.config
    }

    /// The single Registered event that starts a learner's log.
    pub fn register(&self, learner_id: &str, language: LanguageCode, timestamp: u64) -> Result<Turn, TutorError> {
        let mut batch = EventBatch::new(self.config.modeler, LearnerState::default(), learner_id, timestamp);
        batch.push(EventPayload::Registered { language })?;
        let (state, events) = batch.finish();
        Ok(Turn {
            step: Step::Questionnaire,
            events,
            state,
        })
    }

    /// The pending step. Repeated calls without learner input return the
    /// same step and no events.
    pub fn next_step(&self, state: &LearnerState, timestamp: u64) -> Result<Turn, TutorError> {
        let phase = state.phase().ok_or(TutorError::NotRegistered)?;
        let unchanged = |step: Step| Turn {
            step,
            events: Vec::new(),
            state: state.clone(),
        };
        if let Some(instance) = &state.pending_test {
            return Ok(unchanged(Step::Test {
                instance: instance.clone(),
            }));
        }
        let event = match phase {
            SessionPhase::Completed => return Ok(unchanged(Step::Completed)),
            SessionPhase::InLesson { concept_id, style } => {
                return Ok(unchanged(lesson_step(state, concept_id, *style)));
            }
            SessionPhase::NeedsProfile => facts::EVENT_ENTRY,
            // a scored test whose follow-up was never recorded
            SessionPhase::AwaitingPreTest { .. } => facts::EVENT_PRETEST_SCORED,
            SessionPhase::AwaitingPostTest { .. } => facts::EVENT_POSTTEST_SCORED,
        };
        let mut batch = EventBatch::new(self.config.modeler, state.clone(), &state.learner_id, timestamp);
        let step = self.run_policy(&mut batch, event)?;
        let (state, events) = batch.finish();
        Ok(Turn { step, events, state })
    }

    /// Score a questionnaire and record the profile. Allowed in any phase.
    pub fn submit_questionnaire(
        &self,
        state: &LearnerState,
        responses: &BTreeMap<String, u8>,
        timestamp: u64,
    ) -> Result<ProfileOutcome, TutorError> {
        if state.phase().is_none() {
            return Err(TutorError::NotRegistered);
        }
        let vector = score_questionnaire(self.pack.questionnaire(), responses)?;
        let mut batch = EventBatch::new(self.config.modeler, state.clone(), &state.learner_id, timestamp);
        batch.push(EventPayload::ProfileUpdated { vector })?;
        let (state, events) = batch.finish();
        Ok(ProfileOutcome { vector, events, state })
    }

    /// Score the pending test, record every answer, and move on.
    pub fn submit_test(
        &self,
        state: &LearnerState,
        test_id: &str,
        answers: &BTreeMap<String, usize>,
        timestamp: u64,
    ) -> Result<TestOutcome, TutorError> {
        let phase = state.phase().ok_or(TutorError::NotRegistered)?;
        let pending = state
            .pending_test
            .as_ref()
            .ok_or(TutorError::WrongPhase { phase: phase.name() })?;
        if pending.test_id != test_id {
            return Err(TutorError::UnknownTest(test_id.into()));
        }
        let bank = self.pack.bank_for(&pending.concept_id)?;
        let result = score_test(pending, answers, bank)?;
        let decision = match pending.phase {
            TestPhase::PreTest => None,
            TestPhase::PostTest => {
                let record = state
                    .record(&pending.concept_id)
                    .cloned()
                    .unwrap_or_else(|| MasteryRecord::new(&pending.concept_id));
                Some(self.config.modeler.decide(&record, &result))
            }
        };

        let mut batch = EventBatch::new(self.config.modeler, state.clone(), &state.learner_id, timestamp);
        for outcome in &result.answers {
            batch.push(EventPayload::AnswerRecorded {
                test_id: pending.test_id.clone(),
                question_id: outcome.question_id.clone(),
                choice: outcome.choice,
                correct: outcome.correct,
            })?;
        }
        batch.push(EventPayload::TestScored {
            concept_id: pending.concept_id.clone(),
            phase: pending.phase,
            result: result.clone(),
        })?;
        let event = match pending.phase {
            TestPhase::PreTest => facts::EVENT_PRETEST_SCORED,
            TestPhase::PostTest => facts::EVENT_POSTTEST_SCORED,
        };
        let step = self.run_policy(&mut batch, event)?;
        let (state, events) = batch.finish();
        Ok(TestOutcome {
            result,
            decision,
            turn: Turn { step, events, state },
        })
    }

    /// The learner has finished reading the lesson; issue the post-test.
    pub fn complete_lesson(&self, state: &LearnerState, timestamp: u64) -> Result<Turn, TutorError> {
        let phase = state.phase().ok_or(TutorError::NotRegistered)?;
        if !matches!(phase, SessionPhase::InLesson { .. }) {
            return Err(TutorError::WrongPhase { phase: phase.name() });
        }
        let mut batch = EventBatch::new(self.config.modeler, state.clone(), &state.learner_id, timestamp);
        let step = self.run_policy(&mut batch, facts::EVENT_LESSON_COMPLETED)?;
        let (state, events) = batch.finish();
        Ok(Turn { step, events, state })
    }

    pub fn progress(&self, state: &LearnerState) -> ProgressReport {
        ProgressReport {
            learner_id: state.learner_id.clone(),
            language: state.language.clone(),
            phase: state.phase().cloned(),
            active_concept: state.active_concept().map(String::from),
            style: state.style,
            concepts: self
                .pack
                .course_order()
                .iter()
                .map(|c| state.record(c).cloned().unwrap_or_else(|| MasteryRecord::new(c)))
                .collect(),
        }
    }

    /// Working memory describing `state` at `event`.
    pub fn facts_for(&self, state: &LearnerState, event: &str) -> WorkingMemory {
        let mut m = WorkingMemory::new();
        let put = |m: &mut WorkingMemory, (s, a): (&str, &str), v: crate::rules::Value| {
            m.assert(s, a, v);
        };
        put(&mut m, facts::EVENT, event.into());
        put(&mut m, facts::PROFILED, state.style.is_some().into());
        if let Some(v) = &state.style {
            put(&mut m, facts::STYLE, v.dominant().into());
        }

        let order = self.pack.course_order();
        let unmastered = |c: &&String| !state.is_mastered(c);
        let active = state
            .active_concept()
            .map(String::from)
            .or_else(|| order.iter().find(unmastered).cloned());
        let next = order
            .iter()
            .filter(|c| Some(c.as_str()) != active.as_deref())
            .find(unmastered)
            .cloned();
        put(
            &mut m,
            facts::ALL_MASTERED,
            order.iter().all(|c| state.is_mastered(c)).into(),
        );
        put(&mut m, facts::NEXT, next.as_deref().unwrap_or(facts::NONE).into());

        if let Some(active) = active {
            let record = state
                .record(&active)
                .cloned()
                .unwrap_or_else(|| MasteryRecord::new(&active));
            put(&mut m, facts::ATTEMPT, i64::from(record.remediations).into());
            put(&mut m, facts::STATUS, status_name(record.status).into());
            if let Some(level) = record.post_level {
                put(&mut m, facts::POST_LEVEL, level.into());
            }
            if let Some(level) = record.conceptual_level {
                put(&mut m, facts::POST_CONCEPTUAL, level.into());
            }
            if let Some(level) = record.objective_level {
                put(&mut m, facts::POST_OBJECTIVE, level.into());
            }
            if event == facts::EVENT_POSTTEST_SCORED {
                let decision = if record.status == MasteryStatus::Mastered {
                    facts::ADVANCE
                } else {
                    facts::REMEDIATE
                };
                put(&mut m, facts::DECISION, decision.into());
            }
            let current = record
                .lesson_style
                .or_else(|| state.style.map(|v| v.dominant()))
                .unwrap_or(LearningStyle::FALLBACK_CHAIN[0]);
            put(
                &mut m,
                facts::REMEDIATION_STYLE,
                self.remediation_style(&active, current).into(),
            );
            put(&mut m, facts::ACTIVE, active.as_str().into());
        }
        m
    }

    /// The next style after `current` in the fallback chain that has its own
    /// variant for `concept_id`. Stays on `current` when no other style has
    /// one.
    pub fn remediation_style(&self, concept_id: &str, current: LearningStyle) -> LearningStyle {
        let authored: Vec<LearningStyle> = self.pack.variants_of(concept_id).map(|v| v.style).collect();
        let mut style = current;
        for _ in 0..LearningStyle::ALL.len() {
            style = style.next_in_chain();
            if style != current && authored.contains(&style) {
                return style;
            }
        }
        current
    }

    fn run_policy(&self, batch: &mut EventBatch, event: &str) -> Result<Step, TutorError> {
        let memory = self.facts_for(batch.state(), event);
        let inference = infer(&self.rules, &memory, self.config.max_iterations)?;
        self.execute(batch, inference.action)
    }

    fn execute(&self, batch: &mut EventBatch, action: PedagogicalAction) -> Result<Step, TutorError> {
        match action {
            PedagogicalAction::RequestProfile => Ok(Step::Questionnaire),
            PedagogicalAction::GivePreTest { concept_id } => {
                let level = self.pre_test_level(batch.state(), &concept_id);
                self.issue_test(batch, &concept_id, TestPhase::PreTest, level)
            }
            PedagogicalAction::DeliverLesson { concept_id, style } => {
                let variant = self.pack.variant_for(&concept_id, style)?;
                let style = variant.style;
                batch.push(EventPayload::LessonDelivered {
                    concept_id: concept_id.clone(),
                    style,
                })?;
                Ok(lesson_step(batch.state(), &concept_id, style))
            }
            PedagogicalAction::GivePostTest { concept_id, ease } => {
                let level = batch
                    .state()
                    .record(&concept_id)
                    .and_then(|r| r.pre_level)
                    .unwrap_or(Level::Good);
                let level = if ease { level.lower() } else { level };
                self.issue_test(batch, &concept_id, TestPhase::PostTest, level)
            }
            PedagogicalAction::Remediate {
                concept_id,
                variant_style,
            } => {
                let variant = self.pack.variant_for(&concept_id, variant_style)?;
                let style = variant.style;
                let attempt_no = batch.state().record(&concept_id).map_or(0, |r| r.remediations) + 1;
                batch.push(EventPayload::RemediationStarted {
                    concept_id: concept_id.clone(),
                    attempt_no,
                })?;
                batch.push(EventPayload::LessonDelivered {
                    concept_id: concept_id.clone(),
                    style,
                })?;
                Ok(lesson_step(batch.state(), &concept_id, style))
            }
            PedagogicalAction::AdvanceTo { concept_id } => {
                if self.pack.concept(&concept_id).is_none() {
                    return Err(KnowledgeError::UnknownConcept(concept_id).into());
                }
                batch.push(EventPayload::ConceptAdvanced {
                    concept_id: concept_id.clone(),
                })?;
                let level = self.pre_test_level(batch.state(), &concept_id);
                self.issue_test(batch, &concept_id, TestPhase::PreTest, level)
            }
            PedagogicalAction::EndCourse => {
                batch.push(EventPayload::CourseCompleted)?;
                Ok(Step::Completed)
            }
        }
    }

    /// Pre-tests aim at the level measured last time on this concept, or at
    /// Good for a first attempt.
    fn pre_test_level(&self, state: &LearnerState, concept_id: &str) -> Level {
        state
            .record(concept_id)
            .and_then(|r| r.pre_level)
            .unwrap_or(Level::Good)
    }

    fn issue_test(
        &self,
        batch: &mut EventBatch,
        concept_id: &str,
        phase: TestPhase,
        learner_level: Level,
    ) -> Result<Step, TutorError> {
        let concept = self
            .pack
            .concept(concept_id)
            .ok_or_else(|| KnowledgeError::UnknownConcept(concept_id.into()))?;
        let bank = self.pack.bank_for(concept_id)?;
        let state = batch.state();
        let question_count = self
            .config
            .question_count
            .map(|n| n.min(bank.len()))
            .unwrap_or_else(|| default_question_count(bank.len(), concept.sections.len()));
        let spec = TestSpec {
            concept_id: concept_id.into(),
            phase,
            question_count,
            learner_level,
            style: state.style.map_or(LearningStyle::FALLBACK_CHAIN[0], |v| v.dominant()),
            rng_seed: derive_seed(self.config.seed, &state.learner_id, state.next_sequence_no()),
        };
        let empty = Default::default();
        let seen = state.seen_questions.get(concept_id).unwrap_or(&empty);
        let mut instance = select_questions(bank, &spec, seen)?;
        instance.issued_at = batch.timestamp();
        batch.push(EventPayload::TestIssued {
            concept_id: concept_id.into(),
            phase,
            instance: instance.clone(),
        })?;
        Ok(Step::Test { instance })
    }

    /// Translate `step` for a reader of `target`. Never fails: any text that
    /// cannot be translated is returned in its source language and flagged.
    pub fn render<T: Translator + ?Sized>(&self, step: &Step, target: &LanguageCode, translator: &T) -> View {
        let r = Renderer {
            target,
            default: self.pack.default_language(),
            translator,
        };
        match step {
            Step::Questionnaire => View::Questionnaire {
                scale_min: 1,
                scale_max: 5,
                items: self
                    .pack
                    .questionnaire()
                    .iter()
                    .map(|item| QuestionnaireItemView {
                        item_id: item.item_id.clone(),
                        prompt: r.text(&item.prompt),
                    })
                    .collect(),
            },
            Step::Test { instance } => {
                let bank = self.pack.bank_for(&instance.concept_id).unwrap_or(&[]);
                let questions = instance
                    .questions
                    .iter()
                    .filter_map(|issued| bank.iter().find(|q| q.question_id == issued.question_id))
                    .map(|q| QuestionView {
                        question_id: q.question_id.clone(),
                        stem: r.text(&q.stem),
                        choices: q.choices.iter().map(|c| r.text(c)).collect(),
                    })
                    .collect();
                View::Test {
                    test_id: instance.test_id.clone(),
                    concept_id: instance.concept_id.clone(),
                    title: self.concept_title(&r, &instance.concept_id),
                    phase: instance.phase,
                    questions,
                }
            }
            Step::Lesson {
                concept_id,
                style,
                attempt_no,
            } => {
                let blocks = self
                    .pack
                    .variants_of(concept_id)
                    .find(|v| v.style == *style)
                    .map(|v| v.blocks.iter().map(|b| r.raw(&b.lang, &b.text)).collect())
                    .unwrap_or_default();
                View::Lesson {
                    concept_id: concept_id.clone(),
                    title: self.concept_title(&r, concept_id),
                    style: *style,
                    attempt_no: *attempt_no,
                    blocks,
                }
            }
            Step::Completed => View::Completed,
        }
    }

    fn concept_title<T: Translator + ?Sized>(&self, r: &Renderer<'_, T>, concept_id: &str) -> TextView {
        match self.pack.concept(concept_id) {
            Some(c) => r.text(&c.title),
            None => TextView {
                text: concept_id.into(),
                lang: r.target.clone(),
                untranslated: false,
            },
        }
    }
}

fn lesson_step(state: &LearnerState, concept_id: &str, style: LearningStyle) -> Step {
    Step::Lesson {
        concept_id: concept_id.into(),
        style,
        attempt_no: state.record(concept_id).map_or(0, |r| r.remediations),
    }
}

fn status_name(status: MasteryStatus) -> &'static str {
    match status {
        MasteryStatus::NotStarted => "NotStarted",
        MasteryStatus::InProgress => "InProgress",
        MasteryStatus::Mastered => "Mastered",
    }
}

/// Per-test selection seed: FNV-1a of the learner id, mixed with the base
/// seed and sequence number through splitmix64.
pub fn derive_seed(base: u64, learner_id: &str, sequence_no: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in learner_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(base ^ h) ^ sequence_no)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Renderer<'a, T: ?Sized> {
    target: &'a LanguageCode,
    default: &'a LanguageCode,
    translator: &'a T,
}

impl<T: Translator + ?Sized> Renderer<'_, T> {
    fn text(&self, text: &LocalizedText) -> TextView {
        match text.resolve(self.target, self.default) {
            Some((lang, s)) => self.raw(&lang, s),
            None => TextView {
                text: String::new(),
                lang: self.target.clone(),
                untranslated: false,
            },
        }
    }

    fn raw(&self, source: &LanguageCode, text: &str) -> TextView {
        let request = TranslationRequest {
            source: source.clone(),
            target: self.target.clone(),
            text: text.into(),
        };
        match translate(self.translator, &request) {
            Ok(text) => TextView {
                text,
                lang: self.target.clone(),
                untranslated: false,
            },
            Err(_) => TextView {
                text: text.to_string(),
                lang: source.clone(),
                untranslated: true,
            },
        }
    }
}

/// A piece of outbound text. `untranslated` marks source-language fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextView {
    pub text: String,
    pub lang: LanguageCode,
    #[serde(default)]
    pub untranslated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireItemView {
    pub item_id: String,
    pub prompt: TextView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub question_id: String,
    pub stem: TextView,
    pub choices: Vec<TextView>,
}

/// A translated step, ready to serialize for a client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum View {
    Questionnaire {
        scale_min: u8,
        scale_max: u8,
        items: Vec<QuestionnaireItemView>,
    },
    Test {
        test_id: String,
        concept_id: String,
        title: TextView,
        phase: TestPhase,
        questions: Vec<QuestionView>,
    },
    Lesson {
        concept_id: String,
        title: TextView,
        style: LearningStyle,
        attempt_no: u32,
        blocks: Vec<TextView>,
    },
    Completed,
}

impl View {
    /// Whether any text in the view fell back to its source language.
    pub fn untranslated(&self) -> bool {
        fn any<'a>(mut texts: impl Iterator<Item = &'a TextView>) -> bool {
            texts.any(|t| t.untranslated)
        }
        match self {
            View::Questionnaire { items, .. } => any(items.iter().map(|i| &i.prompt)),
            View::Test { title, questions, .. } => {
                title.untranslated
                    || any(questions
                        .iter()
                        .flat_map(|q| core::iter::once(&q.stem).chain(&q.choices)))
            }
            View::Lesson { title, blocks, .. } => title.untranslated || any(blocks.iter()),
            View::Completed => false,
        }
    }
}
