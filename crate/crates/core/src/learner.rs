//! Event-sourced learner model.
//!
//! A learner's state is never stored directly: it is the fold of
//! [`Modeler::apply`] over the learner's event log, starting from
//! [`LearnerState::default`]. Sequence numbers start at 1 and must be
//! contiguous.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assessment::{Level, TestInstance, TestPhase, TestResult};
use crate::style::{LearningStyle, StyleVector};
use crate::translation::LanguageCode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerEvent {
    pub sequence_no: u64,
    pub learner_id: String,
    pub timestamp: u64,
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EventPayload {
    Registered {
        language: LanguageCode,
    },
    ProfileUpdated {
        vector: StyleVector,
    },
    TestIssued {
        concept_id: String,
        phase: TestPhase,
        instance: TestInstance,
    },
    AnswerRecorded {
        test_id: String,
        question_id: String,
        choice: usize,
        correct: bool,
    },
    TestScored {
        concept_id: String,
        phase: TestPhase,
        result: TestResult,
    },
    LessonDelivered {
        concept_id: String,
        style: LearningStyle,
    },
    ConceptAdvanced {
        concept_id: String,
    },
    RemediationStarted {
        concept_id: String,
        attempt_no: u32,
    },
    CourseCompleted,
    /// Any payload kind this build does not know. Never applied.
    #[serde(other)]
    Unknown,
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::Registered { .. } => "Registered",
            EventPayload::ProfileUpdated { .. } => "ProfileUpdated",
            EventPayload::TestIssued { .. } => "TestIssued",
            EventPayload::AnswerRecorded { .. } => "AnswerRecorded",
            EventPayload::TestScored { .. } => "TestScored",
            EventPayload::LessonDelivered { .. } => "LessonDelivered",
            EventPayload::ConceptAdvanced { .. } => "ConceptAdvanced",
            EventPayload::RemediationStarted { .. } => "RemediationStarted",
            EventPayload::CourseCompleted => "CourseCompleted",
            EventPayload::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum MasteryStatus {
    #[default]
    NotStarted,
    InProgress,
    Mastered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasteryRecord {
    pub concept_id: String,
    pub pre_level: Option<Level>,
    pub post_level: Option<Level>,
    pub conceptual_level: Option<Level>,
    pub objective_level: Option<Level>,
    /// Post-tests taken.
    pub attempts: u32,
    /// Remediation rounds started.
    pub remediations: u32,
    /// Style of the most recently delivered lesson.
    pub lesson_style: Option<LearningStyle>,
    pub status: MasteryStatus,
}

impl MasteryRecord {
    pub fn new(concept_id: &str) -> Self {
        Self {
            concept_id: concept_id.into(),
            pre_level: None,
            post_level: None,
            conceptual_level: None,
            objective_level: None,
            attempts: 0,
            remediations: 0,
            lesson_style: None,
            status: MasteryStatus::NotStarted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase")]
pub enum SessionPhase {
    NeedsProfile,
    AwaitingPreTest { test_id: String },
    InLesson { concept_id: String, style: LearningStyle },
    AwaitingPostTest { test_id: String },
    Completed,
}

impl SessionPhase {
    pub fn name(&self) -> &'static str {
        match self {
            SessionPhase::NeedsProfile => "NeedsProfile",
            SessionPhase::AwaitingPreTest { .. } => "AwaitingPreTest",
            SessionPhase::InLesson { .. } => "InLesson",
            SessionPhase::AwaitingPostTest { .. } => "AwaitingPostTest",
            SessionPhase::Completed => "Completed",
        }
    }

    /// Legal phase changes: NeedsProfile -> AwaitingPreTest -> InLesson ->
    /// AwaitingPostTest -> {InLesson | AwaitingPreTest | Completed}.
    pub fn can_move_to(&self, next: &SessionPhase) -> bool {
        use SessionPhase::*;
        matches!(
            (self, next),
            (NeedsProfile, AwaitingPreTest { .. })
                | (AwaitingPreTest { .. }, InLesson { .. })
                | (InLesson { .. }, AwaitingPostTest { .. })
                | (AwaitingPostTest { .. }, InLesson { .. })
                | (AwaitingPostTest { .. }, AwaitingPreTest { .. })
                | (AwaitingPostTest { .. }, Completed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: SessionPhase,
    pub active_concept: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LearnerState {
    pub learner_id: String,
    pub language: Option<LanguageCode>,
    pub style: Option<StyleVector>,
    pub mastery: BTreeMap<String, MasteryRecord>,
    pub seen_questions: BTreeMap<String, BTreeSet<String>>,
    pub current_session: Option<SessionState>,
    /// Issued test not yet scored.
    pub pending_test: Option<TestInstance>,
    /// Answers recorded against the pending test.
    pub pending_answers: BTreeMap<String, usize>,
    pub last_sequence_no: u64,
}

impl LearnerState {
    pub fn phase(&self) -> Option<&SessionPhase> {
        self.current_session.as_ref().map(|s| &s.phase)
    }

    pub fn active_concept(&self) -> Option<&str> {
        self.current_session.as_ref()?.active_concept.as_deref()
    }

    pub fn record(&self, concept_id: &str) -> Option<&MasteryRecord> {
        self.mastery.get(concept_id)
    }

    pub fn is_mastered(&self, concept_id: &str) -> bool {
        self.record(concept_id)
            .is_some_and(|r| r.status == MasteryStatus::Mastered)
    }

    pub fn next_sequence_no(&self) -> u64 {
        self.last_sequence_no + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("sequence gap: expected {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("unknown event payload kind")]
    UnknownPayload,
    #[error("event for learner `{got}` applied to learner `{expected}`")]
    LearnerMismatch { expected: String, got: String },
    #[error("first event must be Registered, got {0}")]
    NotRegistered(&'static str),
    #[error("learner is already registered")]
    AlreadyRegistered,
    #[error("illegal phase change {from} -> {to}")]
    IllegalTransition { from: &'static str, to: &'static str },
    #[error("inconsistent event: {0}")]
    Inconsistent(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Advance,
    Remediate { attempt_no: u32 },
}

/// Advance iff the total, conceptual and objective levels all reach Good.
pub fn advancement_decision(record: &MasteryRecord, result: &TestResult) -> Decision {
    Modeler::default().decide(record, result)
}

/// Applies events to learner state. Holds the mastery threshold so that a
/// deployment with a non-default threshold replays identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modeler {
    pub threshold: Level,
}

impl Default for Modeler {
    fn default() -> Self {
        Self { threshold: Level::Good }
    }
}

impl Modeler {
    pub fn new(threshold: Level) -> Self {
        Self { threshold }
    }

    pub fn passes(&self, result: &TestResult) -> bool {
        result.level.min(result.conceptual_level).min(result.objective_level) >= self.threshold
    }

    pub fn decide(&self, record: &MasteryRecord, result: &TestResult) -> Decision {
        if self.passes(result) {
            Decision::Advance
        } else {
            Decision::Remediate {
                attempt_no: record.remediations + 1,
            }
        }
    }

    /// Pure application: returns the next state.
    pub fn apply(&self, state: &LearnerState, event: &LearnerEvent) -> Result<LearnerState, ModelError> {
        let mut next = state.clone();
        self.apply_in_place(&mut next, event)?;
        Ok(next)
    }

    /// Apply in place. On error `state` is left unchanged.
    pub fn apply_in_place(&self, state: &mut LearnerState, event: &LearnerEvent) -> Result<(), ModelError> {
        let expected = state.next_sequence_no();
        if event.sequence_no != expected {
            return Err(ModelError::SequenceGap {
                expected,
                got: event.sequence_no,
            });
        }
        if matches!(event.payload, EventPayload::Unknown) {
            return Err(ModelError::UnknownPayload);
        }
        let registered = state.language.is_some();
        match (&event.payload, registered) {
            (EventPayload::Registered { .. }, true) => return Err(ModelError::AlreadyRegistered),
            (EventPayload::Registered { .. }, false) => {}
            (other, false) => return Err(ModelError::NotRegistered(other.kind())),
            (_, true) if state.learner_id != event.learner_id => {
                return Err(ModelError::LearnerMismatch {
                    expected: state.learner_id.clone(),
                    got: event.learner_id.clone(),
                })
            }
            _ => {}
        }
        self.check(state, &event.payload)?;
        self.mutate(state, event);
        state.last_sequence_no = event.sequence_no;
        Ok(())
    }

    fn check(&self, state: &LearnerState, payload: &EventPayload) -> Result<(), ModelError> {
        let phase = state.phase();
        let moves_to = |to: SessionPhase| -> Result<(), ModelError> {
            let from = phase.ok_or(ModelError::Inconsistent("no session"))?;
            if from.can_move_to(&to) {
                Ok(())
            } else {
                Err(ModelError::IllegalTransition {
                    from: from.name(),
                    to: to.name(),
                })
            }
        };
        match payload {
            EventPayload::TestIssued {
                concept_id,
                phase: test_phase,
                instance,
            } => {
                if instance.concept_id != *concept_id || instance.phase != *test_phase {
                    return Err(ModelError::Inconsistent("issued instance does not match event"));
                }
                let to = match test_phase {
                    TestPhase::PreTest => SessionPhase::AwaitingPreTest {
                        test_id: instance.test_id.clone(),
                    },
                    TestPhase::PostTest => SessionPhase::AwaitingPostTest {
                        test_id: instance.test_id.clone(),
                    },
                };
                if state.pending_test.is_some() {
                    return Err(ModelError::Inconsistent("a test is already pending"));
                }
                moves_to(to)
            }
            EventPayload::AnswerRecorded {
                test_id, question_id, ..
            } => {
                let pending = state
                    .pending_test
                    .as_ref()
                    .filter(|t| t.test_id == *test_id)
                    .ok_or(ModelError::Inconsistent("answer for a test that is not pending"))?;
                if !pending.question_ids().any(|q| q == question_id) {
                    return Err(ModelError::Inconsistent("answer for a question not in the test"));
                }
                Ok(())
            }
            EventPayload::TestScored {
                concept_id,
                phase: test_phase,
                result,
            } => {
                let pending = state
                    .pending_test
                    .as_ref()
                    .filter(|t| t.test_id == result.test_id)
                    .ok_or(ModelError::Inconsistent("score for a test that is not pending"))?;
                if pending.concept_id != *concept_id || pending.phase != *test_phase {
                    return Err(ModelError::Inconsistent("score does not match the pending test"));
                }
                Ok(())
            }
            EventPayload::LessonDelivered { concept_id, style } => {
                if state.pending_test.is_some() {
                    return Err(ModelError::Inconsistent("lesson delivered while a test is pending"));
                }
                moves_to(SessionPhase::InLesson {
                    concept_id: concept_id.clone(),
                    style: *style,
                })
            }
            EventPayload::CourseCompleted => {
                if state.pending_test.is_some() {
                    return Err(ModelError::Inconsistent("course completed while a test is pending"));
                }
                moves_to(SessionPhase::Completed)
            }
            EventPayload::Registered { .. }
            | EventPayload::ProfileUpdated { .. }
            | EventPayload::ConceptAdvanced { .. }
            | EventPayload::RemediationStarted { .. }
            | EventPayload::Unknown => Ok(()),
        }
    }

    fn mutate(&self, state: &mut LearnerState, event: &LearnerEvent) {
        let set_phase = |state: &mut LearnerState, phase: SessionPhase, concept: Option<&str>| {
            let session = state.current_session.get_or_insert(SessionState {
                phase: SessionPhase::NeedsProfile,
                active_concept: None,
            });
            session.phase = phase;
            if let Some(c) = concept {
                session.active_concept = Some(c.into());
            }
        };
        match &event.payload {
            EventPayload::Registered { language } => {
                state.learner_id = event.learner_id.clone();
                state.language = Some(language.clone());
                set_phase(state, SessionPhase::NeedsProfile, None);
            }
            EventPayload::ProfileUpdated { vector } => state.style = Some(*vector),
            EventPayload::TestIssued {
                concept_id,
                phase,
                instance,
            } => {
                let seen = state.seen_questions.entry(concept_id.clone()).or_default();
                if instance.reset_occurred {
                    seen.clear();
                }
                seen.extend(instance.question_ids().map(String::from));
                let record = mastery_entry(state, concept_id);
                if record.status == MasteryStatus::NotStarted {
                    record.status = MasteryStatus::InProgress;
                }
                let test_id = instance.test_id.clone();
                let next = match phase {
                    TestPhase::PreTest => SessionPhase::AwaitingPreTest { test_id },
                    TestPhase::PostTest => SessionPhase::AwaitingPostTest { test_id },
                };
                set_phase(state, next, Some(concept_id));
                state.pending_test = Some(instance.clone());
                state.pending_answers.clear();
            }
            EventPayload::AnswerRecorded {
                question_id, choice, ..
            } => {
                state.pending_answers.insert(question_id.clone(), *choice);
            }
            EventPayload::TestScored {
                concept_id,
                phase,
                result,
            } => {
                state.pending_test = None;
                state.pending_answers.clear();
                let passes = self.passes(result);
                let record = mastery_entry(state, concept_id);
                if record.status == MasteryStatus::Mastered {
                    return;
                }
                match phase {
                    TestPhase::PreTest => record.pre_level = Some(result.level),
                    TestPhase::PostTest => {
                        record.attempts += 1;
                        record.post_level = Some(result.level);
                        record.conceptual_level = Some(result.conceptual_level);
                        record.objective_level = Some(result.objective_level);
                        record.status = if passes {
                            MasteryStatus::Mastered
                        } else {
                            MasteryStatus::InProgress
                        };
                    }
                }
            }
            EventPayload::LessonDelivered { concept_id, style } => {
                mastery_entry(state, concept_id).lesson_style = Some(*style);
                set_phase(
                    state,
                    SessionPhase::InLesson {
                        concept_id: concept_id.clone(),
                        style: *style,
                    },
                    Some(concept_id),
                );
            }
            EventPayload::ConceptAdvanced { concept_id } => {
                if let Some(session) = state.current_session.as_mut() {
                    session.active_concept = Some(concept_id.clone());
                }
            }
            EventPayload::RemediationStarted { concept_id, attempt_no } => {
                let record = mastery_entry(state, concept_id);
                record.remediations = record.remediations.max(*attempt_no);
            }
            EventPayload::CourseCompleted => set_phase(state, SessionPhase::Completed, None),
            EventPayload::Unknown => {}
        }
    }

    pub fn rebuild<'a>(&self, events: impl IntoIterator<Item = &'a LearnerEvent>) -> Result<LearnerState, ModelError> {
        let mut state = LearnerState::default();
        for event in events {
            self.apply_in_place(&mut state, event)?;
        }
        Ok(state)
    }
}

fn mastery_entry<'a>(state: &'a mut LearnerState, concept_id: &str) -> &'a mut MasteryRecord {
    state
        .mastery
        .entry(concept_id.into())
        .or_insert_with(|| MasteryRecord::new(concept_id))
}

/// Apply one event with the default modeler.
pub fn apply_event(state: &LearnerState, event: &LearnerEvent) -> Result<LearnerState, ModelError> {
    Modeler::default().apply(state, event)
}

/// Fold `events` from the empty state with the default modeler.
pub fn rebuild(events: &[LearnerEvent]) -> Result<LearnerState, ModelError> {
    Modeler::default().rebuild(events)
}

/// Assigns sequence numbers and applies events as they are produced, so a
/// batch can be built against the state it will produce.
#[derive(Debug, Clone)]
pub struct EventBatch {
    modeler: Modeler,
    state: LearnerState,
    learner_id: String,
    timestamp: u64,
    events: Vec<LearnerEvent>,
}

impl EventBatch {
    pub fn new(modeler: Modeler, state: LearnerState, learner_id: &str, timestamp: u64) -> Self {
        Self {
            modeler,
            state,
            learner_id: learner_id.into(),
            timestamp,
            events: Vec::new(),
        }
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn modeler(&self) -> &Modeler {
        &self.modeler
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn push(&mut self, payload: EventPayload) -> Result<(), ModelError> {
        let event = LearnerEvent {
            sequence_no: self.state.next_sequence_no(),
            learner_id: self.learner_id.clone(),
            timestamp: self.timestamp,
            payload,
        };
        self.modeler.apply_in_place(&mut self.state, &event)?;
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[LearnerEvent] {
        &self.events
    }

    pub fn finish(self) -> (LearnerState, Vec<LearnerEvent>) {
        (self.state, self.events)
    }
}
