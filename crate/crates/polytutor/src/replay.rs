//! Offline verification of an event log.
//!
//! Every learner is rebuilt from its events. Besides the model's own checks
//! (contiguous sequence numbers, Registered first, legal phase changes),
//! mastery must never regress: once a concept is Mastered, the log may not
//! remediate it or record a failing post-test for it. Clean learners get a
//! SHA-256 of their canonical state JSON so two replays can be compared.

use std::fmt;

use polytutor_core::assessment::TestPhase;
use polytutor_core::learner::{EventPayload, LearnerEvent, LearnerState, MasteryStatus, ModelError, Modeler};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::eventlog::group_by_learner;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "invariant", rename_all = "snake_case")]
pub enum Violation {
    /// The model rejected an event.
    Model {
        learner_id: String,
        sequence_no: u64,
        kind: &'static str,
        message: String,
    },
    MasteryRegression {
        learner_id: String,
        sequence_no: u64,
        concept_id: String,
        event: &'static str,
    },
    /// State did not survive a serialize/deserialize round trip.
    Serialization { learner_id: String, message: String },
}

impl Violation {
    pub fn learner_id(&self) -> &str {
        match self {
            Violation::Model { learner_id, .. }
            | Violation::MasteryRegression { learner_id, .. }
            | Violation::Serialization { learner_id, .. } => learner_id,
        }
    }

    /// Short invariant name, e.g. `SequenceGap`.
    pub fn name(&self) -> &'static str {
        match self {
            Violation::Model { kind, .. } => kind,
            Violation::MasteryRegression { .. } => "MasteryRegression",
            Violation::Serialization { .. } => "Serialization",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Model {
                learner_id,
                sequence_no,
                kind,
                message,
            } => write!(f, "{kind}: learner {learner_id}, event {sequence_no}: {message}"),
            Violation::MasteryRegression {
                learner_id,
                sequence_no,
                concept_id,
                event,
            } => write!(
                f,
                "MasteryRegression: learner {learner_id}, event {sequence_no}: {event} on mastered concept `{concept_id}`"
            ),
            Violation::Serialization { learner_id, message } => {
                write!(f, "Serialization: learner {learner_id}: {message}")
            }
        }
    }
}

pub fn model_error_kind(e: &ModelError) -> &'static str {
    match e {
        ModelError::SequenceGap { .. } => "SequenceGap",
        ModelError::UnknownPayload => "UnknownPayload",
        ModelError::LearnerMismatch { .. } => "LearnerMismatch",
        ModelError::NotRegistered(_) => "NotRegistered",
        ModelError::AlreadyRegistered => "AlreadyRegistered",
        ModelError::IllegalTransition { .. } => "IllegalTransition",
        ModelError::Inconsistent(_) => "Inconsistent",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LearnerVerdict {
    pub learner_id: String,
    pub events: usize,
    /// Hex SHA-256 of the rebuilt state; absent when verification failed.
    pub state_sha256: Option<String>,
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub learners: Vec<LearnerVerdict>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.learners.iter().all(|l| l.violation.is_none())
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.learners.iter().filter_map(|l| l.violation.as_ref())
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations().next()
    }
}

/// Canonical JSON of a learner state.
pub fn canonical_state(state: &LearnerState) -> String {
    serde_json::to_string(state).expect("learner state serializes")
}

pub fn state_sha256(state: &LearnerState) -> String {
    hex::encode(Sha256::digest(canonical_state(state).as_bytes()))
}

/// Rebuilds one learner, stopping at the first violation.
pub fn verify_learner(
    modeler: &Modeler,
    learner_id: &str,
    events: &[LearnerEvent],
) -> (LearnerState, Option<Violation>) {
    let mut state = LearnerState::default();
    for event in events {
        if let Some(v) = regression(modeler, &state, event) {
            return (state, Some(v));
        }
        let before = mastered(&state);
        if let Err(e) = modeler.apply_in_place(&mut state, event) {
            let v = Violation::Model {
                learner_id: learner_id.into(),
                sequence_no: event.sequence_no,
                kind: model_error_kind(&e),
                message: e.to_string(),
            };
            return (state, Some(v));
        }
        if let Some(lost) = before.into_iter().find(|c| !state.is_mastered(c)) {
            let v = Violation::MasteryRegression {
                learner_id: learner_id.into(),
                sequence_no: event.sequence_no,
                concept_id: lost,
                event: event.payload.kind(),
            };
            return (state, Some(v));
        }
    }
    let round_trip = serde_json::from_str::<LearnerState>(&canonical_state(&state));
    match round_trip {
        Ok(back) if back == state => (state, None),
        Ok(_) => (
            state,
            Some(Violation::Serialization {
                learner_id: learner_id.into(),
                message: "state changed across a JSON round trip".into(),
            }),
        ),
        Err(e) => (
            state,
            Some(Violation::Serialization {
                learner_id: learner_id.into(),
                message: e.to_string(),
            }),
        ),
    }
}

/// Verifies every learner in an interleaved log.
pub fn verify_log(modeler: &Modeler, events: Vec<LearnerEvent>) -> ReplayReport {
    let learners = group_by_learner(events)
        .into_iter()
        .map(|(learner_id, events)| {
            let (state, violation) = verify_learner(modeler, &learner_id, &events);
            LearnerVerdict {
                state_sha256: violation.is_none().then(|| state_sha256(&state)),
                learner_id,
                events: events.len(),
                violation,
            }
        })
        .collect();
    ReplayReport { learners }
}

fn mastered(state: &LearnerState) -> Vec<String> {
    state
        .mastery
        .values()
        .filter(|r| r.status == MasteryStatus::Mastered)
        .map(|r| r.concept_id.clone())
        .collect()
}

/// Events the sticky model would silently absorb but that contradict an
/// earlier mastery.
fn regression(modeler: &Modeler, state: &LearnerState, event: &LearnerEvent) -> Option<Violation> {
    let concept = match &event.payload {
        EventPayload::RemediationStarted { concept_id, .. } => concept_id,
        EventPayload::TestScored {
            concept_id,
            phase: TestPhase::PostTest,
            result,
        } if !modeler.passes(result) => concept_id,
        _ => return None,
    };
    state.is_mastered(concept).then(|| Violation::MasteryRegression {
        learner_id: event.learner_id.clone(),
        sequence_no: event.sequence_no,
        concept_id: concept.clone(),
        event: event.payload.kind(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::demo_pack;
    use crate::simulate::{simulate, CohortSpec};
    use polytutor_core::translation::LanguageCode;
    use polytutor_core::tutor::{Tutor, TutorConfig};

    fn log(ability: f64) -> Vec<LearnerEvent> {
        let tutor = Tutor::new(demo_pack().unwrap(), TutorConfig::default());
        let mut spec = CohortSpec::new(3, ability, 7, vec![LanguageCode::new("en").unwrap()]);
        spec.step_cap = 400;
        simulate(&tutor, &spec).unwrap().events().cloned().collect()
    }

    #[test]
    fn simulated_logs_are_clean_and_hash_stably() {
        let events = log(0.7);
        let a = verify_log(&Modeler::default(), events.clone());
        let b = verify_log(&Modeler::default(), events);
        assert!(a.is_clean(), "{:?}", a.first_violation());
        assert_eq!(a, b);
        assert!(a.learners.iter().all(|l| l.state_sha256.as_ref().unwrap().len() == 64));
    }

    #[test]
    fn deleted_event_is_a_sequence_gap() {
        let mut events = log(1.0);
        events.remove(5);
        let report = verify_log(&Modeler::default(), events);
        let v = report.first_violation().unwrap();
        assert_eq!(v.name(), "SequenceGap");
        assert!(matches!(v, Violation::Model { sequence_no: 7, .. }), "{v}");
    }

    #[test]
    fn remediating_a_mastered_concept_is_a_regression() {
        let mut events = log(1.0);
        let first = &events[0].learner_id.clone();
        let advanced = events
            .iter()
            .position(|e| &e.learner_id == first && matches!(e.payload, EventPayload::ConceptAdvanced { .. }))
            .unwrap();
        let mastered = match events[..advanced].iter().rev().find_map(|e| match &e.payload {
            EventPayload::TestScored { concept_id, .. } => Some(concept_id.clone()),
            _ => None,
        }) {
            Some(c) => c,
            None => panic!("no scored test before advancing"),
        };
        events[advanced].payload = EventPayload::RemediationStarted {
            concept_id: mastered.clone(),
            attempt_no: 1,
        };
        let report = verify_log(&Modeler::default(), events);
        match report.first_violation() {
            Some(Violation::MasteryRegression { concept_id, .. }) => assert_eq!(concept_id, &mastered),
            other => panic!("{other:?}"),
        }
    }
}
