//! Synthetic-learner cohorts, run through the tutor in process.
//!
//! Each learner answers every question correctly with probability
//! `ability`, independently, and fills in the questionnaire leaning towards
//! its `style_bias`. Learners are seeded from the run seed and their index,
//! so a cohort runs in parallel yet produces exactly the serial result.

use std::collections::BTreeMap;

use polytutor_core::assessment::Level;
use polytutor_core::learner::{LearnerEvent, LearnerState, MasteryStatus};
use polytutor_core::style::LearningStyle;
use polytutor_core::translation::LanguageCode;
use polytutor_core::tutor::{derive_seed, Step, Turn, Tutor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_STEP_CAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulateError {
    #[error("cohort must have at least one learner")]
    EmptyCohort,
    #[error("ability {0} is outside [0, 1]")]
    AbilityOutOfRange(f64),
    #[error("at least one learner language is required")]
    NoLanguages,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub count: usize,
    pub ability: f64,
    pub seed: u64,
    /// Learner actions allowed before a learner is abandoned.
    pub step_cap: u64,
    /// Learner languages, drawn uniformly.
    pub languages: Vec<LanguageCode>,
}

impl CohortSpec {
    pub fn new(count: usize, ability: f64, seed: u64, languages: Vec<LanguageCode>) -> Self {
        Self {
            count,
            ability,
            seed,
            step_cap: DEFAULT_STEP_CAP,
            languages,
        }
    }

    fn validate(&self) -> Result<(), SimulateError> {
        if self.count == 0 {
            return Err(SimulateError::EmptyCohort);
        }
        if !(0.0..=1.0).contains(&self.ability) {
            return Err(SimulateError::AbilityOutOfRange(self.ability));
        }
        if self.languages.is_empty() {
            return Err(SimulateError::NoLanguages);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLearner {
    pub learner_id: String,
    pub ability: f64,
    pub style_bias: LearningStyle,
    pub language: LanguageCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRow {
    pub learner: SyntheticLearner,
    /// Concepts in course order with their final status.
    pub concepts: Vec<ConceptRow>,
    pub concepts_mastered: usize,
    pub steps: u64,
    pub completed: bool,
    pub step_cap_exceeded: bool,
    /// Set when the tutor rejected a step; the learner stops there.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptRow {
    pub concept_id: String,
    pub status: MasteryStatus,
    /// Post-tests taken.
    pub attempts: u32,
    pub pre_level: Option<Level>,
    pub post_level: Option<Level>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub learners: usize,
    pub concepts: usize,
    pub ability: f64,
    pub seed: u64,
    /// Mastered (learner, concept) pairs over all pairs.
    pub mastery_rate: f64,
    /// Mean post-test attempts over (learner, concept) pairs with at least
    /// one attempt; 0 when there are none.
    pub mean_attempts: f64,
    pub completed: usize,
    pub step_cap_exceeded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub rows: Vec<LearnerRow>,
    pub summary: CohortSummary,
}

impl CohortReport {
    pub fn from_rows(rows: Vec<LearnerRow>, ability: f64, seed: u64) -> Self {
        let concepts = rows.first().map_or(0, |r| r.concepts.len());
        let pairs = rows.len() * concepts;
        let mastered: usize = rows.iter().map(|r| r.concepts_mastered).sum();
        let attempted: Vec<u32> = rows
            .iter()
            .flat_map(|r| r.concepts.iter().map(|c| c.attempts))
            .filter(|&a| a > 0)
            .collect();
        let mean_attempts = if attempted.is_empty() {
            0.0
        } else {
            attempted.iter().map(|&a| f64::from(a)).sum::<f64>() / attempted.len() as f64
        };
        let summary = CohortSummary {
            learners: rows.len(),
            concepts,
            ability,
            seed,
            mastery_rate: if pairs == 0 {
                0.0
            } else {
                mastered as f64 / pairs as f64
            },
            mean_attempts,
            completed: rows.iter().filter(|r| r.completed).count(),
            step_cap_exceeded: rows.iter().filter(|r| r.step_cap_exceeded).count(),
        };
        Self { rows, summary }
    }

    /// One `{"type":"learner",..}` line per row, then one
    /// `{"type":"summary",..}` line.
    pub fn to_ndjson(&self) -> String {
        #[derive(Serialize)]
        #[serde(tag = "type", rename_all = "snake_case")]
        enum Line<'a> {
            Learner(&'a LearnerRow),
            Summary(&'a CohortSummary),
        }
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(&Line::Learner(row)).expect("row serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&Line::Summary(&self.summary)).expect("summary serializes"));
        out.push('\n');
        out
    }
}

/// A simulated learner's complete history.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerRun {
    pub row: LearnerRow,
    pub events: Vec<LearnerEvent>,
    pub state: LearnerState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub report: CohortReport,
    pub runs: Vec<LearnerRun>,
}

impl Simulation {
    /// Every event, learner by learner.
    pub fn events(&self) -> impl Iterator<Item = &LearnerEvent> {
        self.runs.iter().flat_map(|r| r.events.iter())
    }
}

pub fn simulate(tutor: &Tutor, spec: &CohortSpec) -> Result<Simulation, SimulateError> {
    spec.validate()?;
    let runs: Vec<LearnerRun> = (0..spec.count)
        .into_par_iter()
        .map(|i| run_learner(tutor, spec, i))
        .collect();
    let report = CohortReport::from_rows(runs.iter().map(|r| r.row.clone()).collect(), spec.ability, spec.seed);
    Ok(Simulation { report, runs })
}

fn run_learner(tutor: &Tutor, spec: &CohortSpec, index: usize) -> LearnerRun {
    let learner_id = format!("sim-{:05}", index + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &learner_id, 0));
    let learner = SyntheticLearner {
        learner_id: learner_id.clone(),
        ability: spec.ability,
        style_bias: LearningStyle::ALL[rng.gen_range(0..LearningStyle::ALL.len())],
        language: spec.languages[rng.gen_range(0..spec.languages.len())].clone(),
    };
    let mut driver = Driver {
        tutor,
        rng,
        learner: &learner,
        state: LearnerState::default(),
        events: Vec::new(),
        steps: 0,
    };
    let outcome = driver.run(spec.step_cap);
    let (completed, step_cap_exceeded, error) = match outcome {
        Ok(true) => (true, false, None),
        Ok(false) => (false, true, None),
        Err(e) => (false, false, Some(e)),
    };
    let concepts: Vec<ConceptRow> = tutor
        .progress(&driver.state)
        .concepts
        .into_iter()
        .map(|r| ConceptRow {
            concept_id: r.concept_id,
            status: r.status,
            attempts: r.attempts,
            pre_level: r.pre_level,
            post_level: r.post_level,
        })
        .collect();
    let row = LearnerRow {
        concepts_mastered: concepts.iter().filter(|c| c.status == MasteryStatus::Mastered).count(),
        concepts,
        learner: learner.clone(),
        steps: driver.steps,
        completed,
        step_cap_exceeded,
        error,
    };
    LearnerRun {
        row,
        events: driver.events,
        state: driver.state,
    }
}

struct Driver<'a> {
    tutor: &'a Tutor,
    rng: ChaCha8Rng,
    learner: &'a SyntheticLearner,
    state: LearnerState,
    events: Vec<LearnerEvent>,
    steps: u64,
}

impl Driver<'_> {
    /// `Ok(true)` on course completion, `Ok(false)` at the step cap.
    fn run(&mut self, step_cap: u64) -> Result<bool, String> {
        let turn = self
            .tutor
            .register(&self.learner.learner_id, self.learner.language.clone(), 0)
            .map_err(|e| e.to_string())?;
        self.absorb(turn.events, turn.state);
        while self.steps < step_cap {
            let now = self.steps + 1;
            let Turn { step, events, state } = self.tutor.next_step(&self.state, now).map_err(|e| e.to_string())?;
            self.absorb(events, state);
            match step {
                Step::Completed => return Ok(true),
                Step::Questionnaire => {
                    let responses = self.questionnaire();
                    let outcome = self
                        .tutor
                        .submit_questionnaire(&self.state, &responses, now)
                        .map_err(|e| e.to_string())?;
                    self.absorb(outcome.events, outcome.state);
                }
                Step::Test { instance } => {
                    let answers = self.answers(&instance.concept_id, instance.question_ids());
                    let outcome = self
                        .tutor
                        .submit_test(&self.state, &instance.test_id, &answers, now)
                        .map_err(|e| e.to_string())?;
                    self.absorb(outcome.turn.events, outcome.turn.state);
                }
                Step::Lesson { .. } => {
                    let turn = self
                        .tutor
                        .complete_lesson(&self.state, now)
                        .map_err(|e| e.to_string())?;
                    self.absorb(turn.events, turn.state);
                }
            }
            self.steps += 1;
        }
        Ok(false)
    }

    fn absorb(&mut self, events: Vec<LearnerEvent>, state: LearnerState) {
        self.events.extend(events);
        self.state = state;
    }

    /// Strong agreement with the biased scale, mild answers elsewhere.
    fn questionnaire(&mut self) -> BTreeMap<String, u8> {
        let items = self.tutor.pack().questionnaire();
        items
            .iter()
            .map(|item| {
                let agreement = if item.scale == self.learner.style_bias {
                    5
                } else {
                    self.rng.gen_range(1..=3)
                };
                let raw = if item.reverse_scored { 6 - agreement } else { agreement };
                (item.item_id.clone(), raw)
            })
            .collect()
    }

    fn answers<'q>(&mut self, concept_id: &str, questions: impl Iterator<Item = &'q str>) -> BTreeMap<String, usize> {
        let bank = self.tutor.pack().bank_for(concept_id).unwrap_or(&[]);
        questions
            .filter_map(|id| bank.iter().find(|q| q.question_id == id))
            .map(|q| {
                let choice = if self.rng.gen_bool(self.learner.ability) {
                    q.correct_index
                } else {
                    (q.correct_index + 1) % q.choices.len()
                };
                (q.question_id.clone(), choice)
            })
            .collect()
    }
}
