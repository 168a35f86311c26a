//! Pre-/post-test generation, scoring and knowledge-level classification.
//!
//! Scores are normalized to integers in 0..=100 and mapped onto five bands:
//!
//! | level      | score   |
//! |------------|---------|
//! | Excellent  | 86-100  |
//! | Very good  | 71-85   |
//! | Good       | 51-70   |
//! | Average    | 31-50   |
//! | Weak       | 0-30    |
//!
//! Question selection never repeats a question the learner has already seen
//! for the concept (unless the unseen pool is too small, in which case the
//! seen set is reset and the instance is flagged), covers every section when
//! the count allows, and aims for a difficulty mix of 50% at the learner's
//! level and 25% one band either side.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::knowledge::{EvalKind, Question};
use crate::style::LearningStyle;

/// Knowledge level of a learner, and difficulty level of a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Weak,
    Average,
    Good,
    VeryGood,
    Excellent,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::Weak,
        Level::Average,
        Level::Good,
        Level::VeryGood,
        Level::Excellent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn lower(self) -> Level {
        Level::ALL[self.index().saturating_sub(1)]
    }

    pub fn higher(self) -> Level {
        Level::ALL[(self.index() + 1).min(4)]
    }

    fn distance(self, other: Level) -> usize {
        self.index().abs_diff(other.index())
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Weak => "Weak",
            Level::Average => "Average",
            Level::Good => "Good",
            Level::VeryGood => "VeryGood",
            Level::Excellent => "Excellent",
        }
    }
}

impl core::fmt::Display for Level {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Level {
    type Err = AssessmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| AssessmentError::UnknownLevel(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TestPhase {
    PreTest,
    PostTest,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssessmentError {
    #[error("score {0} is outside 0..=100")]
    OutOfRange(u32),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("question bank is empty")]
    EmptyBank,
    #[error("question count must be at least 1")]
    ZeroCount,
    #[error("{requested} questions requested but the bank holds {available}")]
    InfeasibleCount { requested: usize, available: usize },
    #[error("no answer for question `{0}`")]
    MissingAnswer(String),
    #[error("question `{0}` is not part of this test")]
    UnknownQuestion(String),
}

/// Table of score bands, highest first.
pub const LEVEL_BANDS: [(u32, u32, Level); 5] = [
    (86, 100, Level::Excellent),
    (71, 85, Level::VeryGood),
    (51, 70, Level::Good),
    (31, 50, Level::Average),
    (0, 30, Level::Weak),
];

pub fn classify_level(score: u32) -> Result<Level, AssessmentError> {
    match score {
        86..=100 => Ok(Level::Excellent),
        71..=85 => Ok(Level::VeryGood),
        51..=70 => Ok(Level::Good),
        31..=50 => Ok(Level::Average),
        0..=30 => Ok(Level::Weak),
        _ => Err(AssessmentError::OutOfRange(score)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpec {
    pub concept_id: String,
    pub phase: TestPhase,
    pub question_count: usize,
    pub learner_level: Level,
    pub style: LearningStyle,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedQuestion {
    pub question_id: String,
    pub score_weight: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestInstance {
    pub test_id: String,
    pub concept_id: String,
    pub phase: TestPhase,
    pub learner_level: Level,
    /// Presentation order.
    pub questions: Vec<IssuedQuestion>,
    pub reset_occurred: bool,
    pub issued_at: u64,
}

impl TestInstance {
    pub fn question_ids(&self) -> impl Iterator<Item = &str> {
        self.questions.iter().map(|q| q.question_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub question_id: String,
    pub choice: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_id: String,
    pub answers: Vec<AnswerOutcome>,
    pub total_score: u32,
    pub conceptual_score: u32,
    pub objective_score: u32,
    pub level: Level,
    pub conceptual_level: Level,
    pub objective_level: Level,
    /// The test had no conceptual questions; the sub-score is 100 by
    /// convention.
    pub conceptual_vacuous: bool,
    pub objective_vacuous: bool,
}

/// Default number of questions for a test: `max(10, sections)`, capped at the
/// bank size.
pub fn default_question_count(bank_size: usize, section_count: usize) -> usize {
    10.max(section_count).min(bank_size)
}

/// Per-level targets for a test of `count` questions centered on `level`:
/// half at the level, a quarter one band below and above. Bands beyond the
/// ends of the scale fold into the center.
pub fn difficulty_targets(count: usize, level: Level) -> [usize; 5] {
    let at = count.div_ceil(2);
    let rest = count - at;
    let below = rest.div_ceil(2);
    let above = rest - below;
    let mut targets = [0usize; 5];
    targets[level.index()] += at;
    targets[level.lower().index()] += below;
    targets[level.higher().index()] += above;
    targets
}

fn mix_seed(seed: u64, style: LearningStyle) -> u64 {
    seed ^ (style.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn phase_tag(phase: TestPhase) -> &'static str {
    match phase {
        TestPhase::PreTest => "pre",
        TestPhase::PostTest => "post",
    }
}

/// Draw a test from `bank` for `spec`. The result is fully determined by the
/// inputs; `issued_at` is left at zero for the caller to stamp.
pub fn select_questions(
    bank: &[Question],
    spec: &TestSpec,
    already_seen: &BTreeSet<String>,
) -> Result<TestInstance, AssessmentError> {
    if bank.is_empty() {
        return Err(AssessmentError::EmptyBank);
    }
    if spec.question_count == 0 {
        return Err(AssessmentError::ZeroCount);
    }
    let count = spec.question_count;
    if count > bank.len() {
        return Err(AssessmentError::InfeasibleCount {
            requested: count,
            available: bank.len(),
        });
    }

    let mut pool: Vec<&Question> = bank.iter().collect();
    pool.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    pool.dedup_by(|a, b| a.question_id == b.question_id);
    if count > pool.len() {
        return Err(AssessmentError::InfeasibleCount {
            requested: count,
            available: pool.len(),
        });
    }
    let unseen: Vec<&Question> = pool
        .iter()
        .copied()
        .filter(|q| !already_seen.contains(&q.question_id))
        .collect();
    let (mut available, reset_occurred) = if unseen.len() >= count {
        (unseen, false)
    } else {
        (pool, true)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.rng_seed, spec.style));
    available.shuffle(&mut rng);

    let targets = difficulty_targets(count, spec.learner_level);
    let chosen = choose(&available, count, spec.learner_level, &targets);

    let questions = chosen
        .into_iter()
        .map(|i| IssuedQuestion {
            question_id: available[i].question_id.clone(),
            score_weight: available[i].score_weight,
        })
        .collect();
    Ok(TestInstance {
        test_id: format!("{}:{}:{:016x}", spec.concept_id, phase_tag(spec.phase), spec.rng_seed),
        concept_id: spec.concept_id.clone(),
        phase: spec.phase,
        learner_level: spec.learner_level,
        questions,
        reset_occurred,
        issued_at: 0,
    })
}

/// Pick `count` indices into `available` (already in shuffled order) and
/// return them in that order.
///
/// The on-target part is a max flow: source -> level (capacity = target) ->
/// question -> section -> sink. When every section must be covered, each
/// section has a unit edge to the sink plus an overflow edge through a shared
/// node whose capacity is the number of free slots, so matched questions
/// never crowd out a section's representative.
fn choose(available: &[&Question], count: usize, center: Level, targets: &[usize; 5]) -> Vec<usize> {
    let sections: Vec<&str> = {
        let set: BTreeSet<&str> = available.iter().map(|q| q.section_id.as_str()).collect();
        set.into_iter().collect()
    };
    let section_of = |q: &Question| sections.binary_search(&q.section_id.as_str()).unwrap_or(0);
    let cover = count >= sections.len();

    const SOURCE: usize = 0;
    const SINK: usize = 1;
    const OVERFLOW: usize = 2;
    let level_node = |l: usize| 3 + l;
    let question_node = |i: usize| 8 + i;
    let section_node = |s: usize| 8 + available.len() + s;
    let mut flow = FlowGraph::new(8 + available.len() + sections.len());

    for (l, &target) in targets.iter().enumerate() {
        if target > 0 {
            flow.add_edge(SOURCE, level_node(l), target);
        }
    }
    let mut question_edges = Vec::with_capacity(available.len());
    for (i, q) in available.iter().enumerate() {
        question_edges.push(flow.add_edge(level_node(q.level.index()), question_node(i), 1));
        flow.add_edge(question_node(i), section_node(section_of(q)), 1);
    }
    for s in 0..sections.len() {
        if cover {
            flow.add_edge(section_node(s), SINK, 1);
            flow.add_edge(section_node(s), OVERFLOW, count);
        } else {
            flow.add_edge(section_node(s), SINK, count);
        }
    }
    if cover {
        flow.add_edge(OVERFLOW, SINK, count - sections.len());
    }
    flow.max_flow(SOURCE, SINK);

    let mut selected = vec![false; available.len()];
    let mut covered = vec![false; sections.len()];
    let mut total = 0;
    for (i, edge) in question_edges.into_iter().enumerate() {
        if flow.flow_on(edge) > 0 {
            selected[i] = true;
            covered[section_of(available[i])] = true;
            total += 1;
        }
    }

    let closeness = |i: usize| (available[i].level.distance(center), i);
    if cover {
        #[allow(clippy::needless_range_loop)] // `covered` is also written inside
        for s in 0..sections.len() {
            if covered[s] {
                continue;
            }
            let pick = (0..available.len())
                .filter(|&i| !selected[i] && section_of(available[i]) == s)
                .min_by_key(|&i| closeness(i));
            if let Some(i) = pick {
                selected[i] = true;
                covered[s] = true;
                total += 1;
            }
        }
    }
    let mut per_level = [0usize; 5];
    for (i, q) in available.iter().enumerate() {
        if selected[i] {
            per_level[q.level.index()] += 1;
        }
    }
    while total < count {
        let pick = (0..available.len()).filter(|&i| !selected[i]).min_by_key(|&i| {
            let l = available[i].level.index();
            let open = per_level[l] < targets[l];
            let new_section = !covered[section_of(available[i])];
            (!open, !new_section, closeness(i))
        });
        let Some(i) = pick else { break };
        selected[i] = true;
        covered[section_of(available[i])] = true;
        per_level[available[i].level.index()] += 1;
        total += 1;
    }

    (0..available.len()).filter(|&i| selected[i]).collect()
}

struct FlowEdge {
    to: usize,
    cap: usize,
    initial: usize,
}

/// Minimal augmenting-path max flow; graphs here have a few dozen nodes.
struct FlowGraph {
    edges: Vec<FlowEdge>,
    adjacency: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adjacency: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: usize) -> usize {
        let id = self.edges.len();
        self.edges.push(FlowEdge { to, cap, initial: cap });
        self.adjacency[from].push(id);
        self.edges.push(FlowEdge {
            to: from,
            cap: 0,
            initial: 0,
        });
        self.adjacency[to].push(id + 1);
        id
    }

    fn flow_on(&self, edge: usize) -> usize {
        self.edges[edge].initial - self.edges[edge].cap
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> usize {
        let mut total = 0;
        loop {
            let mut visited = vec![false; self.adjacency.len()];
            let pushed = self.augment(source, sink, usize::MAX, &mut visited);
            if pushed == 0 {
                return total;
            }
            total += pushed;
        }
    }

    fn augment(&mut self, node: usize, sink: usize, limit: usize, visited: &mut [bool]) -> usize {
        if node == sink {
            return limit;
        }
        visited[node] = true;
        for k in 0..self.adjacency[node].len() {
            let e = self.adjacency[node][k];
            let (to, cap) = (self.edges[e].to, self.edges[e].cap);
            if cap == 0 || visited[to] {
                continue;
            }
            let pushed = self.augment(to, sink, limit.min(cap), visited);
            if pushed > 0 {
                self.edges[e].cap -= pushed;
                self.edges[e ^ 1].cap += pushed;
                return pushed;
            }
        }
        0
    }
}

/// `round(100 * earned / max)` with halves rounded up; an empty subset
/// scores 100.
fn normalized(earned: u64, max: u64) -> u32 {
    if max == 0 {
        return 100;
    }
    ((200 * earned + max) / (2 * max)) as u32
}

/// Score a submitted test. `answers` must cover exactly the instance's
/// questions; weights come from the instance snapshot.
pub fn score_test(
    instance: &TestInstance,
    answers: &BTreeMap<String, usize>,
    bank: &[Question],
) -> Result<TestResult, AssessmentError> {
    let issued: BTreeSet<&str> = instance.question_ids().collect();
    if let Some(extra) = answers.keys().find(|id| !issued.contains(id.as_str())) {
        return Err(AssessmentError::UnknownQuestion(extra.clone()));
    }

    let mut outcomes = Vec::with_capacity(instance.questions.len());
    // (earned, max) per total / conceptual / objective
    let mut sums = [(0u64, 0u64); 3];
    for issued in &instance.questions {
        let question = bank
            .iter()
            .find(|q| q.question_id == issued.question_id)
            .ok_or_else(|| AssessmentError::UnknownQuestion(issued.question_id.clone()))?;
        let choice = *answers
            .get(&issued.question_id)
            .ok_or_else(|| AssessmentError::MissingAnswer(issued.question_id.clone()))?;
        let correct = choice == question.correct_index;
        let weight = u64::from(issued.score_weight);
        let earned = if correct { weight } else { 0 };
        let sub = match question.eval_kind {
            EvalKind::Conceptual => 1,
            EvalKind::Objective => 2,
        };
        for slot in [0, sub] {
            sums[slot].0 += earned;
            sums[slot].1 += weight;
        }
        outcomes.push(AnswerOutcome {
            question_id: issued.question_id.clone(),
            choice,
            correct,
        });
    }

    let total_score = normalized(sums[0].0, sums[0].1);
    let conceptual_score = normalized(sums[1].0, sums[1].1);
    let objective_score = normalized(sums[2].0, sums[2].1);
    Ok(TestResult {
        test_id: instance.test_id.clone(),
        answers: outcomes,
        total_score,
        conceptual_score,
        objective_score,
        level: classify_level(total_score)?,
        conceptual_level: classify_level(conceptual_score)?,
        objective_level: classify_level(objective_score)?,
        conceptual_vacuous: sums[1].1 == 0,
        objective_vacuous: sums[2].1 == 0,
    })
}

/// The (conceptual, objective) levels of a result.
pub fn evaluation_levels(result: &TestResult) -> (Level, Level) {
    (result.conceptual_level, result.objective_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::fixtures::question;
    use alloc::string::ToString;
    use proptest::prelude::*;
    use EvalKind::*;

    #[test]
    fn band_boundaries() {
        let cases = [
            (86, Level::Excellent),
            (85, Level::VeryGood),
            (71, Level::VeryGood),
            (70, Level::Good),
            (51, Level::Good),
            (50, Level::Average),
            (31, Level::Average),
            (100, Level::Excellent),
        ];
        for (score, level) in cases {
            assert_eq!(classify_level(score).unwrap(), level, "score {score}");
        }
        assert_eq!(classify_level(0).unwrap(), Level::Weak);
        assert_eq!(classify_level(30).unwrap(), Level::Weak);
        assert_eq!(classify_level(101), Err(AssessmentError::OutOfRange(101)));
    }

    #[test]
    fn targets_split() {
        assert_eq!(difficulty_targets(10, Level::Good), [0, 3, 5, 2, 0]);
        assert_eq!(difficulty_targets(4, Level::Good), [0, 1, 2, 1, 0]);
        assert_eq!(difficulty_targets(1, Level::Good), [0, 0, 1, 0, 0]);
        // clamped at the ends
        assert_eq!(difficulty_targets(4, Level::Weak), [3, 1, 0, 0, 0]);
        assert_eq!(difficulty_targets(4, Level::Excellent), [0, 0, 0, 1, 3]);
        assert_eq!(default_question_count(12, 3), 10);
        assert_eq!(default_question_count(8, 3), 8);
        assert_eq!(default_question_count(40, 14), 14);
    }

    fn spec(count: usize, seed: u64) -> TestSpec {
        TestSpec {
            concept_id: "c".into(),
            phase: TestPhase::PreTest,
            question_count: count,
            learner_level: Level::Good,
            style: LearningStyle::SensationSeeking,
            rng_seed: seed,
        }
    }

    #[test]
    fn one_question_per_section_with_exact_fit() {
        let bank = vec![
            question("a1", "c", "s1", Level::Good, 1, Conceptual),
            question("a2", "c", "s1", Level::Good, 1, Conceptual),
            question("b1", "c", "s2", Level::Good, 1, Conceptual),
            question("b2", "c", "s2", Level::Good, 1, Conceptual),
        ];
        for seed in 0..20 {
            let t = select_questions(&bank, &spec(2, seed), &BTreeSet::new()).unwrap();
            let sections: BTreeSet<_> = t
                .question_ids()
                .map(|id| bank.iter().find(|q| q.question_id == id).unwrap().section_id.clone())
                .collect();
            assert_eq!(sections.len(), 2);
            assert!(!t.reset_occurred);
        }
    }

    #[test]
    fn exhausted_bank_resets() {
        let bank = vec![
            question("q1", "c", "s", Level::Good, 1, Conceptual),
            question("q2", "c", "s", Level::Good, 1, Conceptual),
            question("q3", "c", "s", Level::Good, 1, Conceptual),
        ];
        let seen: BTreeSet<String> = ["q1", "q2", "q3"].iter().map(|s| s.to_string()).collect();
        let t = select_questions(&bank, &spec(2, 7), &seen).unwrap();
        assert_eq!(t.questions.len(), 2);
        assert!(t.reset_occurred);
    }

    #[test]
    fn selection_errors() {
        assert_eq!(
            select_questions(&[], &spec(1, 0), &BTreeSet::new()),
            Err(AssessmentError::EmptyBank)
        );
        let bank = vec![question("q1", "c", "s", Level::Good, 1, Conceptual)];
        assert_eq!(
            select_questions(&bank, &spec(2, 0), &BTreeSet::new()),
            Err(AssessmentError::InfeasibleCount {
                requested: 2,
                available: 1
            })
        );
        assert_eq!(
            select_questions(&bank, &spec(0, 0), &BTreeSet::new()),
            Err(AssessmentError::ZeroCount)
        );
    }

    #[test]
    fn mix_follows_targets_when_bank_allows() {
        let mut bank = Vec::new();
        for level in Level::ALL {
            for k in 0..4 {
                bank.push(question(&format!("{level}{k}"), "c", "s", level, 1, Conceptual));
            }
        }
        let t = select_questions(&bank, &spec(8, 3), &BTreeSet::new()).unwrap();
        let mut per_level = [0; 5];
        for id in t.question_ids() {
            per_level[bank.iter().find(|q| q.question_id == id).unwrap().level.index()] += 1;
        }
        assert_eq!(per_level, difficulty_targets(8, Level::Good));
    }

    fn instance(ids: &[(&str, u32)]) -> TestInstance {
        TestInstance {
            test_id: "t".into(),
            concept_id: "c".into(),
            phase: TestPhase::PostTest,
            learner_level: Level::Good,
            questions: ids
                .iter()
                .map(|(id, w)| IssuedQuestion {
                    question_id: id.to_string(),
                    score_weight: *w,
                })
                .collect(),
            reset_occurred: false,
            issued_at: 0,
        }
    }

    fn answers(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn scoring_bounds_and_weighted_normalization() {
        let bank = vec![
            question("q1", "c", "s", Level::Good, 3, Conceptual),
            question("q2", "c", "s", Level::Good, 1, Objective),
        ];
        let inst = instance(&[("q1", 3), ("q2", 1)]);

        let all_right = score_test(&inst, &answers(&[("q1", 0), ("q2", 0)]), &bank).unwrap();
        assert_eq!((all_right.total_score, all_right.level), (100, Level::Excellent));

        let all_wrong = score_test(&inst, &answers(&[("q1", 1), ("q2", 1)]), &bank).unwrap();
        assert_eq!((all_wrong.total_score, all_wrong.level), (0, Level::Weak));

        // round(100 * 3 / 4) = 75
        let heavy_only = score_test(&inst, &answers(&[("q1", 0), ("q2", 1)]), &bank).unwrap();
        assert_eq!(heavy_only.total_score, 75);
        assert_eq!(heavy_only.level, classify_level(75).unwrap());
        assert_eq!(heavy_only.level, Level::VeryGood);
        assert_eq!(evaluation_levels(&heavy_only), (Level::Excellent, Level::Weak));
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(normalized(1, 8), 13); // 12.5
        assert_eq!(normalized(1, 3), 33);
        assert_eq!(normalized(2, 3), 67);
        assert_eq!(normalized(0, 0), 100);
    }

    #[test]
    fn empty_subset_is_vacuous_mastery() {
        let bank = vec![question("q1", "c", "s", Level::Good, 2, Conceptual)];
        let r = score_test(&instance(&[("q1", 2)]), &answers(&[("q1", 0)]), &bank).unwrap();
        assert_eq!(evaluation_levels(&r), (Level::Excellent, Level::Excellent));
        assert!(r.objective_vacuous && !r.conceptual_vacuous);
        assert_eq!(r.objective_score, 100);
    }

    #[test]
    fn scoring_errors() {
        let bank = vec![question("q1", "c", "s", Level::Good, 1, Conceptual)];
        let inst = instance(&[("q1", 1)]);
        assert_eq!(
            score_test(&inst, &answers(&[]), &bank),
            Err(AssessmentError::MissingAnswer("q1".into()))
        );
        assert_eq!(
            score_test(&inst, &answers(&[("q1", 0), ("zz", 0)]), &bank),
            Err(AssessmentError::UnknownQuestion("zz".into()))
        );
        let ghost = instance(&[("gone", 1)]);
        assert_eq!(
            score_test(&ghost, &answers(&[("gone", 0)]), &bank),
            Err(AssessmentError::UnknownQuestion("gone".into()))
        );
    }

    proptest! {
        #[test]
        fn classify_matches_band_scan(score in 0u32..=100) {
            let expected: Vec<Level> = LEVEL_BANDS
                .iter()
                .filter(|(lo, hi, _)| (*lo..=*hi).contains(&score))
                .map(|(_, _, l)| *l)
                .collect();
            prop_assert_eq!(expected.len(), 1);
            prop_assert_eq!(classify_level(score).unwrap(), expected[0]);
        }

        #[test]
        fn classify_is_monotone(a in 0u32..=100, b in 0u32..=100) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify_level(lo).unwrap() <= classify_level(hi).unwrap());
        }

        #[test]
        fn total_is_100_iff_all_correct(
            qs in prop::collection::vec((1u32..5, any::<bool>(), any::<bool>()), 1..10)
        ) {
            let bank: Vec<Question> = qs
                .iter()
                .enumerate()
                .map(|(i, (w, objective, _))| {
                    question(&format!("q{i}"), "c", "s", Level::Good, *w, if *objective { Objective } else { Conceptual })
                })
                .collect();
            let ids: Vec<(String, u32)> = bank.iter().map(|q| (q.question_id.clone(), q.score_weight)).collect();
            let id_refs: Vec<(&str, u32)> = ids.iter().map(|(s, w)| (s.as_str(), *w)).collect();
            let inst = instance(&id_refs);
            let ans: BTreeMap<String, usize> = qs
                .iter()
                .enumerate()
                .map(|(i, (_, _, right))| (format!("q{i}"), if *right { 0 } else { 1 }))
                .collect();
            let r = score_test(&inst, &ans, &bank).unwrap();
            let all_right = qs.iter().all(|(_, _, right)| *right);
            prop_assert_eq!(r.total_score == 100, all_right);
            prop_assert!(r.conceptual_score <= 100 && r.objective_score <= 100);
        }
    }
}
