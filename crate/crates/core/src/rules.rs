//! Forward-chaining production rules that pick the next pedagogical action.
//!
//! Working memory holds `(subject, attribute) -> value` facts. Each iteration
//! computes the conflict set (rules whose conditions all hold and that have
//! not already fired on the same values of every fact they read), fires it in
//! `(priority desc, rule_id asc)` order, and applies the assertions. Inference
//! stops at a fixpoint or after `max_iterations`. The returned action is the
//! emission with the highest priority, ties broken by rule id.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::assessment::Level;
use crate::style::LearningStyle;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Level { level: Level },
    Style { style: LearningStyle },
    Str(String),
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    /// Ordering between values of the same kind; `None` across kinds.
    fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Level { level: a }, Value::Level { level: b }) => Some(a.cmp(b)),
            (Value::Style { style: a }, Value::Style { style: b }) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<Level> for Value {
    fn from(level: Level) -> Self {
        Value::Level { level }
    }
}

impl From<LearningStyle> for Value {
    fn from(style: LearningStyle) -> Self {
        Value::Style { style }
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.into())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Level { level } => write!(f, "{level}"),
            Value::Style { style } => write!(f, "{style}"),
            Value::Str(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=", alias = "≠")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ];

    /// Whether `fact <op> constant` holds. Values of different kinds are
    /// only ever unequal.
    pub fn holds(self, fact: &Value, constant: &Value) -> bool {
        match fact.compare(constant) {
            None => self == Comparator::Ne,
            Some(ord) => match self {
                Comparator::Eq => ord == Ordering::Equal,
                Comparator::Ne => ord != Ordering::Equal,
                Comparator::Lt => ord == Ordering::Less,
                Comparator::Le => ord != Ordering::Greater,
                Comparator::Gt => ord == Ordering::Greater,
                Comparator::Ge => ord != Ordering::Less,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub subject: String,
    pub attribute: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub subject: String,
    pub attribute: String,
    pub op: Comparator,
    pub value: Value,
}

impl Condition {
    pub fn new(subject: &str, attribute: &str, op: Comparator, value: impl Into<Value>) -> Self {
        Self {
            subject: subject.into(),
            attribute: attribute.into(),
            op,
            value: value.into(),
        }
    }

    /// A condition on a missing fact never holds.
    pub fn holds(&self, memory: &WorkingMemory) -> bool {
        memory
            .get(&self.subject, &self.attribute)
            .is_some_and(|v| self.op.holds(v, &self.value))
    }
}

/// A constant, or the current value of a fact written `subject.attribute`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Fact { fact: String },
    Const(Value),
}

impl Operand {
    pub fn fact(path: &str) -> Self {
        Operand::Fact { fact: path.into() }
    }

    fn resolve(&self, memory: &WorkingMemory) -> Option<Value> {
        match self {
            Operand::Const(v) => Some(v.clone()),
            Operand::Fact { fact } => {
                let (subject, attribute) = fact.split_once('.')?;
                memory.get(subject, attribute).cloned()
            }
        }
    }
}

impl<T: Into<Value>> From<T> for Operand {
    fn from(v: T) -> Self {
        Operand::Const(v.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    RequestProfile,
    GivePreTest,
    DeliverLesson,
    GivePostTest,
    Remediate,
    AdvanceTo,
    EndCourse,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum PedagogicalAction {
    RequestProfile,
    GivePreTest {
        concept_id: String,
    },
    DeliverLesson {
        concept_id: String,
        style: LearningStyle,
    },
    /// `ease` lowers the learner level used for selection by one band.
    GivePostTest {
        concept_id: String,
        ease: bool,
    },
    Remediate {
        concept_id: String,
        variant_style: LearningStyle,
    },
    AdvanceTo {
        concept_id: String,
    },
    EndCourse,
}

impl PedagogicalAction {
    pub fn kind(&self) -> ActionKind {
        match self {
            PedagogicalAction::RequestProfile => ActionKind::RequestProfile,
            PedagogicalAction::GivePreTest { .. } => ActionKind::GivePreTest,
            PedagogicalAction::DeliverLesson { .. } => ActionKind::DeliverLesson,
            PedagogicalAction::GivePostTest { .. } => ActionKind::GivePostTest,
            PedagogicalAction::Remediate { .. } => ActionKind::Remediate,
            PedagogicalAction::AdvanceTo { .. } => ActionKind::AdvanceTo,
            PedagogicalAction::EndCourse => ActionKind::EndCourse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RuleAction {
    Assert {
        subject: String,
        attribute: String,
        value: Operand,
    },
    Emit {
        action: ActionKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        concept: Option<Operand>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        style: Option<Operand>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ease: Option<Operand>,
    },
}

impl RuleAction {
    pub fn assert(subject: &str, attribute: &str, value: impl Into<Operand>) -> Self {
        RuleAction::Assert {
            subject: subject.into(),
            attribute: attribute.into(),
            value: value.into(),
        }
    }

    pub fn emit(action: ActionKind) -> Self {
        RuleAction::Emit {
            action,
            concept: None,
            style: None,
            ease: None,
        }
    }

    pub fn with_concept(mut self, operand: impl Into<Operand>) -> Self {
        if let RuleAction::Emit { concept, .. } = &mut self {
            *concept = Some(operand.into());
        }
        self
    }

    pub fn with_style(mut self, operand: impl Into<Operand>) -> Self {
        if let RuleAction::Emit { style, .. } = &mut self {
            *style = Some(operand.into());
        }
        self
    }

    pub fn with_ease(mut self, operand: impl Into<Operand>) -> Self {
        if let RuleAction::Emit { ease, .. } = &mut self {
            *ease = Some(operand.into());
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub rule_id: String,
    #[serde(default)]
    pub priority: i64,
    pub conditions: Vec<Condition>,
    pub actions: Vec<RuleAction>,
}

impl Rule {
    pub fn new(rule_id: &str, priority: i64) -> Self {
        Self {
            rule_id: rule_id.into(),
            priority,
            conditions: Vec::new(),
            actions: Vec::new(),
        }
    }

    pub fn when(mut self, subject: &str, attribute: &str, op: Comparator, value: impl Into<Value>) -> Self {
        self.conditions.push(Condition::new(subject, attribute, op, value));
        self
    }

    pub fn then(mut self, action: RuleAction) -> Self {
        self.actions.push(action);
        self
    }

    /// Every fact the rule looks at, in its conditions or its operands,
    /// sorted and deduplicated.
    pub fn reads(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = self
            .conditions
            .iter()
            .map(|c| (c.subject.as_str(), c.attribute.as_str()))
            .collect();
        for action in &self.actions {
            let operands: [Option<&Operand>; 3] = match action {
                RuleAction::Assert { value, .. } => [Some(value), None, None],
                RuleAction::Emit {
                    concept, style, ease, ..
                } => [concept.as_ref(), style.as_ref(), ease.as_ref()],
            };
            for op in operands.into_iter().flatten() {
                if let Operand::Fact { fact } = op {
                    out.push(fact.split_once('.').unwrap_or((fact.as_str(), "")));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn matches(&self, memory: &WorkingMemory) -> bool {
        self.conditions.iter().all(|c| c.holds(memory))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct WorkingMemory {
    facts: BTreeMap<(String, String), Value>,
}

impl WorkingMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or overwrite a fact; returns whether memory changed.
    pub fn assert(&mut self, subject: &str, attribute: &str, value: impl Into<Value>) -> bool {
        let value = value.into();
        let key = (subject.to_string(), attribute.to_string());
        match self.facts.get(&key) {
            Some(existing) if *existing == value => false,
            _ => {
                self.facts.insert(key, value);
                true
            }
        }
    }

    pub fn get(&self, subject: &str, attribute: &str) -> Option<&Value> {
        // BTreeMap<(String, String)> cannot be probed with borrowed strs
        self.facts
            .iter()
            .find(|((s, a), _)| s == subject && a == attribute)
            .map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = Fact> + '_ {
        self.facts.iter().map(|((s, a), v)| Fact {
            subject: s.clone(),
            attribute: a.clone(),
            value: v.clone(),
        })
    }
}

impl FromIterator<Fact> for WorkingMemory {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        let mut memory = WorkingMemory::new();
        for f in iter {
            memory.assert(&f.subject, &f.attribute, f.value);
        }
        memory
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InferError {
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error("inference reached a fixpoint without emitting an action")]
    NoActionEmitted { trace: Vec<String> },
    #[error("no fixpoint within {limit} iterations")]
    IterationLimitExceeded { limit: usize, trace: Vec<String> },
    #[error("rule `{rule_id}` emits {action:?} with a missing or ill-typed `{argument}`")]
    BadArgument {
        rule_id: String,
        action: ActionKind,
        argument: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inference {
    pub action: PedagogicalAction,
    /// Rule ids in firing order.
    pub trace: Vec<String>,
    pub iterations: usize,
    pub memory: WorkingMemory,
}

/// Run forward chaining over `rules` starting from `facts`.
pub fn infer(rules: &[Rule], facts: &WorkingMemory, max_iterations: usize) -> Result<Inference, InferError> {
    if max_iterations == 0 {
        return Err(InferError::ZeroIterations);
    }
    let mut order: Vec<usize> = (0..rules.len()).collect();
    order.sort_by(|&a, &b| {
        rules[b]
            .priority
            .cmp(&rules[a].priority)
            .then_with(|| rules[a].rule_id.cmp(&rules[b].rule_id))
    });

    let mut memory = facts.clone();
    let reads: Vec<Vec<(&str, &str)>> = rules.iter().map(Rule::reads).collect();
    let instantiation = |r: usize, memory: &WorkingMemory| -> (usize, Vec<Option<Value>>) {
        (r, reads[r].iter().map(|(s, a)| memory.get(s, a).cloned()).collect())
    };
    let mut fired: BTreeSet<(usize, Vec<Option<Value>>)> = BTreeSet::new();
    let mut trace = Vec::new();
    // (priority, rule index, action); earlier emissions win exact ties
    let mut best: Option<(i64, usize, PedagogicalAction)> = None;
    let mut iterations = 0;

    let conflict_set = |memory: &WorkingMemory, fired: &BTreeSet<(usize, Vec<Option<Value>>)>| -> Vec<usize> {
        order
            .iter()
            .copied()
            .filter(|&r| rules[r].matches(memory) && !fired.contains(&instantiation(r, memory)))
            .collect()
    };

    loop {
        let agenda = conflict_set(&memory, &fired);
        if agenda.is_empty() {
            break;
        }
        if iterations == max_iterations {
            return Err(InferError::IterationLimitExceeded {
                limit: max_iterations,
                trace,
            });
        }
        iterations += 1;
        let snapshot = memory.clone();
        for r in agenda {
            let rule = &rules[r];
            fired.insert(instantiation(r, &snapshot));
            trace.push(rule.rule_id.clone());
            for action in &rule.actions {
                match action {
                    RuleAction::Assert {
                        subject,
                        attribute,
                        value,
                    } => {
                        // an unresolvable reference asserts nothing
                        if let Some(v) = value.resolve(&memory) {
                            memory.assert(subject, attribute, v);
                        }
                    }
                    RuleAction::Emit { .. } => {
                        let emitted = resolve_action(rule, action, &memory)?;
                        let better = match &best {
                            None => true,
                            Some((p, idx, _)) => {
                                rule.priority > *p || (rule.priority == *p && rule.rule_id < rules[*idx].rule_id)
                            }
                        };
                        if better {
                            best = Some((rule.priority, r, emitted));
                        }
                    }
                }
            }
        }
    }

    match best {
        Some((_, _, action)) => Ok(Inference {
            action,
            trace,
            iterations,
            memory,
        }),
        None => Err(InferError::NoActionEmitted { trace }),
    }
}

fn resolve_action(rule: &Rule, action: &RuleAction, memory: &WorkingMemory) -> Result<PedagogicalAction, InferError> {
    let RuleAction::Emit {
        action: kind,
        concept,
        style,
        ease,
    } = action
    else {
        unreachable!("resolve_action called on an assertion")
    };
    let bad = |argument: &'static str| InferError::BadArgument {
        rule_id: rule.rule_id.clone(),
        action: *kind,
        argument,
    };
    let concept_arg = || match concept.as_ref().and_then(|o| o.resolve(memory)) {
        Some(Value::Str(s)) => Ok(s),
        _ => Err(bad("concept")),
    };
    let style_arg = || match style.as_ref().and_then(|o| o.resolve(memory)) {
        Some(Value::Style { style }) => Ok(style),
        Some(Value::Str(s)) => s.parse().map_err(|_| bad("style")),
        _ => Err(bad("style")),
    };
    let ease_arg = || match ease.as_ref().map(|o| o.resolve(memory)) {
        None => Ok(false),
        Some(Some(Value::Bool(b))) => Ok(b),
        Some(_) => Err(bad("ease")),
    };
    Ok(match kind {
        ActionKind::RequestProfile => PedagogicalAction::RequestProfile,
        ActionKind::GivePreTest => PedagogicalAction::GivePreTest {
            concept_id: concept_arg()?,
        },
        ActionKind::DeliverLesson => PedagogicalAction::DeliverLesson {
            concept_id: concept_arg()?,
            style: style_arg()?,
        },
        ActionKind::GivePostTest => PedagogicalAction::GivePostTest {
            concept_id: concept_arg()?,
            ease: ease_arg()?,
        },
        ActionKind::Remediate => PedagogicalAction::Remediate {
            concept_id: concept_arg()?,
            variant_style: style_arg()?,
        },
        ActionKind::AdvanceTo => PedagogicalAction::AdvanceTo {
            concept_id: concept_arg()?,
        },
        ActionKind::EndCourse => PedagogicalAction::EndCourse,
    })
}

/// Fact names the session layer writes into working memory before running
/// the policy.
pub mod facts {
    /// `learner.profiled`: bool.
    pub const PROFILED: (&str, &str) = ("learner", "profiled");
    /// `learner.style`: dominant style.
    pub const STYLE: (&str, &str) = ("learner", "style");
    /// `session.event`: one of the `EVENT_*` strings.
    pub const EVENT: (&str, &str) = ("session", "event");
    /// `course.active`: concept being studied, or the first unmastered one.
    pub const ACTIVE: (&str, &str) = ("course", "active");
    /// `course.next`: next unmastered concept after the active one, or
    /// [`NONE`].
    pub const NEXT: (&str, &str) = ("course", "next");
    /// `course.all_mastered`: bool.
    pub const ALL_MASTERED: (&str, &str) = ("course", "all_mastered");
    /// `concept.attempt`: remediation rounds already started on the active
    /// concept.
    pub const ATTEMPT: (&str, &str) = ("concept", "attempt");
    /// `concept.status`: NotStarted / InProgress / Mastered.
    pub const STATUS: (&str, &str) = ("concept", "status");
    /// `posttest.decision`: [`ADVANCE`] or [`REMEDIATE`].
    pub const DECISION: (&str, &str) = ("posttest", "decision");
    /// `posttest.level`, `.conceptual_level`, `.objective_level`.
    pub const POST_LEVEL: (&str, &str) = ("posttest", "level");
    pub const POST_CONCEPTUAL: (&str, &str) = ("posttest", "conceptual_level");
    pub const POST_OBJECTIVE: (&str, &str) = ("posttest", "objective_level");
    /// `remediation.style`: style to use for the next remediation lesson.
    pub const REMEDIATION_STYLE: (&str, &str) = ("remediation", "style");

    pub const EVENT_ENTRY: &str = "entry";
    pub const EVENT_PRETEST_SCORED: &str = "pretest_scored";
    pub const EVENT_LESSON_COMPLETED: &str = "lesson_completed";
    pub const EVENT_POSTTEST_SCORED: &str = "posttest_scored";
    pub const ADVANCE: &str = "advance";
    pub const REMEDIATE: &str = "remediate";
    pub const NONE: &str = "none";
}

/// Remediation rounds after which post-tests are eased by one band.
pub const EASE_AFTER_ATTEMPTS: i64 = 3;

/// Built-in pre-test -> lesson -> post-test policy.
pub fn default_policy() -> Vec<Rule> {
    use facts::*;
    use Comparator::*;
    let f = |(s, a): (&str, &str)| -> String {
        let mut path = String::from(s);
        path.push('.');
        path.push_str(a);
        path
    };
    vec![
        Rule::new("profile-first", 100)
            .when(PROFILED.0, PROFILED.1, Eq, false)
            .then(RuleAction::emit(ActionKind::RequestProfile)),
        Rule::new("end-course", 90)
            .when(PROFILED.0, PROFILED.1, Eq, true)
            .when(ALL_MASTERED.0, ALL_MASTERED.1, Eq, true)
            .then(RuleAction::emit(ActionKind::EndCourse)),
        Rule::new("start-concept", 50)
            .when(EVENT.0, EVENT.1, Eq, EVENT_ENTRY)
            .when(PROFILED.0, PROFILED.1, Eq, true)
            .then(RuleAction::emit(ActionKind::GivePreTest).with_concept(Operand::fact(&f(ACTIVE)))),
        Rule::new("pretest-to-lesson", 50)
            .when(EVENT.0, EVENT.1, Eq, EVENT_PRETEST_SCORED)
            .then(
                RuleAction::emit(ActionKind::DeliverLesson)
                    .with_concept(Operand::fact(&f(ACTIVE)))
                    .with_style(Operand::fact(&f(STYLE))),
            ),
        Rule::new("lesson-to-posttest", 50)
            .when(EVENT.0, EVENT.1, Eq, EVENT_LESSON_COMPLETED)
            .then(RuleAction::emit(ActionKind::GivePostTest).with_concept(Operand::fact(&f(ACTIVE)))),
        Rule::new("eased-posttest", 60)
            .when(EVENT.0, EVENT.1, Eq, EVENT_LESSON_COMPLETED)
            .when(ATTEMPT.0, ATTEMPT.1, Ge, EASE_AFTER_ATTEMPTS)
            .then(
                RuleAction::emit(ActionKind::GivePostTest)
                    .with_concept(Operand::fact(&f(ACTIVE)))
                    .with_ease(true),
            ),
        Rule::new("posttest-passed", 40)
            .when(EVENT.0, EVENT.1, Eq, EVENT_POSTTEST_SCORED)
            .when(DECISION.0, DECISION.1, Eq, ADVANCE)
            .then(RuleAction::assert("concept", "passed", true)),
        Rule::new("advance", 50)
            .when("concept", "passed", Eq, true)
            .when(NEXT.0, NEXT.1, Ne, NONE)
            .then(RuleAction::emit(ActionKind::AdvanceTo).with_concept(Operand::fact(&f(NEXT)))),
        Rule::new("remediate", 50)
            .when(EVENT.0, EVENT.1, Eq, EVENT_POSTTEST_SCORED)
            .when(DECISION.0, DECISION.1, Eq, REMEDIATE)
            .then(
                RuleAction::emit(ActionKind::Remediate)
                    .with_concept(Operand::fact(&f(ACTIVE)))
                    .with_style(Operand::fact(&f(REMEDIATION_STYLE))),
            ),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "diagnostic")]
pub enum Diagnostic {
    DuplicateRule {
        rule_id: String,
    },
    EmptyConditions {
        rule_id: String,
    },
    Unsatisfiable {
        rule_id: String,
        subject: String,
        attribute: String,
    },
    DeadRule {
        rule_id: String,
    },
}

impl Diagnostic {
    pub fn rule_id(&self) -> &str {
        match self {
            Diagnostic::DuplicateRule { rule_id }
            | Diagnostic::EmptyConditions { rule_id }
            | Diagnostic::Unsatisfiable { rule_id, .. }
            | Diagnostic::DeadRule { rule_id } => rule_id,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateRule { rule_id } => write!(f, "DuplicateRule: `{rule_id}` is defined more than once"),
            Diagnostic::EmptyConditions { rule_id } => write!(f, "EmptyConditions: rule `{rule_id}` has no conditions"),
            Diagnostic::Unsatisfiable {
                rule_id,
                subject,
                attribute,
            } => write!(
                f,
                "Unsatisfiable: rule `{rule_id}` has contradictory conditions on {subject}.{attribute}"
            ),
            Diagnostic::DeadRule { rule_id } => write!(f, "DeadRule: rule `{rule_id}` neither asserts nor emits"),
        }
    }
}

/// Static checks over a rule set. Never fails; returns diagnostics in rule
/// order.
pub fn validate_rules(rules: &[Rule]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for rule in rules {
        if !ids.insert(rule.rule_id.as_str()) {
            out.push(Diagnostic::DuplicateRule {
                rule_id: rule.rule_id.clone(),
            });
        }
        if rule.conditions.is_empty() {
            out.push(Diagnostic::EmptyConditions {
                rule_id: rule.rule_id.clone(),
            });
        }
        let mut groups: BTreeMap<(&str, &str), Vec<&Condition>> = BTreeMap::new();
        for c in &rule.conditions {
            groups.entry((&c.subject, &c.attribute)).or_default().push(c);
        }
        for ((subject, attribute), conds) in groups {
            if !satisfiable(&conds) {
                out.push(Diagnostic::Unsatisfiable {
                    rule_id: rule.rule_id.clone(),
                    subject: subject.into(),
                    attribute: attribute.into(),
                });
            }
        }
        if rule.actions.is_empty() {
            out.push(Diagnostic::DeadRule {
                rule_id: rule.rule_id.clone(),
            });
        }
    }
    out
}

/// Whether one value can satisfy every condition. Probes each constant, its
/// neighbours, whole enumerations and one value of every kind, which is
/// enough for the comparison semantics above.
fn satisfiable(conds: &[&Condition]) -> bool {
    let mut candidates: BTreeSet<Value> = [
        Value::Bool(false),
        Value::Bool(true),
        Value::Int(0),
        Value::Str(String::new()),
    ]
    .into_iter()
    .collect();
    for c in conds {
        match &c.value {
            Value::Int(i) => {
                candidates.extend([i.saturating_sub(1), *i, i.saturating_add(1)].map(Value::Int));
            }
            Value::Str(s) => {
                let mut above = s.clone();
                above.push('\0');
                candidates.insert(Value::Str(s.clone()));
                candidates.insert(Value::Str(above));
            }
            Value::Level { .. } => candidates.extend(Level::ALL.map(Value::from)),
            Value::Style { .. } => candidates.extend(LearningStyle::ALL.map(Value::from)),
            Value::Bool(_) => {}
        }
    }
    candidates.iter().any(|v| conds.iter().all(|c| c.op.holds(v, &c.value)))
}
