//! The tutoring service: accounts, tokens, per-learner state and the event
//! log, wrapped around a [`Tutor`].
//!
//! Requests for one learner are serialized by a per-learner mutex. Each
//! state-changing request computes its events against the current state,
//! appends them to the log, and only then replaces the in-memory state, so
//! what clients observe is always reproducible from the log.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use polytutor_core::assessment::{AssessmentError, TestResult};
use polytutor_core::learner::{Decision, LearnerEvent, LearnerState, ModelError};
use polytutor_core::style::{ProfileError, StyleVector};
use polytutor_core::translation::{translate, LanguageCode, TranslateError, TranslationRequest};
use polytutor_core::tutor::{ProgressReport, Tutor, TutorError, View};
use serde::{Deserialize, Serialize};

use crate::auth::{AuthError, Credential, CredentialStore, HashCost, TokenStore, DEFAULT_TOKEN_TTL};
use crate::eventlog::{group_by_learner, EventLog, LogError, Recovery};
use crate::translation::SharedTranslator;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("language `{0}` is not supported by this deployment")]
    UnsupportedLanguage(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Tutor(#[from] TutorError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Storage(#[from] LogError),
    #[error("learner `{learner_id}` cannot be rebuilt from the log: {source}")]
    CorruptLog { learner_id: String, source: ModelError },
}

/// Transport-independent classification of a [`ServiceError`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub message: String,
    pub retryable: bool,
    #[serde(skip)]
    pub status: u16,
}

impl ServiceError {
    pub fn info(&self) -> ErrorInfo {
        let (status, kind, retryable) = self.classify();
        ErrorInfo {
            kind,
            message: self.to_string(),
            retryable,
            status,
        }
    }

    fn classify(&self) -> (u16, &'static str, bool) {
        match self {
            ServiceError::Auth(e) => match e {
                AuthError::NameTaken(_) => (409, "name_taken", false),
                AuthError::InvalidName | AuthError::WeakPassword(_) => (400, "invalid_request", false),
                AuthError::BadCredentials => (401, "bad_credentials", false),
                AuthError::InvalidToken => (401, "invalid_token", false),
                AuthError::Store { .. } => (500, "storage", true),
            },
            ServiceError::UnsupportedLanguage(_) => (400, "unsupported_language", false),
            ServiceError::InvalidRequest(_) => (400, "invalid_request", false),
            ServiceError::Tutor(e) => match e {
                TutorError::NotRegistered => (404, "not_registered", false),
                TutorError::WrongPhase { .. } => (409, "wrong_phase", false),
                TutorError::UnknownTest(_) => (404, "unknown_test", false),
                TutorError::Profile(ProfileError::MissingResponse(_)) => (400, "missing_response", false),
                TutorError::Profile(ProfileError::InvalidLikert(_)) => (400, "invalid_likert", false),
                TutorError::Assessment(AssessmentError::MissingAnswer(_)) => (400, "missing_answer", false),
                TutorError::Assessment(AssessmentError::UnknownQuestion(_)) => (400, "unknown_question", false),
                TutorError::Assessment(_) | TutorError::Content(_) => (500, "content_unavailable", false),
                TutorError::Inference(_) | TutorError::Model(_) => (500, "policy_error", false),
            },
            ServiceError::Translate(e) => match e {
                TranslateError::UnsupportedPair { .. } => (400, "unsupported_pair", false),
                TranslateError::TextTooLong { .. } => (413, "text_too_long", false),
                TranslateError::BackendUnavailable(_) => (503, "backend_unavailable", true),
                TranslateError::AuthFailure => (502, "backend_auth", false),
            },
            ServiceError::Storage(_) => (500, "storage", true),
            ServiceError::CorruptLog { .. } => (500, "corrupt_log", false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub learner_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginToken {
    pub token: String,
    pub learner_id: String,
    pub expires_at: u64,
}

/// A rendered step plus whether any of its text fell back to the source
/// language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPayload {
    #[serde(flatten)]
    pub view: View,
    pub untranslated: bool,
}

impl From<View> for StepPayload {
    fn from(view: View) -> Self {
        let untranslated = view.untranslated();
        Self { view, untranslated }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPayload {
    pub result: TestResult,
    /// Present for post-tests.
    pub decision: Option<Decision>,
    pub next: StepPayload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatedText {
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub log_path: PathBuf,
    /// Defaults to `<log_path>.credentials`.
    pub credentials_path: Option<PathBuf>,
    pub hash_cost: HashCost,
    pub token_ttl: u64,
    /// Skip `fsync` on every append; for simulations and tests.
    pub fast_log: bool,
}

impl ServiceOptions {
    pub fn new(log_path: impl Into<PathBuf>) -> Self {
        Self {
            log_path: log_path.into(),
            credentials_path: None,
            hash_cost: HashCost::default(),
            token_ttl: DEFAULT_TOKEN_TTL,
            fast_log: false,
        }
    }

    pub fn credentials_path(&self) -> PathBuf {
        self.credentials_path.clone().unwrap_or_else(|| {
            let mut name = self.log_path.as_os_str().to_owned();
            name.push(".credentials");
            PathBuf::from(name)
        })
    }
}

type LearnerCell = Arc<Mutex<LearnerState>>;

pub struct TutorService {
    tutor: Tutor,
    translator: SharedTranslator,
    log: EventLog,
    credentials: CredentialStore,
    tokens: TokenStore,
    learners: RwLock<HashMap<String, LearnerCell>>,
    /// Serializes registrations so names and ids are handed out once.
    registering: Mutex<u64>,
    clock: Clock,
    recovery: Recovery,
}

impl std::fmt::Debug for TutorService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TutorService")
            .field("log", &self.log.path())
            .field("learners", &self.learner_count())
            .finish_non_exhaustive()
    }
}

impl TutorService {
    /// Opens the log and credential files, rebuilding every learner.
    pub fn open(
        tutor: Tutor,
        translator: SharedTranslator,
        options: &ServiceOptions,
        clock: Clock,
    ) -> Result<Self, ServiceError> {
        let (log, recovery) = EventLog::open(&options.log_path)?;
        let log = if options.fast_log { log.without_fsync() } else { log };
        let credentials = CredentialStore::open(&options.credentials_path(), options.hash_cost)?;
        let mut learners = HashMap::new();
        let mut highest = 0;
        let modeler = tutor.config().modeler;
        for (learner_id, events) in group_by_learner(log.read_all()?) {
            let state = modeler.rebuild(&events).map_err(|source| ServiceError::CorruptLog {
                learner_id: learner_id.clone(),
                source,
            })?;
            highest = highest.max(learner_number(&learner_id).unwrap_or(0));
            learners.insert(learner_id, Arc::new(Mutex::new(state)));
        }
        Ok(Self {
            tutor,
            translator,
            log,
            credentials,
            tokens: TokenStore::new(options.token_ttl),
            learners: RwLock::new(learners),
            registering: Mutex::new(highest),
            clock,
            recovery,
        })
    }

    pub fn tutor(&self) -> &Tutor {
        &self.tutor
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    /// What was repaired when the log was opened.
    pub fn recovery(&self) -> &Recovery {
        &self.recovery
    }

    pub fn learner_count(&self) -> usize {
        self.learners.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    /// Whether learners can use `language`: the pack's own language, or one
    /// the translator can reach from it.
    pub fn supports_language(&self, language: &LanguageCode) -> bool {
        let default = self.tutor.pack().default_language();
        language == default || self.translator.supports(default, language)
    }

    pub fn register(&self, name: &str, password: &str, language: &str) -> Result<Registration, ServiceError> {
        let language = LanguageCode::new(language).map_err(|_| ServiceError::UnsupportedLanguage(language.into()))?;
        if !self.supports_language(&language) {
            return Err(ServiceError::UnsupportedLanguage(language.to_string()));
        }
        let hash = self.credentials.prepare(name, password)?;
        let mut counter = self.registering.lock().unwrap_or_else(|p| p.into_inner());
        if self.credentials.contains(name) {
            return Err(AuthError::NameTaken(name.into()).into());
        }
        let learner_id = format!("L{:06}", *counter + 1);
        let turn = self.tutor.register(&learner_id, language, (self.clock)())?;
        self.log.append(&turn.events)?;
        *counter += 1;
        self.learners
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(learner_id.clone(), Arc::new(Mutex::new(turn.state)));
        self.credentials.insert(Credential {
            name: name.into(),
            learner_id: learner_id.clone(),
            hash,
        })?;
        Ok(Registration { learner_id })
    }

    pub fn login(&self, name: &str, password: &str) -> Result<LoginToken, ServiceError> {
        let learner_id = self.credentials.authenticate(name, password)?;
        let session = self.tokens.issue(&learner_id, (self.clock)());
        Ok(LoginToken {
            token: session.token,
            learner_id: session.learner_id,
            expires_at: session.expires_at,
        })
    }

    /// The learner id behind a bearer token.
    pub fn authorize(&self, token: &str) -> Result<String, ServiceError> {
        Ok(self.tokens.resolve(token, (self.clock)())?.learner_id)
    }

    /// The questionnaire in the learner's language.
    pub fn questionnaire(&self, learner_id: &str) -> Result<StepPayload, ServiceError> {
        let state = self.snapshot(learner_id)?;
        Ok(self.render(&state, &polytutor_core::tutor::Step::Questionnaire))
    }

    pub fn submit_questionnaire(
        &self,
        learner_id: &str,
        responses: &BTreeMap<String, u8>,
    ) -> Result<StyleVector, ServiceError> {
        self.mutate(learner_id, |state, now| {
            let outcome = self.tutor.submit_questionnaire(state, responses, now)?;
            Ok((outcome.vector, outcome.events, outcome.state))
        })
    }

    /// The pending step, translated. Idempotent until the learner responds.
    pub fn next_step(&self, learner_id: &str) -> Result<StepPayload, ServiceError> {
        self.mutate(learner_id, |state, now| {
            let turn = self.tutor.next_step(state, now)?;
            Ok((self.render(&turn.state, &turn.step), turn.events, turn.state))
        })
    }

    pub fn submit_test(
        &self,
        learner_id: &str,
        test_id: &str,
        answers: &BTreeMap<String, usize>,
    ) -> Result<TestPayload, ServiceError> {
        self.mutate(learner_id, |state, now| {
            let outcome = self.tutor.submit_test(state, test_id, answers, now)?;
            let next = self.render(&outcome.turn.state, &outcome.turn.step);
            let payload = TestPayload {
                result: outcome.result,
                decision: outcome.decision,
                next,
            };
            Ok((payload, outcome.turn.events, outcome.turn.state))
        })
    }

    pub fn complete_lesson(&self, learner_id: &str) -> Result<StepPayload, ServiceError> {
        self.mutate(learner_id, |state, now| {
            let turn = self.tutor.complete_lesson(state, now)?;
            Ok((self.render(&turn.state, &turn.step), turn.events, turn.state))
        })
    }

    pub fn progress(&self, learner_id: &str) -> Result<ProgressReport, ServiceError> {
        Ok(self.tutor.progress(&self.snapshot(learner_id)?))
    }

    /// Translate a chat message from the sender's language. Nothing is
    /// recorded.
    pub fn chat_translate(&self, learner_id: &str, target: &str, text: &str) -> Result<TranslatedText, ServiceError> {
        let target = LanguageCode::new(target).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
        let source = self.snapshot(learner_id)?.language.ok_or(TutorError::NotRegistered)?;
        let request = TranslationRequest {
            source,
            target,
            text: text.into(),
        };
        Ok(TranslatedText {
            text: translate(&*self.translator, &request)?,
        })
    }

    /// A copy of the learner's current state.
    pub fn snapshot(&self, learner_id: &str) -> Result<LearnerState, ServiceError> {
        let cell = self.cell(learner_id)?;
        let state = cell.lock().unwrap_or_else(|p| p.into_inner()).clone();
        Ok(state)
    }

    /// Every learner's current state, by id.
    pub fn snapshots(&self) -> BTreeMap<String, LearnerState> {
        let cells: Vec<(String, LearnerCell)> = self
            .learners
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        cells
            .into_iter()
            .map(|(id, cell)| {
                let state = cell.lock().unwrap_or_else(|p| p.into_inner()).clone();
                (id, state)
            })
            .collect()
    }

    fn cell(&self, learner_id: &str) -> Result<LearnerCell, ServiceError> {
        self.learners
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(learner_id)
            .cloned()
            .ok_or(ServiceError::Tutor(TutorError::NotRegistered))
    }

    fn render(&self, state: &LearnerState, step: &polytutor_core::tutor::Step) -> StepPayload {
        let target = state
            .language
            .clone()
            .unwrap_or_else(|| self.tutor.pack().default_language().clone());
        self.tutor.render(step, &target, &*self.translator).into()
    }

    fn mutate<R>(
        &self,
        learner_id: &str,
        f: impl FnOnce(&LearnerState, u64) -> Result<(R, Vec<LearnerEvent>, LearnerState), ServiceError>,
    ) -> Result<R, ServiceError> {
        let cell = self.cell(learner_id)?;
        let mut state = cell.lock().unwrap_or_else(|p| p.into_inner());
        let (out, events, next) = f(&state, (self.clock)())?;
        self.log.append(&events)?;
        *state = next;
        Ok(out)
    }
}

fn learner_number(learner_id: &str) -> Option<u64> {
    learner_id.strip_prefix('L')?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{demo_glossary, demo_pack};
    use crate::eventlog::read_log;
    use crate::translation::{CachedTranslator, TranslationCache};
    use polytutor_core::learner::{rebuild, MasteryStatus, SessionPhase};
    use polytutor_core::tutor::TutorConfig;

    fn service_in(dir: &Path, translator: SharedTranslator) -> TutorService {
        let mut options = ServiceOptions::new(dir.join("events.ndjson"));
        options.hash_cost = HashCost::insecure_fast();
        options.fast_log = true;
        let tutor = Tutor::new(demo_pack().unwrap(), TutorConfig::default());
        TutorService::open(tutor, translator, &options, Arc::new(|| 1_000)).unwrap()
    }

    fn glossary() -> SharedTranslator {
        Arc::new(CachedTranslator::new(
            demo_glossary().unwrap(),
            TranslationCache::default(),
        ))
    }

    fn answers_for(service: &TutorService, id: &str, correct: bool) -> (String, BTreeMap<String, usize>) {
        let state = service.snapshot(id).unwrap();
        let test = state.pending_test.unwrap();
        let bank = service.tutor().pack().bank_for(&test.concept_id).unwrap();
        let answers = test
            .questions
            .iter()
            .map(|q| {
                let question = bank.iter().find(|b| b.question_id == q.question_id).unwrap();
                let choice = if correct {
                    question.correct_index
                } else {
                    (question.correct_index + 1) % question.choices.len()
                };
                (q.question_id.clone(), choice)
            })
            .collect();
        (test.test_id, answers)
    }

    fn profile(service: &TutorService, id: &str) {
        let responses = service
            .tutor()
            .pack()
            .questionnaire()
            .iter()
            .map(|i| (i.item_id.clone(), 3))
            .collect();
        service.submit_questionnaire(id, &responses).unwrap();
    }

    #[test]
    fn register_login_and_reject_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let s = service_in(dir.path(), glossary());
        let reg = s.register("sara", "password1", "fa").unwrap();
        assert_eq!(reg.learner_id, "L000001");
        let dup = s.register("sara", "password1", "fa").unwrap_err();
        assert_eq!(dup.info().kind, "name_taken");
        let bad = s.register("ali", "password1", "de").unwrap_err();
        assert_eq!(bad.info().kind, "unsupported_language");
        let events = read_log(s.log_path()).unwrap();
        assert_eq!(events.len(), 1);
        let token = s.login("sara", "password1").unwrap();
        assert_eq!(s.authorize(&token.token).unwrap(), "L000001");
        assert_eq!(s.authorize("nope").unwrap_err().info().status, 401);
    }

    #[test]
    fn next_step_is_idempotent_and_translated() {
        let dir = tempfile::tempdir().unwrap();
        let s = service_in(dir.path(), glossary());
        let id = s.register("sara", "password1", "es").unwrap().learner_id;
        assert!(matches!(s.next_step(&id).unwrap().view, View::Questionnaire { .. }));
        profile(&s, &id);
        let first = s.next_step(&id).unwrap();
        let second = s.next_step(&id).unwrap();
        assert_eq!(
            serde_json::to_string(&first).unwrap(),
            serde_json::to_string(&second).unwrap()
        );
        match &first.view {
            View::Test { title, .. } => assert_eq!(title.lang.as_str(), "es"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn state_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let s = service_in(dir.path(), glossary());
            let id = s.register("sara", "password1", "en").unwrap().learner_id;
            profile(&s, &id);
            s.next_step(&id).unwrap();
            let (test_id, answers) = answers_for(&s, &id, true);
            s.submit_test(&id, &test_id, &answers).unwrap();
            id
        };
        let s = service_in(dir.path(), glossary());
        let state = s.snapshot(&id).unwrap();
        assert!(matches!(state.phase(), Some(SessionPhase::InLesson { .. })));
        assert_eq!(state, rebuild(&read_log(s.log_path()).unwrap()).unwrap());
        assert_eq!(s.login("sara", "password1").unwrap().learner_id, id);
        assert_eq!(s.register("omid", "password1", "en").unwrap().learner_id, "L000002");
        s.complete_lesson(&id).unwrap();
        let (test_id, answers) = answers_for(&s, &id, true);
        let result = s.submit_test(&id, &test_id, &answers).unwrap();
        assert_eq!(result.decision, Some(Decision::Advance));
        let report = s.progress(&id).unwrap();
        assert_eq!(report.concepts[0].status, MasteryStatus::Mastered);
    }

    #[test]
    fn wrong_requests_leave_no_trace() {
        let dir = tempfile::tempdir().unwrap();
        let s = service_in(dir.path(), glossary());
        let id = s.register("sara", "password1", "en").unwrap().learner_id;
        assert_eq!(s.complete_lesson(&id).unwrap_err().info().kind, "wrong_phase");
        profile(&s, &id);
        s.next_step(&id).unwrap();
        let (test_id, mut answers) = answers_for(&s, &id, true);
        let before = read_log(s.log_path()).unwrap().len();
        answers.pop_first();
        assert_eq!(
            s.submit_test(&id, &test_id, &answers).unwrap_err().info().kind,
            "missing_answer"
        );
        assert_eq!(
            s.submit_test(&id, "other", &answers).unwrap_err().info().kind,
            "unknown_test"
        );
        assert_eq!(read_log(s.log_path()).unwrap().len(), before);
    }

    #[test]
    fn chat_uses_sender_language() {
        let dir = tempfile::tempdir().unwrap();
        let s = service_in(dir.path(), glossary());
        let id = s.register("sara", "password1", "en").unwrap().learner_id;
        assert_eq!(
            s.chat_translate(&id, "es", "binary memory").unwrap().text,
            "binario memoria"
        );
        assert_eq!(s.chat_translate(&id, "en", "hello").unwrap().text, "hello");
        let err = s.chat_translate(&id, "de", "hello").unwrap_err().info();
        assert_eq!((err.kind, err.retryable), ("unsupported_pair", false));
    }

    #[test]
    fn translation_outage_degrades_to_source_text() {
        struct Down;
        impl polytutor_core::translation::Translator for Down {
            fn supports(&self, _: &LanguageCode, _: &LanguageCode) -> bool {
                true
            }
            fn translate_text(&self, _: &TranslationRequest) -> Result<String, TranslateError> {
                Err(TranslateError::BackendUnavailable("down".into()))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let s = service_in(dir.path(), Arc::new(Down));
        let id = s.register("sara", "password1", "fa").unwrap().learner_id;
        let q = s.questionnaire(&id).unwrap();
        assert!(q.untranslated);
        let err = s.chat_translate(&id, "en", "x").unwrap_err().info();
        assert_eq!(
            (err.kind, err.retryable, err.status),
            ("backend_unavailable", true, 503)
        );
    }
}
