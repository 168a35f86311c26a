//! A tutor service on an ephemeral port, plus a small blocking JSON client.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{mpsc, Arc};
use std::thread::JoinHandle;

use polytutor::auth::HashCost;
use polytutor::demo::demo_pack;
use polytutor::http::serve;
use polytutor::service::{ServiceOptions, TutorService};
use polytutor::translation::SharedTranslator;
use polytutor_core::knowledge::{ContentPack, Question};
use polytutor_core::tutor::{Tutor, TutorConfig};
use serde_json::Value;

pub struct TestServer {
    pub base: String,
    pub service: Arc<TutorService>,
    stop: Option<mpsc::Sender<()>>,
    thread: Option<JoinHandle<()>>,
    _dir: tempfile::TempDir,
}

impl TestServer {
    pub fn start(translator: SharedTranslator) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut options = ServiceOptions::new(dir.path().join("events.ndjson"));
        options.hash_cost = HashCost::insecure_fast();
        options.fast_log = true;
        let tutor = Tutor::new(demo_pack().unwrap(), TutorConfig::default());
        let service =
            Arc::new(TutorService::open(tutor, translator, &options, polytutor::service::system_clock()).unwrap());

        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop, stopped) = mpsc::channel::<()>();
        let shared = service.clone();
        let thread = std::thread::spawn(move || {
            let shutdown = async move {
                let _ = tokio::task::spawn_blocking(move || stopped.recv()).await;
            };
            runtime.block_on(serve(listener, shared, shutdown)).unwrap();
        });
        Self {
            base,
            service,
            stop: Some(stop),
            thread: Some(thread),
            _dir: dir,
        }
    }

    pub fn client(&self) -> Client {
        Client::new(&self.base)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        drop(self.stop.take());
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub struct Client {
    agent: ureq::Agent,
    base: String,
    pub token: Option<String>,
}

impl Client {
    pub fn new(base: &str) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            agent,
            base: base.into(),
            token: None,
        }
    }

    /// Sends a request and returns the status and the parsed JSON body.
    pub fn call(&self, method: &str, path: &str, body: Option<&Value>) -> (u16, Value) {
        let url = format!("{}{path}", self.base);
        let auth = self.token.as_ref().map(|t| format!("Bearer {t}"));
        let result = match method {
            "GET" => {
                let mut r = self.agent.get(&url);
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                r.call()
            }
            "POST" => {
                let mut r = self.agent.post(&url).header("Content-Type", "application/json");
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                match body {
                    Some(b) => r.send(b.to_string()),
                    None => r.send_empty(),
                }
            }
            other => panic!("unsupported method {other}"),
        };
        let mut response = result.unwrap_or_else(|e| panic!("{method} {path}: {e}"));
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().unwrap();
        let json = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{method} {path}: {e}: {text}"));
        (status, json)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        self.call("GET", path, None)
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        self.call("POST", path, Some(&body))
    }

    /// Registers and logs in, keeping the token.
    pub fn sign_up(&mut self, name: &str, language: &str) -> String {
        let (status, reg) = self.post(
            "/v1/register",
            serde_json::json!({"name": name, "password": "correct horse", "language": language}),
        );
        assert_eq!(status, 201, "{reg}");
        let (status, login) = self.post(
            "/v1/login",
            serde_json::json!({"name": name, "password": "correct horse"}),
        );
        assert_eq!(status, 200, "{login}");
        self.token = Some(login["token"].as_str().unwrap().to_string());
        reg["learner_id"].as_str().unwrap().to_string()
    }
}

pub fn find_question<'a>(pack: &'a ContentPack, question_id: &str) -> &'a Question {
    pack.questions()
        .find(|q| q.question_id == question_id)
        .unwrap_or_else(|| panic!("no question {question_id}"))
}

/// Answers for a test view: question `i` is answered correctly when
/// `correct(i)`, otherwise with the next choice.
pub fn answers(pack: &ContentPack, test_view: &Value, correct: impl Fn(usize) -> bool) -> BTreeMap<String, usize> {
    test_view["questions"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let id = q["question_id"].as_str().unwrap();
            let question = find_question(pack, id);
            let choice = if correct(i) {
                question.correct_index
            } else {
                (question.correct_index + 1) % question.choices.len()
            };
            (id.to_string(), choice)
        })
        .collect()
}

/// `round(100 * earned / max)` with halves rounded up, by floating point.
pub fn expected_score(pack: &ContentPack, answers: &BTreeMap<String, usize>) -> u32 {
    let (mut earned, mut max) = (0.0f64, 0.0f64);
    for (id, &choice) in answers {
        let q = find_question(pack, id);
        max += q.score_weight as f64;
        if choice == q.correct_index {
            earned += q.score_weight as f64;
        }
    }
    if max == 0.0 {
        100
    } else {
        (100.0 * earned / max + 0.5).floor() as u32
    }
}

/// Level label by scanning the band table.
pub fn band_label(score: u32) -> &'static str {
    const BANDS: [(u32, u32, &str); 5] = [
        (0, 30, "Weak"),
        (31, 50, "Average"),
        (51, 70, "Good"),
        (71, 85, "VeryGood"),
        (86, 100, "Excellent"),
    ];
    BANDS
        .iter()
        .find(|(lo, hi, _)| (*lo..=*hi).contains(&score))
        .map(|b| b.2)
        .expect("score within 0..=100")
}

fn phase(client: &Client) -> String {
    let (status, progress) = client.get("/v1/progress");
    assert_eq!(status, 200, "{progress}");
    progress["phase"]["phase"].as_str().unwrap_or("none").to_string()
}

/// Drives one learner from registration through mastering the first concept
/// over HTTP, checking every phase change and reported score.
pub fn run_api_script(server: &TestServer) {
    let pack = demo_pack().unwrap();
    let mut client = server.client();
    let learner_id = client.sign_up("nasrin", "fa");
    assert_eq!(phase(&client), "NeedsProfile");

    let (status, step) = client.get("/v1/next");
    assert_eq!((status, step["kind"].as_str()), (200, Some("questionnaire")), "{step}");
    let (_, items) = client.get("/v1/questionnaire");
    assert_eq!(items["items"].as_array().unwrap().len(), pack.questionnaire().len());

    // favour the deep-learning scale; reverse-scored items flip the response
    let mut expected = BTreeMap::<&str, u32>::new();
    let mut responses = serde_json::Map::new();
    for item in pack.questionnaire() {
        let favoured = item.scale.code() == "DLA";
        let agree = favoured != item.reverse_scored;
        let response: u32 = if agree { 5 } else { 1 };
        let points = if item.reverse_scored { 6 - response } else { response };
        *expected.entry(item.scale.code()).or_default() += points;
        responses.insert(item.item_id.clone(), response.into());
    }
    let (status, profile) = client.post("/v1/questionnaire", serde_json::json!({ "responses": responses }));
    assert_eq!(status, 200, "{profile}");
    for (code, score) in &expected {
        assert_eq!(
            profile["scores"][code].as_u64(),
            Some(u64::from(*score)),
            "{code}: {profile}"
        );
    }
    assert_eq!(profile["dominant"], "DLA");
    // the phase moves once a pre-test is actually issued
    assert_eq!(phase(&client), "NeedsProfile");

    let first = &pack.course_order()[0];
    let (status, pre) = client.get("/v1/next");
    assert_eq!(status, 200, "{pre}");
    assert_eq!(pre["kind"], "test");
    assert_eq!(pre["phase"], "PreTest");
    assert_eq!(pre["concept_id"].as_str(), Some(first.as_str()));
    assert_eq!(pre["title"]["lang"], "fa");
    assert_eq!(phase(&client), "AwaitingPreTest");
    let pre_answers = answers(&pack, &pre, |i| i % 2 == 0);
    let pre_score = expected_score(&pack, &pre_answers);
    let path = format!("/v1/tests/{}", pre["test_id"].as_str().unwrap());
    let (status, scored) = client.post(&path, serde_json::json!({ "answers": pre_answers }));
    assert_eq!(status, 200, "{scored}");
    assert_eq!(scored["result"]["total_score"].as_u64(), Some(u64::from(pre_score)));
    assert_eq!(scored["result"]["level"], band_label(pre_score));
    assert!(scored["decision"].is_null(), "{scored}");
    assert_eq!(scored["next"]["kind"], "lesson");
    assert_eq!(scored["next"]["style"], "DLA");
    assert_eq!(phase(&client), "InLesson");

    let (status, post) = client.post("/v1/lesson/complete", serde_json::json!({}));
    assert_eq!(status, 200, "{post}");
    assert_eq!(post["kind"], "test");
    assert_eq!(post["phase"], "PostTest");
    assert_eq!(phase(&client), "AwaitingPostTest");

    let post_answers = answers(&pack, &post, |_| true);
    let path = format!("/v1/tests/{}", post["test_id"].as_str().unwrap());
    let (status, scored) = client.post(&path, serde_json::json!({ "answers": post_answers }));
    assert_eq!(status, 200, "{scored}");
    let result = &scored["result"];
    assert_eq!(result["total_score"], 100);
    assert_eq!(result["level"], "Excellent");
    assert_eq!(result["conceptual_level"], "Excellent");
    assert_eq!(result["objective_level"], "Excellent");
    assert_eq!(scored["decision"], "Advance");
    assert_eq!(scored["next"]["kind"], "test");
    assert_eq!(scored["next"]["phase"], "PreTest");
    assert_eq!(
        scored["next"]["concept_id"].as_str(),
        Some(pack.course_order()[1].as_str())
    );

    let (_, progress) = client.get("/v1/progress");
    assert_eq!(progress["learner_id"].as_str(), Some(learner_id.as_str()));
    assert_eq!(progress["phase"]["phase"], "AwaitingPreTest");
    let record = progress["concepts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["concept_id"].as_str() == Some(first.as_str()))
        .unwrap();
    assert_eq!(record["status"], "Mastered");
    assert_eq!(record["attempts"], 1);
    assert_eq!(record["post_level"], "Excellent");
}
