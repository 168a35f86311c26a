//! JSON-over-HTTP API, version prefix `/v1`.
//!
//! | method | path                  | body                                  | response                 |
//! |--------|-----------------------|---------------------------------------|--------------------------|
//! | POST   | `/v1/register`        | `{name, password, language}`          | `{learner_id}`           |
//! | POST   | `/v1/login`           | `{name, password}`                    | `{token, learner_id, expires_at}` |
//! | GET    | `/v1/questionnaire`   |                                       | questionnaire step       |
//! | POST   | `/v1/questionnaire`   | `{responses: {item_id: 1..5}}`        | `{scores, dominant}`     |
//! | GET    | `/v1/next`            |                                       | pending step             |
//! | POST   | `/v1/tests/{test_id}` | `{answers: {question_id: choice}}`    | `{result, decision, next}` |
//! | POST   | `/v1/lesson/complete` |                                       | next step (the post-test) |
//! | GET    | `/v1/progress`        |                                       | mastery report           |
//! | POST   | `/v1/chat/translate`  | `{target_language, text}`             | `{text}`                 |
//!
//! Every route except register and login needs `Authorization: Bearer
//! <token>`. Errors are `{"error":{"kind","message","retryable"}}` with a
//! matching status code.

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::auth::AuthError;
use crate::service::{ErrorInfo, ServiceError, TutorService};

type Shared = Arc<TutorService>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterBody {
    pub name: String,
    pub password: String,
    pub language: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginBody {
    pub name: String,
    pub password: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireBody {
    pub responses: BTreeMap<String, u8>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswersBody {
    pub answers: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatBody {
    pub target_language: String,
    pub text: String,
}

#[derive(Debug, Serialize)]
struct ErrorEnvelope {
    error: ErrorInfo,
}

struct ApiError(ErrorInfo);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e.info())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorEnvelope { error: self.0 })).into_response()
    }
}

fn invalid(message: impl Into<String>) -> ApiError {
    ServiceError::InvalidRequest(message.into()).into()
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| invalid(format!("malformed JSON body: {e}")))
}

fn bearer(headers: &HeaderMap) -> Result<String, ApiError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|t| t.trim().to_string())
        .ok_or_else(|| ServiceError::from(AuthError::InvalidToken).into())
}

/// Runs blocking service work (hashing, file and network I/O) off the
/// async workers.
async fn blocking<T, F>(service: Shared, f: F) -> Result<Json<T>, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&TutorService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| {
            ApiError(ErrorInfo {
                kind: "internal",
                message: e.to_string(),
                retryable: true,
                status: 500,
            })
        })?
        .map(Json)
        .map_err(ApiError::from)
}

/// Like [`blocking`], resolving the bearer token to a learner first.
async fn authed<T, F>(service: Shared, headers: &HeaderMap, f: F) -> Result<Json<T>, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&TutorService, &str) -> Result<T, ServiceError> + Send + 'static,
{
    let token = bearer(headers)?;
    blocking(service, move |s| {
        let learner_id = s.authorize(&token)?;
        f(s, &learner_id)
    })
    .await
}

async fn register(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let b: RegisterBody = parse(&body)?;
    let created = blocking(s, move |s| s.register(&b.name, &b.password, &b.language)).await?;
    Ok((StatusCode::CREATED, created))
}

async fn login(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let b: LoginBody = parse(&body)?;
    blocking(s, move |s| s.login(&b.name, &b.password)).await
}

async fn questionnaire(State(s): State<Shared>, headers: HeaderMap) -> Result<impl IntoResponse, ApiError> {
    authed(s, &headers, |s, id| s.questionnaire(id)).await
}

async fn submit_questionnaire(
    State(s): State<Shared>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let b: QuestionnaireBody = parse(&body)?;
    authed(s, &headers, move |s, id| s.submit_questionnaire(id, &b.responses)).await
}

async fn next(State(s): State<Shared>, headers: HeaderMap) -> Result<impl IntoResponse, ApiError> {
    authed(s, &headers, |s, id| s.next_step(id)).await
}

async fn submit_test(
    State(s): State<Shared>,
    Path(test_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let b: AnswersBody = parse(&body)?;
    authed(s, &headers, move |s, id| s.submit_test(id, &test_id, &b.answers)).await
}

async fn complete_lesson(State(s): State<Shared>, headers: HeaderMap) -> Result<impl IntoResponse, ApiError> {
    authed(s, &headers, |s, id| s.complete_lesson(id)).await
}

async fn progress(State(s): State<Shared>, headers: HeaderMap) -> Result<impl IntoResponse, ApiError> {
    authed(s, &headers, |s, id| s.progress(id)).await
}

async fn chat_translate(
    State(s): State<Shared>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let b: ChatBody = parse(&body)?;
    authed(s, &headers, move |s, id| {
        s.chat_translate(id, &b.target_language, &b.text)
    })
    .await
}

async fn not_found() -> ApiError {
    ApiError(ErrorInfo {
        kind: "not_found",
        message: "no such route".into(),
        retryable: false,
        status: 404,
    })
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/v1/register", post(register))
        .route("/v1/login", post(login))
        .route("/v1/questionnaire", get(questionnaire).post(submit_questionnaire))
        .route("/v1/next", get(next))
        .route("/v1/tests/{test_id}", post(submit_test))
        .route("/v1/lesson/complete", post(complete_lesson))
        .route("/v1/progress", get(progress))
        .route("/v1/chat/translate", post(chat_translate))
        .fallback(not_found)
        .with_state(service)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
