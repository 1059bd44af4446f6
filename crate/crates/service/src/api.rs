//! JSON-over-HTTP endpoints.
//!
//! | method | path                     |                                   |
//! |--------|--------------------------|-----------------------------------|
//! | POST   | /v1/ask                  | answer one question               |
//! | GET    | /v1/traces/{id}          | full stored trace                 |
//! | GET    | /v1/runs                 | run manifests                     |
//! | POST   | /v1/runs                 | start a batch run (202)           |
//! | GET    | /v1/runs/{id}            | one manifest                      |
//! | GET    | /v1/runs/{id}/traces     | traces of a run                   |
//! | GET    | /v1/runs/{id}/grades     | latest grades of a run            |
//! | GET    | /v1/runs/{id}/report     | report; `?format=text` for tables |
//! | POST   | /v1/grades               | one record, an array, or a batch  |
//! | GET    | /v1/datasets             | dataset names and sizes           |
//!
//! POST routes honour `Idempotency-Key`.

use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};
use webrag_core::evaluation::{EvalError, GradeRecord};
use webrag_core::pipeline::{AnswerMode, PipelineError};

use crate::idempotency::{request_hash, StoredResponse, IDEMPOTENCY_HEADER, REPLAYED_HEADER};
use crate::{App, AskResponse, ServiceError};

type AppState = Arc<App>;
type ApiResult = Result<(StatusCode, Value), ServiceError>;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::Conflict(_) => StatusCode::CONFLICT,
            Self::Eval(EvalError::Ungraded(_) | EvalError::MissingTraces { .. }) => {
                StatusCode::CONFLICT
            }
            Self::Eval(EvalError::InvalidGrade(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Pipeline(PipelineError::InvalidInput(_) | PipelineError::Config(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let mut body = json!({ "error": self.to_string() });
        if let Self::Eval(EvalError::Ungraded(ids)) = &self {
            body["ungraded"] = json!(ids);
        }
        (status, Json(body)).into_response()
    }
}

pub fn router(app: AppState) -> Router {
    let origins: Vec<HeaderValue> = app
        .config
        .service
        .cors_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([
            header::CONTENT_TYPE,
            header::HeaderName::from_static(IDEMPOTENCY_HEADER),
        ])
        .expose_headers([header::HeaderName::from_static(REPLAYED_HEADER)]);
    Router::new()
        .route("/v1/ask", post(post_ask))
        .route("/v1/traces/{id}", get(get_trace))
        .route("/v1/runs", get(list_runs).post(post_run))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/traces", get(get_run_traces))
        .route("/v1/runs/{id}/grades", get(get_run_grades))
        .route("/v1/runs/{id}/report", get(get_report))
        .route("/v1/grades", post(post_grades))
        .route("/v1/datasets", get(get_datasets))
        .layer(cors)
        .with_state(app)
}

/// Binds and serves until the process is stopped.
pub async fn serve(app: AppState) -> Result<(), ServiceError> {
    let bind = app.config.service.bind.clone();
    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .map_err(|e| ServiceError::Startup(format!("cannot bind {bind}: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| ServiceError::Startup(e.to_string()))?;
    tracing::info!(%addr, offline = app.engine.is_offline(), "webrag service listening");
    axum::serve(listener, router(app))
        .await
        .map_err(|e| ServiceError::Startup(e.to_string()))
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    serde_json::from_value(value).map_err(|e| ServiceError::Invalid(e.to_string()))
}

fn respond(result: ApiResult) -> Response {
    match result {
        Ok((status, body)) => (status, Json(body)).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Runs `f` once per (route, key). Successful responses are stored before
/// they are sent; errors are not, so a failed request may be retried.
async fn idempotent<F, Fut>(
    app: &App,
    headers: &HeaderMap,
    scope: &str,
    body: Bytes,
    f: F,
) -> Response
where
    F: FnOnce(Bytes) -> Fut,
    Fut: Future<Output = ApiResult>,
{
    let Some(key) = headers.get(IDEMPOTENCY_HEADER) else {
        return respond(f(body).await);
    };
    let Ok(key) = key.to_str().map(str::to_string) else {
        return ServiceError::BadRequest("Idempotency-Key must be visible ASCII".into())
            .into_response();
    };
    let hash = request_hash(&body);
    let _guard = app.idempotency.lock(scope, &key).await;
    if let Some(stored) = app.idempotency.get(scope, &key) {
        if stored.request_hash != hash {
            return ServiceError::Invalid(format!(
                "Idempotency-Key {key:?} was already used with a different request"
            ))
            .into_response();
        }
        let status = StatusCode::from_u16(stored.status).unwrap_or(StatusCode::OK);
        let mut resp = (status, Json(stored.body)).into_response();
        resp.headers_mut()
            .insert(REPLAYED_HEADER, HeaderValue::from_static("true"));
        return resp;
    }
    match f(body).await {
        Ok((status, value)) => {
            let stored = StoredResponse {
                scope: scope.to_string(),
                key,
                request_hash: hash,
                status: status.as_u16(),
                body: value.clone(),
            };
            match app.idempotency.record(stored) {
                Ok(()) => (status, Json(value)).into_response(),
                Err(e) => e.into_response(),
            }
        }
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AskBody {
    question: String,
    #[serde(default = "default_mode")]
    mode: AnswerMode,
    #[serde(default)]
    profile: Option<String>,
}

fn default_mode() -> AnswerMode {
    AnswerMode::Rag
}

async fn post_ask(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    idempotent(&app, &headers, "POST /v1/ask", body, |body| {
        let app = app.clone();
        async move {
            let req: AskBody = parse(&body)?;
            let trace = app
                .ask(&req.question, req.mode, req.profile.as_deref())
                .await?;
            Ok((StatusCode::OK, json!(AskResponse::from(&trace))))
        }
    })
    .await
}

#[derive(Debug, Deserialize)]
struct TraceQuery {
    run_id: Option<String>,
}

async fn get_trace(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TraceQuery>,
) -> Result<Json<Value>, ServiceError> {
    let trace = match &q.run_id {
        Some(run_id) => app
            .workspace
            .run(run_id)
            .ok_or_else(|| ServiceError::NotFound(format!("run {run_id}")))?
            .traces
            .get(&id),
        None => app
            .workspace
            .find_trace(&id)
            .into_iter()
            .next()
            .map(|(_, t)| t),
    };
    let trace = trace.ok_or_else(|| ServiceError::NotFound(format!("trace {id}")))?;
    Ok(Json(json!(trace)))
}

async fn list_runs(State(app): State<AppState>) -> Json<Value> {
    let runs: Vec<_> = app.workspace.runs().iter().map(|r| r.manifest()).collect();
    Json(json!({ "runs": runs }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBody {
    dataset: String,
    modes: Vec<AnswerMode>,
    #[serde(default)]
    profiles: Vec<String>,
    #[serde(default)]
    run_id: Option<String>,
}

async fn post_run(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    idempotent(&app, &headers, "POST /v1/runs", body, |body| {
        let app = app.clone();
        async move {
            let req: RunBody = parse(&body)?;
            let run = app.create_run(req.run_id, &req.dataset, &req.modes, &req.profiles)?;
            let manifest = run.manifest();
            let task_app = app.clone();
            tokio::spawn(async move {
                if let Err(e) = task_app.execute_run(&run).await {
                    tracing::error!(run_id = %run.id(), error = %e, "run failed");
                }
            });
            Ok((StatusCode::ACCEPTED, json!(manifest)))
        }
    })
    .await
}

fn find_run(app: &App, id: &str) -> Result<Arc<crate::Run>, ServiceError> {
    app.workspace
        .run(id)
        .ok_or_else(|| ServiceError::NotFound(format!("run {id}")))
}

async fn get_run(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ServiceError> {
    Ok(Json(json!(find_run(&app, &id)?.manifest())))
}

async fn get_run_traces(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ServiceError> {
    let run = find_run(&app, &id)?;
    Ok(Json(json!({ "run_id": id, "traces": run.traces.traces() })))
}

async fn get_run_grades(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ServiceError> {
    let run = find_run(&app, &id)?;
    Ok(Json(json!({ "run_id": id, "grades": run.grades.latest() })))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn get_report(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ServiceError> {
    let run = find_run(&app, &id)?;
    let report = run.report(&app.config.stats_config())?;
    Ok(match q.format.as_deref() {
        None | Some("json") => Json(json!(report)).into_response(),
        Some("text") => (
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            report.render_text(),
        )
            .into_response(),
        Some(other) => {
            return Err(ServiceError::Invalid(format!(
                "unknown format {other:?} (expected json or text)"
            )))
        }
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GradeSubmission {
    Batch {
        #[serde(default)]
        run_id: Option<String>,
        grades: Vec<GradeRecord>,
    },
    Many(Vec<GradeRecord>),
    One(GradeRecord),
}

#[derive(Debug, Deserialize)]
struct GradeQuery {
    run_id: Option<String>,
}

async fn post_grades(
    State(app): State<AppState>,
    Query(q): Query<GradeQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    idempotent(&app, &headers, "POST /v1/grades", body, |body| {
        let app = app.clone();
        async move {
            let submission: GradeSubmission = parse(&body).map_err(|e| match e {
                ServiceError::Invalid(_) => ServiceError::Invalid(
                    "expected a grade record, an array of records, or {\"run_id\", \"grades\"}"
                        .into(),
                ),
                other => other,
            })?;
            let (run_id, grades) = match submission {
                GradeSubmission::Batch { run_id, grades } => (run_id.or(q.run_id), grades),
                GradeSubmission::Many(g) => (q.run_id, g),
                GradeSubmission::One(g) => (q.run_id, vec![g]),
            };
            let stored_in = app.submit_grades(run_id.as_deref(), &grades)?;
            Ok((
                StatusCode::OK,
                json!({ "accepted": grades.len(), "stored_in": stored_in }),
            ))
        }
    })
    .await
}

async fn get_datasets(State(app): State<AppState>) -> Result<Json<Value>, ServiceError> {
    Ok(Json(json!({ "datasets": app.datasets.describe()? })))
}
