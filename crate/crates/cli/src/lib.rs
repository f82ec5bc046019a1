//! HTTP review service and command implementations behind the `qexplain` binary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{error, info};
use qexplain_core::service::{ExplainedCandidate, Feedback, Service, ServiceError, TrainRequest, DEFAULT_K};
use qexplain_core::sql::{difftest, to_sql_with, DiffReport, SqlOptions, SqlSchema};
use qexplain_core::table::{load_table_file, TableError};
use qexplain_core::{evaluate, highlight, parse_formula, render_html, typecheck, utter, Denotation, Formula, Table};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::Internal(m) => m,
        }
    }
}

impl<E: Into<qexplain_core::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let e = e.into();
        if e.is_user_error() {
            CliError::User(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Loads a table file; a missing path is a user error.
pub fn open_table(path: &Path) -> CliResult<Table> {
    if !path.is_file() {
        return Err(CliError::User(format!("no such table file {}", path.display())));
    }
    Ok(load_table_file(path)?)
}

fn checked_formula(src: &str, t: &Table) -> CliResult<Formula> {
    let f = parse_formula(src)?;
    typecheck(&f, t)?;
    Ok(f)
}

pub fn eval_command(table: &Path, formula: &str) -> CliResult<Denotation> {
    let t = open_table(table)?;
    let f = checked_formula(formula, &t)?;
    Ok(evaluate(&f, &t)?)
}

/// Returns the utterance and writes the highlighted table to `out`.
pub fn explain_command(table: &Path, formula: &str, out: &Path) -> CliResult<String> {
    let t = open_table(table)?;
    let f = checked_formula(formula, &t)?;
    let html = render_html(&t, &highlight(&f, &t)?)?;
    std::fs::write(out, html).map_err(|e| CliError::Internal(format!("{}: {e}", out.display())))?;
    Ok(utter(&f))
}

/// Without a table, every mentioned column is treated as text.
pub fn to_sql_command(formula: &str, table: Option<&Path>, paper_faithful: bool) -> CliResult<String> {
    let f = parse_formula(formula)?;
    let t = match table {
        Some(p) => {
            let t = open_table(p)?;
            typecheck(&f, &t)?;
            t
        }
        None => {
            let headers: Vec<String> = f.columns().into_iter().collect();
            Table::from_strings("T", &headers, &Vec::<Vec<String>>::new())?
        }
    };
    Ok(to_sql_with(
        &f,
        &SqlSchema::from_table(&t),
        SqlOptions { paper_faithful },
    )?)
}

/// Tie-preserving mismatches are internal errors; in paper-faithful mode only
/// mismatches outside most-frequent ties are.
pub fn difftest_command(cases: usize, seed: u64, paper_faithful: bool) -> CliResult<DiffReport> {
    let r = difftest(cases, seed, SqlOptions { paper_faithful })?;
    for m in &r.mismatches {
        log::warn!("mismatch on {}: {}", m.formula, m.sql);
    }
    let bad = r
        .mismatches
        .iter()
        .filter(|m| !(paper_faithful && m.most_frequent_tie))
        .count();
    if bad > 0 {
        return Err(CliError::Internal(format!(
            "{bad} of {} compared cases disagree",
            r.compared
        )));
    }
    Ok(r)
}

pub fn open_service(dir: &Path) -> CliResult<Service> {
    if !dir.join("manifest.json").is_file() {
        return Err(CliError::User(format!("{} has no manifest.json", dir.display())));
    }
    Ok(Service::open(dir)?)
}

struct AppState {
    service: Service,
    training: Mutex<()>,
}

/// JSON error body with a status derived from the error kind.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.0.is_server_error() {
            error!("{}", self.1);
        }
        (self.0, Json(ErrorBody { error: &self.1 })).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::UnknownQuestion(_) | ServiceError::Table(TableError::UnknownTable(_)) => {
                StatusCode::NOT_FOUND
            }
            e if e.is_user_error() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(r.status(), r.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TableView {
    pub id: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

async fn get_table(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<TableView> {
    let view = blocking(move || {
        let t = s.service.table(&id)?;
        Ok(TableView {
            id,
            headers: t.headers().to_vec(),
            rows: t
                .rows()
                .iter()
                .map(|r| r.iter().map(ToString::to_string).collect())
                .collect(),
        })
    })
    .await?;
    Ok(Json(view))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuestionSummary {
    pub question_id: String,
    pub question: String,
    pub table_id: String,
    pub candidates: usize,
}

async fn list_questions(State(s): State<Arc<AppState>>) -> Json<Vec<QuestionSummary>> {
    Json(
        s.service
            .questions()
            .iter()
            .map(|q| QuestionSummary {
                question_id: q.question_id.clone(),
                question: q.question.clone(),
                table_id: q.table_id.clone(),
                candidates: q.candidates.len(),
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct ExplainQuery {
    k: Option<usize>,
}

async fn get_explanations(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ExplainQuery>,
) -> ApiResult<Vec<ExplainedCandidate>> {
    let k = q.k.unwrap_or(DEFAULT_K);
    Ok(Json(blocking(move || s.service.explain(&id, k)).await?))
}

async fn post_feedback(State(s): State<Arc<AppState>>, body: Result<Json<Feedback>, JsonRejection>) -> Response {
    let fb = match body {
        Ok(Json(fb)) => fb,
        Err(r) => return ApiError::from(r).into_response(),
    };
    match blocking(move || s.service.record_feedback(fb)).await {
        Ok(record) => {
            info!("feedback {} from {}", record.question_id, record.worker_id);
            (StatusCode::CREATED, Json(record)).into_response()
        }
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainSummary {
    pub objectives: Vec<f64>,
    pub dimension: usize,
}

async fn post_train(
    State(s): State<Arc<AppState>>,
    body: Result<Json<TrainRequest>, JsonRejection>,
) -> ApiResult<TrainSummary> {
    let Json(req) = body?;
    let Ok(_guard) = s.training.try_lock() else {
        return Err(ApiError(StatusCode::CONFLICT, "training already running".into()));
    };
    let st = s.clone();
    let report = blocking(move || st.service.train(&req)).await?;
    info!("trained {} epochs", report.objectives.len());
    Ok(Json(TrainSummary {
        dimension: report.state.dim(),
        objectives: report.objectives,
    }))
}

async fn get_metrics(State(s): State<Arc<AppState>>) -> ApiResult<qexplain_core::rerank::Metrics> {
    Ok(Json(blocking(move || s.service.metrics()).await?))
}

pub fn router(service: Service) -> Router {
    let state = Arc::new(AppState {
        service,
        training: Mutex::new(()),
    });
    Router::new()
        .route("/tables/:id", get(get_table))
        .route("/questions", get(list_questions))
        .route("/questions/:id/explanations", get(get_explanations))
        .route("/feedback", post(post_feedback))
        .route("/train", post(post_train))
        .route("/metrics", get(get_metrics))
        .with_state(state)
}

pub async fn serve(data: PathBuf, port: u16) -> CliResult<()> {
    let service = open_service(&data)?;
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| CliError::User(format!("cannot bind port {port}: {e}")))?;
    info!("serving {} on port {port}", data.display());
    axum::serve(listener, router(service))
        .await
        .map_err(|e| CliError::Internal(e.to_string()))
}
