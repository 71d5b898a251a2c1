//! Route handlers and the JSON error envelope.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use lattice_core::dataset::parse_csv;
use lattice_core::evaluation::{model_leaderboard, DiagnosticsBundle, Leaderboard, MetricsReport};
use lattice_core::homogenization::{homogenize, HomogenizationReport, Material};
use lattice_core::lattice::{TessellationSpec, Topology, DEFAULT_CELL_SIZE};
use lattice_core::model::{train_pipeline, DesignPoint, ModelKind, TrainConfig, MIN_TRAINING_ROWS};
use lattice_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::registry::{valid_slot_name, SlotRecord};
use crate::AppState;

pub const DEFAULT_SLOT: &str = "default";
pub const MAX_LEADERBOARD_SEEDS: usize = 100;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_argument", message)
    }

    fn unknown_slot(slot: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_slot", format!("no model in slot '{slot}'"))
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match &e {
            CoreError::InvalidArgument(_)
            | CoreError::UnknownLabel { .. }
            | CoreError::Schema { .. }
            | CoreError::Parse { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::Json(_) => StatusCode::BAD_REQUEST,
            CoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.message, "kind": self.kind });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

pub async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

pub async fn get_dataset(State(state): State<Arc<AppState>>) -> Response {
    let csv = state.dataset().to_csv();
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetUploaded {
    pub rows: usize,
}

pub async fn post_dataset(State(state): State<Arc<AppState>>, body: String) -> ApiResult<DatasetUploaded> {
    let dataset = parse_csv(&body)?;
    let rows = dataset.len();
    if rows < MIN_TRAINING_ROWS {
        return Err(ApiError::bad_request(format!(
            "dataset has {rows} rows; training needs at least {MIN_TRAINING_ROWS}"
        )));
    }
    state.replace_dataset(dataset);
    Ok(Json(DatasetUploaded { rows }))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub model: String,
    #[serde(default)]
    pub config: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub slot: Option<String>,
}

fn slot_or_default(slot: Option<String>) -> Result<String, ApiError> {
    let slot = slot.unwrap_or_else(|| DEFAULT_SLOT.to_string());
    if !valid_slot_name(&slot) {
        return Err(ApiError::bad_request(format!(
            "slot name '{slot}' must be 1-64 characters of letters, digits, '_' or '-'"
        )));
    }
    Ok(slot)
}

pub async fn train(
    State(state): State<Arc<AppState>>,
    body: Result<Json<TrainRequest>, JsonRejection>,
) -> ApiResult<MetricsReport> {
    let Json(req) = body?;
    let kind: ModelKind = req.model.parse()?;
    let slot = slot_or_default(req.slot)?;
    let dataset = state.dataset();
    let st = state.clone();
    let record = blocking(move || -> Result<Arc<SlotRecord>, ApiError> {
        let Some(_guard) = st.registry.begin_training(&slot) else {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "conflict",
                format!("slot '{slot}' is already training"),
            ));
        };
        let outcome = train_pipeline(&dataset, kind, &req.config, req.seed)
            .map_err(|e| ApiError::from(e).with_context(&format!("training {kind} failed")))?;
        let diagnostics = outcome.artifact.diagnostics(&dataset).map_err(|e| e.to_string());
        let record = SlotRecord::new(&slot, outcome.artifact, diagnostics);
        st.registry
            .install(record)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string()))
    })
    .await??;
    Ok(Json(record.artifact.metrics))
}

impl ApiError {
    fn with_context(mut self, context: &str) -> Self {
        self.message = format!("{context}: {}", self.message);
        self
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default)]
    pub slot: Option<String>,
    #[serde(flatten)]
    pub point: DesignPoint,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResponse {
    pub predicted_young_modulus: f64,
    pub model: String,
    pub model_version: String,
}

pub async fn predict(
    State(state): State<Arc<AppState>>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> ApiResult<PredictResponse> {
    let Json(req) = body?;
    let slot = slot_or_default(req.slot)?;
    let record = state.registry.get(&slot).ok_or_else(|| ApiError::unknown_slot(&slot))?;
    let value = record.artifact.predict(&req.point)?;
    Ok(Json(PredictResponse { predicted_young_modulus: value, model: slot, model_version: record.model_version.clone() }))
}

pub async fn diagnostics(State(state): State<Arc<AppState>>, Path(slot): Path<String>) -> ApiResult<DiagnosticsBundle> {
    let record = state.registry.get(&slot).ok_or_else(|| ApiError::unknown_slot(&slot))?;
    match (&record.diagnostics, &record.diagnostics_error) {
        (Some(d), _) => Ok(Json(d.clone())),
        (None, e) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "degenerate",
            e.clone().unwrap_or_else(|| "diagnostics unavailable".into()),
        )),
    }
}

#[derive(Debug, Deserialize)]
pub struct LeaderboardQuery {
    pub seeds: Option<String>,
}

/// Comma-separated seeds; `a-b` expands to an inclusive range.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || format!("'{part}' is not a seed or seed range");
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if b < a || b - a >= MAX_LEADERBOARD_SEEDS as u64 {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
        if seeds.len() > MAX_LEADERBOARD_SEEDS {
            return Err(format!("at most {MAX_LEADERBOARD_SEEDS} seeds"));
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

pub async fn leaderboard(
    State(state): State<Arc<AppState>>,
    query: Result<Query<LeaderboardQuery>, QueryRejection>,
) -> ApiResult<Leaderboard> {
    let Query(q) = query?;
    let seeds = parse_seeds(q.seeds.as_deref().unwrap_or("0")).map_err(ApiError::bad_request)?;
    let dataset = state.dataset();
    let board = blocking(move || model_leaderboard(&dataset, &seeds, &BTreeMap::new())).await??;
    Ok(Json(board))
}

#[derive(Debug, Deserialize)]
pub struct HomogenizeQuery {
    pub topology: String,
    pub thickness: f64,
    pub cell_size: Option<f64>,
    #[serde(rename = "E")]
    pub young_modulus: f64,
    pub nu: f64,
    pub k: Option<f64>,
}

pub async fn homogenize_endpoint(
    query: Result<Query<HomogenizeQuery>, QueryRejection>,
) -> ApiResult<HomogenizationReport> {
    let Query(q) = query?;
    let topology: Topology = q.topology.parse()?;
    let material = Material::new(q.young_modulus, q.nu, q.k.unwrap_or(0.0))?;
    let cell_size = q.cell_size.unwrap_or(DEFAULT_CELL_SIZE);
    let report =
        blocking(move || homogenize(topology, q.thickness, &material, cell_size, TessellationSpec::default())).await??;
    Ok(Json(report))
}
