//! HTTP service for interactive RIS placement studies.
//!
//! Scenes live in memory under opaque ids and carry a revision that grows on
//! every RIS edit. Map computations run as background jobs stamped with the
//! scene revision they were started from, so a classification can only
//! combine maps of the same placement.

mod error;
mod state;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use risemf_core::mapper::{
    classification_csv_string, classification_summary, classify, compute_map_with, map_csv_string, map_summary,
    parse_map_csv, CoverageMap, MapOptions, Variant, DEFAULT_EPSILON_DB,
};
use risemf_core::scene::{parse_scene, validate_scene, RisSpec, Scene, Severity, WeightMode};
use risemf_core::Error as CoreError;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use error::{ApiError, ApiResult};
pub use state::{AppState, Job, JobResult, JobState, SceneRecord};

/// API routes, with CORS for browser UIs served from localhost.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/scenes", post(create_scene))
        .route("/api/scenes/{id}", get(get_scene))
        .route("/api/scenes/{id}/ris", put(update_ris))
        .route("/api/scenes/{id}/compute", post(start_compute))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/jobs/{id}/map", get(get_map))
        .route("/api/classify", get(get_classification))
        .layer(cors())
        .with_state(state)
}

/// [`router`] plus static files from `ui_dir` for every other path.
pub fn app(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = router(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, state: AppState, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app(state, ui_dir)).await
}

fn is_local_origin(origin: &HeaderValue) -> bool {
    let Ok(origin) = origin.to_str() else {
        return false;
    };
    let host = origin
        .strip_prefix("http://")
        .or_else(|| origin.strip_prefix("https://"))
        .unwrap_or("");
    let host = match host.rsplit_once(':') {
        Some((h, port)) if port.chars().all(|c| c.is_ascii_digit()) => h,
        _ => host,
    };
    matches!(host, "localhost" | "127.0.0.1" | "[::1]")
}

fn cors() -> CorsLayer {
    CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin, _| is_local_origin(origin)))
        .allow_methods([Method::GET, Method::POST, Method::PUT])
        .allow_headers([header::CONTENT_TYPE, header::ACCEPT])
}

fn warnings(scene: &Scene) -> Vec<risemf_core::scene::Issue> {
    validate_scene(scene)
        .into_iter()
        .filter(|i| i.severity == Severity::Warning)
        .collect()
}

async fn create_scene(State(state): State<AppState>, body: String) -> ApiResult<Response> {
    let scene = parse_scene(&body).map_err(ApiError::from_scene_error)?;
    let warnings = warnings(&scene);
    let (scene_id, revision) = state.insert_scene(scene);
    let body = json!({ "scene_id": scene_id, "revision": revision, "warnings": warnings });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn scene_body(id: &str, record: &SceneRecord) -> Value {
    json!({ "scene_id": id, "revision": record.revision, "scene": &*record.scene })
}

async fn get_scene(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let record = state.scene(&id).ok_or_else(|| ApiError::not_found("scene", &id))?;
    Ok(Json(scene_body(&id, &record)))
}

fn parse_ris(body: &str) -> Result<Option<RisSpec>, ApiError> {
    let value: Value = serde_json::from_str(body).map_err(|e| {
        ApiError::from_scene_error(CoreError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        ApiError::from_scene_error(CoreError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    })
}

async fn update_ris(State(state): State<AppState>, Path(id): Path<String>, body: String) -> ApiResult<Json<Value>> {
    if state.scene(&id).is_none() {
        return Err(ApiError::not_found("scene", &id));
    }
    let ris = parse_ris(&body)?;
    let outcome = state.update_scene(&id, |current| {
        let mut scene = current.clone();
        scene.ris = ris;
        let errors: Vec<_> = validate_scene(&scene)
            .into_iter()
            .filter(|i| i.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(scene)
        } else {
            Err(ApiError::from_scene_error(CoreError::Invariant(errors)))
        }
    });
    let record = outcome.ok_or_else(|| ApiError::not_found("scene", &id))??;
    Ok(Json(json!({ "scene_id": id, "revision": record.revision })))
}

fn job_body(job: &Job) -> Value {
    let mut body = json!({
        "job_id": job.id,
        "scene_id": job.scene_id,
        "revision": job.key.revision,
        "variant": job.key.variant,
        "weight_mode": job.key.weight_mode,
        "state": job.state(),
        "progress": job.progress(),
    });
    if let Some(e) = job.error() {
        body["error"] = Value::String(e);
    }
    body
}

fn parse_variant(token: Option<&String>) -> ApiResult<Variant> {
    match token.map(String::as_str) {
        Some("baseline") => Ok(Variant::Baseline),
        Some("with_ris") => Ok(Variant::WithRis),
        Some(other) => Err(ApiError::bad_request(
            "BAD_QUERY",
            format!("variant must be `baseline` or `with_ris`, got `{other}`"),
        )),
        None => Err(ApiError::bad_request("BAD_QUERY", "missing `variant` query parameter")),
    }
}

fn parse_weight_mode(token: Option<&String>) -> ApiResult<Option<WeightMode>> {
    match token.map(String::as_str) {
        None => Ok(None),
        Some("literal") => Ok(Some(WeightMode::Literal)),
        Some("cascade") | Some("cascade_conjugate") => Ok(Some(WeightMode::CascadeConjugate)),
        Some(other) => Err(ApiError::bad_request(
            "BAD_QUERY",
            format!("weight_mode must be `literal` or `cascade`, got `{other}`"),
        )),
    }
}

async fn start_compute(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let record = state.scene(&id).ok_or_else(|| ApiError::not_found("scene", &id))?;
    let variant = parse_variant(query.get("variant"))?;
    let weight_mode = parse_weight_mode(query.get("weight_mode"))?;
    if variant == Variant::WithRis && record.scene.ris.is_none() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "RIS_ABSENT",
            format!("scene `{id}` revision {} has no RIS", record.revision),
        ));
    }
    let (job, created) = state.job_for(&id, &record, variant, weight_mode);
    if created {
        let scene = record.scene.clone();
        let worker = job.clone();
        tokio::task::spawn_blocking(move || run_job(&worker, &scene));
    }
    Ok((StatusCode::ACCEPTED, Json(job_body(&job))).into_response())
}

fn run_job(job: &Job, scene: &Scene) {
    job.start();
    let options = MapOptions {
        weight_mode: job.key.weight_mode,
        threads: None,
    };
    let outcome = compute_map_with(scene, job.key.variant, &options, &|n| job.record_progress(n))
        .map(|map| {
            let csv = Arc::new(map_csv_string(&map));
            JobResult {
                map: Arc::new(map),
                csv,
            }
        })
        .map_err(|e| format!("{}: {e}", e.code()));
    if let Err(e) = &outcome {
        tracing::warn!("job {} failed: {e}", job.id);
    }
    job.finish(outcome);
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = state.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(job_body(&job)))
}

fn finished(state: &AppState, id: &str) -> ApiResult<(Arc<Job>, JobResult)> {
    let job = state.job(id).ok_or_else(|| ApiError::not_found("job", id))?;
    match job.result() {
        Some(r) => Ok((job, r)),
        None => Err(ApiError::new(
            StatusCode::CONFLICT,
            "JOB_NOT_DONE",
            format!("job `{id}` is {}", json!(job.state()).as_str().unwrap_or("")),
        )
        .with_details(job_body(&job))),
    }
}

fn wants_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("application/json"))
}

fn csv_response(text: &str) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], text.to_owned()).into_response()
}

/// Values come from the served CSV text, so both representations agree.
fn map_json(job: &Job, csv: &str) -> ApiResult<Value> {
    let map: CoverageMap = parse_map_csv(csv).map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string())
    })?;
    let cells: Vec<Value> = map
        .cells
        .iter()
        .map(|c| {
            json!({
                "x_m": c.position[0],
                "y_m": c.position[1],
                "z_m": c.position[2],
                "gain_db": c.gain_db,
                "ue_ris_power_db": c.ue_ris_power_db,
                "p_target_dbm": c.p_target_dbm.is_finite().then_some(c.p_target_dbm),
                "p_tx_dbm": c.p_tx_dbm,
                "status": c.status,
            })
        })
        .collect();
    Ok(json!({
        "job_id": job.id,
        "scene_id": job.scene_id,
        "revision": job.key.revision,
        "variant": job.key.variant,
        "nx": map.nx,
        "ny": map.ny,
        "summary": map_summary(&map),
        "cells": cells,
    }))
}

async fn get_map(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let (job, result) = finished(&state, &id)?;
    if wants_json(&headers) {
        Ok(Json(map_json(&job, &result.csv)?).into_response())
    } else {
        Ok(csv_response(&result.csv))
    }
}

async fn get_classification(
    State(state): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let param = |name: &str| {
        query
            .get(name)
            .cloned()
            .ok_or_else(|| ApiError::bad_request("BAD_QUERY", format!("missing `{name}` query parameter")))
    };
    let (base_id, var_id) = (param("baseline")?, param("variant")?);
    let epsilon_db = match query.get("epsilon_db") {
        None => DEFAULT_EPSILON_DB,
        Some(t) => t
            .parse::<f64>()
            .ok()
            .filter(|e| e.is_finite() && *e >= 0.0)
            .ok_or_else(|| ApiError::bad_request("BAD_QUERY", format!("invalid epsilon_db `{t}`")))?,
    };
    let base_job = state.job(&base_id).ok_or_else(|| ApiError::not_found("job", &base_id))?;
    let var_job = state.job(&var_id).ok_or_else(|| ApiError::not_found("job", &var_id))?;
    if base_job.scene_id != var_job.scene_id || base_job.key.revision != var_job.key.revision {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "REVISION_MISMATCH",
            format!(
                "jobs belong to {} revision {} and {} revision {}",
                base_job.scene_id, base_job.key.revision, var_job.scene_id, var_job.key.revision
            ),
        ));
    }
    let (_, base) = finished(&state, &base_id)?;
    let (_, var) = finished(&state, &var_id)?;

    let reload = |csv: &str| {
        parse_map_csv(csv).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string()))
    };
    let classification = classify(&reload(&base.csv)?, &reload(&var.csv)?, epsilon_db)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()))?;
    let csv = classification_csv_string(&classification);
    if headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/csv"))
    {
        return Ok(csv_response(&csv));
    }
    let reloaded = risemf_core::mapper::parse_classification_csv(&csv)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string()))?;
    let cells: Vec<Value> = reloaded
        .cells
        .iter()
        .map(|c| {
            json!({
                "x_m": c.position[0],
                "y_m": c.position[1],
                "z_m": c.position[2],
                "category": c.category,
                "reduction_db": c.reduction_db,
            })
        })
        .collect();
    Ok(Json(json!({
        "baseline_job": base_id,
        "variant_job": var_id,
        "scene_id": base_job.scene_id,
        "revision": base_job.key.revision,
        "epsilon_db": epsilon_db,
        "nx": reloaded.nx,
        "ny": reloaded.ny,
        "summary": classification_summary(&reloaded),
        "cells": cells,
    }))
    .into_response())
}
