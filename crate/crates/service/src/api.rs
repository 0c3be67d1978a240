use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use verispace_core::presets::{self, PRESET_NAMES};
use verispace_core::scenario::{DEFAULT_HORIZON, DEFAULT_UPPER_THRESHOLD};
use verispace_core::treespace::Action;
use verispace_core::{PtConfig, ReworkRule};

use crate::error::ApiError;
use crate::scenario_ref::ScenarioRef;
use crate::session::{Recommendation, SessionView, TreeView};
use crate::Service;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub scenario: ScenarioRef,
    #[serde(default)]
    pub config: PtConfig,
    #[serde(default)]
    pub seed: u64,
}

/// `activity` is an activity id, or `"NA"`/`"Stop"` to accept a stop.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub activity: Action,
    #[serde(default)]
    pub result: Option<bool>,
    #[serde(rename = "override", default)]
    pub override_: bool,
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/scenarios", get(scenarios))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/results", post(submit))
        .route("/sessions/{id}/recommendation", get(recommendation))
        .route("/sessions/{id}/tree", get(tree))
        .fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
        })
        .with_state(service)
}

fn body<T>(req: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    req.map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_request", e.body_text()))
}

async fn scenarios(State(svc): State<Arc<Service>>) -> Json<serde_json::Value> {
    Json(svc.catalogue().clone())
}

async fn create(
    State(svc): State<Arc<Service>>,
    req: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(req)?;
    let view = svc.create(req.scenario, req.config, req.seed)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn session(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(svc.get(&id)?.lock().expect("session lock").view()))
}

async fn submit(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    req: Result<Json<SubmitRequest>, JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let req = body(req)?;
    Ok(Json(svc.submit(
        &id,
        &req.activity,
        req.result,
        req.override_,
    )?))
}

async fn recommendation(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<Recommendation>, ApiError> {
    Ok(Json(
        svc.get(&id)?
            .lock()
            .expect("session lock")
            .recommendation
            .clone(),
    ))
}

async fn tree(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<TreeView>, ApiError> {
    Ok(Json(svc.get(&id)?.lock().expect("session lock").tree()))
}

/// Static `/scenarios` payload.
pub(crate) fn catalogue() -> serde_json::Value {
    let presets: Vec<_> = PRESET_NAMES
        .iter()
        .map(|&name| {
            let (net, costs) = presets::preset(name).expect("bundled preset");
            json!({
                "name": name,
                "targets": net.targets(),
                "activities": net.activity_scope(),
                "revenue": costs.revenue,
            })
        })
        .collect();
    json!({
        "presets": presets,
        "rules": ReworkRule::builtin_book(),
        "defaults": {
            "horizon": DEFAULT_HORIZON,
            "upperThreshold": DEFAULT_UPPER_THRESHOLD,
            "config": PtConfig::default(),
        },
    })
}
