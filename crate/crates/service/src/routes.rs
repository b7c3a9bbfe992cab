use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;

use boin_designs::{build_design, DESIGN_NAMES};

use crate::api::{
    BoundaryView, CohortInput, CreateSession, DesignList, FinalizeInput, SessionView, SpecInput, WhatIfInput,
    WhatIfView, SCHEMA_VERSION,
};
use crate::error::{ApiError, ApiResult};
use crate::session::{boundary_view, canonical_design};
use crate::store::Store;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    /// Bearer token required on every request when set.
    pub token: Option<Arc<str>>,
}

impl AppState {
    pub fn new(store: Store, token: Option<String>) -> Self {
        AppState {
            store: Arc::new(store),
            token: token.map(Into::into),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/cohorts", post(post_cohort))
        .route("/sessions/{id}/what-if", post(what_if))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/designs", get(list_designs))
        .route("/designs/{name}/boundaries", get(boundaries))
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

async fn authorize(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(&**token) {
            return ApiError::unauthorized().into_response();
        }
    }
    next.run(request).await
}

async fn create_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let Json(request) = body?;
    let key = match headers.get(IDEMPOTENCY_HEADER) {
        None => None,
        Some(v) => Some(
            v.to_str()
                .ok()
                .filter(|k| !k.is_empty())
                .ok_or_else(|| ApiError::validation(IDEMPOTENCY_HEADER, "must be non-empty visible ASCII"))?
                .to_string(),
        ),
    };
    let (session, created) = state.store.create(&request, key)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(session.view())))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(state.store.get(&id)?.view()))
}

async fn post_cohort(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<CohortInput>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let Json(input) = body?;
    let session = state.store.update(&id, |s| s.cohort_event(&input, Utc::now()))?;
    Ok(Json(session.view()))
}

async fn what_if(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<WhatIfInput>, JsonRejection>,
) -> ApiResult<Json<WhatIfView>> {
    let Json(input) = body?;
    Ok(Json(state.store.get(&id)?.what_if(&input)?))
}

async fn finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<FinalizeInput>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let Json(input) = body?;
    let session = state.store.update(&id, |s| s.finalize_event(&input, Utc::now()))?;
    Ok(Json(session.view()))
}

async fn list_designs() -> Json<DesignList> {
    Json(DesignList {
        schema_version: SCHEMA_VERSION,
        designs: DESIGN_NAMES.iter().map(|s| s.to_string()).collect(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryQuery {
    phi: f64,
    phi1: Option<f64>,
    phi2: Option<f64>,
    max_sample: Option<u32>,
    cohort_size: Option<u32>,
    n_max: Option<u32>,
    #[serde(default)]
    no_elimination: bool,
}

async fn boundaries(
    Path(name): Path<String>,
    query: Result<Query<BoundaryQuery>, QueryRejection>,
) -> ApiResult<Json<BoundaryView>> {
    let Query(q) = query?;
    let name = canonical_design(&name);
    if !DESIGN_NAMES.contains(&name) {
        return Err(ApiError::not_found(format!(
            "unknown design '{name}'; available: {}",
            DESIGN_NAMES.join(", ")
        )));
    }
    let spec = SpecInput {
        phi1: q.phi1,
        phi2: q.phi2,
        max_sample: q.max_sample,
        cohort_size: q.cohort_size,
        no_elimination: q.no_elimination,
        ..SpecInput::target(q.phi)
    }
    .build()?;
    let n_max = q.n_max.unwrap_or(spec.max_sample);
    if n_max == 0 || n_max > spec.max_sample {
        return Err(ApiError::validation(
            "n_max",
            format!("must be in 1..={}", spec.max_sample),
        ));
    }
    let policy = build_design(name, spec, None)?;
    boundary_view(name, policy.as_ref(), n_max).map(Json).ok_or_else(|| {
        ApiError::validation(
            "name",
            format!("{name} decisions use every dose; it has no boundary table"),
        )
    })
}
