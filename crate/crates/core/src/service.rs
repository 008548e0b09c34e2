//! HTTP JSON API over a [`ReportStore`], used by the labeling frontend.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geom::Point3;
use crate::report::{now_ms, InspectionReport, LabelRecord, ReportStore};
use crate::tuning::{detection_metrics, DEFAULT_VIEW_RADIUS};
use crate::waypoint::WaypointCandidate;

/// Upper bound on points returned for one candidate.
pub const MAX_TRANSPORT_POINTS: usize = 20_000;

struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::MissingArtifact(_) => StatusCode::NOT_FOUND,
            Error::Param(_) | Error::Config(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

type Store = Arc<ReportStore>;

async fn blocking<T, F>(f: F) -> std::result::Result<T, ApiError>
where
    F: FnOnce() -> crate::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

async fn load(store: &Store, id: String) -> std::result::Result<InspectionReport, ApiError> {
    let s = store.clone();
    blocking(move || s.load(&id)).await
}

async fn sessions(State(store): State<Store>) -> ApiResult<Vec<crate::report::SessionSummary>> {
    let s = store.clone();
    Ok(Json(blocking(move || s.list()).await?))
}

async fn session(State(store): State<Store>, Path(id): Path<String>) -> ApiResult<InspectionReport> {
    Ok(Json(load(&store, id).await?))
}

/// Candidate summary without member points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub id: usize,
    pub centroid: Point3,
    pub point_count: usize,
    pub point_count_weighted: u64,
    pub max_score: f64,
    pub waypoint: Option<WaypointCandidate>,
    pub labels: Vec<LabelRecord>,
}

async fn candidates(State(store): State<Store>, Path(id): Path<String>) -> ApiResult<Vec<CandidateSummary>> {
    let r = load(&store, id).await?;
    Ok(Json(
        r.candidates
            .iter()
            .map(|c| CandidateSummary {
                id: c.id,
                centroid: c.centroid,
                point_count: c.point_count,
                point_count_weighted: c.point_count_weighted,
                max_score: c.max_score,
                waypoint: c.waypoint,
                labels: r.labels.iter().filter(|l| l.candidate_id == c.id).cloned().collect(),
            })
            .collect(),
    ))
}

#[derive(Debug, Deserialize)]
struct PointsQuery {
    max: Option<usize>,
}

/// One candidate's view: points decimated for transport plus label state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub session_id: String,
    pub candidate_id: usize,
    pub centroid: Point3,
    pub total_points: usize,
    pub points: Vec<Point3>,
    pub waypoint: Option<WaypointCandidate>,
    pub crop: Option<crate::report::MapCrop>,
    pub labels: Vec<LabelRecord>,
}

fn not_found(what: String) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, what)
}

async fn points(
    State(store): State<Store>,
    Path((sid, cid)): Path<(String, usize)>,
    Query(q): Query<PointsQuery>,
) -> ApiResult<CandidateView> {
    let r = load(&store, sid.clone()).await?;
    let c = r
        .candidate(cid)
        .ok_or_else(|| not_found(format!("candidate {cid} not in session '{sid}'")))?;
    let cap = q.max.unwrap_or(MAX_TRANSPORT_POINTS).clamp(1, MAX_TRANSPORT_POINTS);
    let pts = if c.points.len() > cap {
        let step = c.points.len() as f64 / cap as f64;
        (0..cap).map(|i| c.points[(i as f64 * step) as usize]).collect()
    } else {
        c.points.clone()
    };
    Ok(Json(CandidateView {
        session_id: sid,
        candidate_id: cid,
        centroid: c.centroid,
        total_points: c.points.len(),
        points: pts,
        waypoint: c.waypoint,
        crop: c.crop.clone(),
        labels: r.labels.iter().filter(|l| l.candidate_id == cid).cloned().collect(),
    }))
}

/// One label or several (multi-select).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LabelField {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
pub struct LabelRequest {
    pub label: LabelField,
    pub reviewer: String,
}

async fn label(
    State(store): State<Store>,
    Path((sid, cid)): Path<(String, usize)>,
    Json(req): Json<LabelRequest>,
) -> ApiResult<LabelRecord> {
    let r = load(&store, sid.clone()).await?;
    if r.candidate(cid).is_none() {
        return Err(not_found(format!("candidate {cid} not in session '{sid}'")));
    }
    let labels = match req.label {
        LabelField::One(s) => vec![s],
        LabelField::Many(v) => v,
    };
    let rec = LabelRecord {
        candidate_id: cid,
        labels,
        reviewer: req.reviewer,
        timestamp_ms: now_ms(),
    };
    let s = store.clone();
    Ok(Json(blocking(move || s.append_label(&sid, rec)).await?))
}

fn snapshot_f64(r: &InspectionReport, key: &str) -> Option<f64> {
    r.config.get("tuning")?.get(key)?.as_f64()
}

async fn metrics(State(store): State<Store>, Path(id): Path<String>) -> ApiResult<crate::tuning::DetectionMetrics> {
    let r = load(&store, id).await?;
    let view = snapshot_f64(&r, "view_radius").unwrap_or(DEFAULT_VIEW_RADIUS);
    let penalty = snapshot_f64(&r, "penalty_distance").unwrap_or(0.0);
    Ok(Json(detection_metrics(std::slice::from_ref(&r), view, penalty)))
}

/// Router with every API endpoint, backed by `store`.
pub fn router(store: ReportStore) -> Router {
    Router::new()
        .route("/api/sessions", get(sessions))
        .route("/api/sessions/{id}", get(session))
        .route("/api/sessions/{id}/candidates", get(candidates))
        .route("/api/sessions/{id}/metrics", get(metrics))
        .route("/api/candidates/{sid}/{cid}/points", get(points))
        .route("/api/candidates/{sid}/{cid}/label", post(label))
        .with_state(Arc::new(store))
}

/// Binds `addr` (failing if the port is taken) and returns the listener.
pub async fn bind(addr: SocketAddr) -> crate::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await.map_err(|e| {
        Error::Stage {
            stage: "serve",
            source: Box::new(Error::Io(std::io::Error::new(e.kind(), format!("cannot bind {addr}: {e}")))),
        }
    })
}

/// Serves the API until the process is interrupted.
pub async fn serve(store: ReportStore, listener: tokio::net::TcpListener) -> crate::Result<()> {
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
