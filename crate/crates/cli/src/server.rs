//! HTTP/JSON review service.
//!
//! | method | path       | body                          | reply                     |
//! |--------|------------|-------------------------------|---------------------------|
//! | GET    | `/state`   |                               | current `ReviewState`     |
//! | POST   | `/accept`  |                               | `{record, state}`         |
//! | POST   | `/correct` | `{"positions": [[x,y,z],…]}`  | `{record, state}`         |
//! | GET    | `/history` |                               | `TrackHistory`            |
//! | POST   | `/seek`    | `{"frame": t}`                | `ReviewState`             |
//!
//! Errors are `{"error": message}` with status 400 for a malformed body or
//! correction, 404 for a seek outside the reviewed range and 409 once every
//! frame is committed. Mutations are serialized; reads run concurrently.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mhht::model::Vec3;
use mhht::review::{ReviewSession, ReviewState};
use mhht::search::{FrameRecord, TrackHistory};
use mhht::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::commands::{load_archive, TrackerArgs};
use crate::CliResult;

struct AppState {
    session: RwLock<ReviewSession>,
    threshold: f64,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::OutOfRange(_) => StatusCode::NOT_FOUND,
            Error::Finished => StatusCode::CONFLICT,
            Error::DimensionMismatch { .. } | Error::InvalidInput(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

#[derive(Serialize)]
struct Committed {
    record: FrameRecord,
    state: ReviewState,
}

#[derive(Deserialize)]
struct SeekBody {
    frame: usize,
}

pub fn router(session: ReviewSession, threshold: f64) -> Router {
    let state = Arc::new(AppState {
        session: RwLock::new(session),
        threshold,
    });
    Router::new()
        .route("/state", get(get_state))
        .route("/accept", post(accept))
        .route("/correct", post(correct))
        .route("/history", get(history))
        .route("/seek", post(seek))
        .with_state(state)
}

async fn get_state(State(app): State<Arc<AppState>>) -> Json<ReviewState> {
    Json(app.session.read().await.state())
}

async fn history(State(app): State<Arc<AppState>>) -> Json<TrackHistory> {
    Json(app.session.read().await.history().clone())
}

async fn accept(State(app): State<Arc<AppState>>) -> Result<Json<Committed>, ApiError> {
    let mut s = app.session.write().await;
    let record = s.accept()?.clone();
    Ok(Json(Committed {
        record,
        state: s.state(),
    }))
}

/// Reads `{"positions": [[x, y, z], ...]}`. Anything that is not a finite
/// number, including `null`, is rejected.
fn parse_positions(body: &[u8]) -> Result<Vec<Vec3>, ApiError> {
    let v: Value =
        serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid JSON: {e}")))?;
    let list = v
        .get("positions")
        .and_then(Value::as_array)
        .ok_or_else(|| bad_request("body must have a \"positions\" array"))?;
    list.iter()
        .enumerate()
        .map(|(i, p)| {
            let coords = p
                .as_array()
                .filter(|c| c.len() == 3)
                .ok_or_else(|| bad_request(format!("position {i} must be [x, y, z]")))?;
            let mut out = [0.0; 3];
            for (o, c) in out.iter_mut().zip(coords) {
                *o = c
                    .as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad_request(format!("position {i} has a non-finite coordinate")))?;
            }
            Ok(Vec3::from(out))
        })
        .collect()
}

async fn correct(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Json<Committed>, ApiError> {
    let positions = parse_positions(&body)?;
    let mut s = app.session.write().await;
    let n = s.object_count();
    if positions.len() != n {
        return Err(bad_request(format!(
            "expected {n} positions, got {}",
            positions.len()
        )));
    }
    let record = s.correct(positions, app.threshold)?.clone();
    Ok(Json(Committed {
        record,
        state: s.state(),
    }))
}

async fn seek(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Json<ReviewState>, ApiError> {
    let SeekBody { frame } =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid seek body: {e}")))?;
    let mut s = app.session.write().await;
    s.seek(frame)?;
    Ok(Json(s.state()))
}

/// Builds the review session for an archive, starting after its initial state.
pub fn session_for(
    archive: &mhht::io::SequenceArchive,
    tracker: &TrackerArgs,
) -> CliResult<ReviewSession> {
    let graph = archive.graph()?;
    let cfg = tracker.search_config(&graph)?;
    let initial = archive.initial_state()?;
    let start = initial.frame_index + 1;
    if start >= archive.frame_count() {
        return Err(anyhow::anyhow!("archive has no frames after the initial state").into());
    }
    Ok(ReviewSession::new(
        initial,
        archive.detections[start..].to_vec(),
        graph,
        cfg,
    )?)
}

pub fn serve(archive: &Path, tracker: &TrackerArgs, addr: &str) -> CliResult<()> {
    let a = load_archive(archive)?;
    let app = router(session_for(&a, tracker)?, tracker.threshold);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("review service listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, std::io::Error>(())
    })?;
    Ok(())
}
