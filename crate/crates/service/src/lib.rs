//! HTTP facade over the avatar engine: sessions hold a shape, attached
//! garments and a motion frame; geometry is evaluated by the shared pipeline
//! and returned as a compact binary payload.

pub mod payload;
mod session;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use avatar_core::assets::AssetLibrary;

pub use session::{AppState, Session, SessionView};

pub const DEFAULT_IDLE: Duration = Duration::from_secs(30 * 60);

/// Error response: status plus a JSON body with at least `error` and `message`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: json!({"error": code, "message": message.into()}) }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, &format!("unknown_{what}"), format!("unknown {what} {id:?}"))
    }

    pub fn fields(fields: BTreeMap<String, String>) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({"error": "invalid_fields", "message": "request has invalid fields", "fields": fields}),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    body: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeRequest {
    weights: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionRequest {
    asset: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRequest {
    index: Value,
}

fn parse_json<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/assets", get(assets))
        .route("/geometry/layout", get(layout))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/shape", put(put_shape))
        .route("/sessions/{id}/garments/{gid}", post(attach_garment).delete(detach_garment))
        .route("/sessions/{id}/motion", post(load_motion).delete(unload_motion))
        .route("/sessions/{id}/frame", put(put_frame))
        .route("/sessions/{id}/geometry", get(geometry))
        .route("/sessions/{id}/topology", get(topology))
        .with_state(state)
}

async fn assets(State(state): State<AppState>) -> Json<AssetLibrary> {
    Json(state.library().clone())
}

async fn layout() -> Json<payload::LayoutDoc> {
    Json(payload::layout())
}

async fn create_session(State(state): State<AppState>, bytes: Bytes) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let req: CreateRequest = if bytes.is_empty() { CreateRequest::default() } else { parse_json(&bytes)? };
    let view = state.create_session(req.body.as_deref()).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    Ok(Json(s.view()))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.remove_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn put_shape(State(state): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<Value>> {
    let req: ShapeRequest = parse_json(&bytes)?;
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let requested = s.parse_weights(&req.weights)?;
    s.set_weights(&requested).map_err(|e| ApiError::internal(e.to_string()))?;
    let names = &s.body.basis.attribute_names;
    let applied: BTreeMap<&str, f64> =
        names.iter().map(String::as_str).zip(s.weights.values().iter().copied()).collect();
    let clamped: Vec<&str> = names
        .iter()
        .zip(requested.iter().zip(s.weights.values()))
        .filter(|(_, (r, a))| r != a)
        .map(|(n, _)| n.as_str())
        .collect();
    Ok(Json(json!({"weights": applied, "clamped": clamped, "revision": s.revision})))
}

async fn attach_garment(
    State(state): State<AppState>,
    Path((id, gid)): Path<(String, String)>,
) -> ApiResult<Json<SessionView>> {
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    if s.garments.iter().any(|g| g.id == gid) {
        return Err(ApiError::new(StatusCode::CONFLICT, "already_attached", format!("garment {gid:?} is already attached")));
    }
    let garment = state.garment(&s.body, &gid)?;
    s.garments.push(garment);
    s.bump();
    Ok(Json(s.view()))
}

async fn detach_garment(
    State(state): State<AppState>,
    Path((id, gid)): Path<(String, String)>,
) -> ApiResult<Json<SessionView>> {
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let slot = s.garments.iter().position(|g| g.id == gid).ok_or_else(|| ApiError::not_found("garment", &gid))?;
    s.garments.remove(slot);
    s.bump();
    Ok(Json(s.view()))
}

async fn load_motion(State(state): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<Value>> {
    let req: MotionRequest = parse_json(&bytes)?;
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let motion = state.motion(&s.body, &req.asset)?;
    let unmapped = motion.map.unmapped_target_names(&s.body.skeleton);
    let (frames, frame_time) = (motion.frame_count(), motion.clip.frame_time());
    s.motion = Some(motion);
    s.frame = 0;
    s.bump();
    Ok(Json(json!({
        "frame_count": frames,
        "frame_time": frame_time,
        "unmapped": unmapped,
        "revision": s.revision,
    })))
}

async fn unload_motion(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    if s.motion.take().is_none() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "no_motion", "no motion is loaded"));
    }
    s.frame = 0;
    s.bump();
    Ok(Json(s.view()))
}

async fn put_frame(State(state): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<Value>> {
    let req: FrameRequest = parse_json(&bytes)?;
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let reason = |r: &str| ApiError::fields([("index".to_string(), r.to_string())].into());
    let Some(motion) = &s.motion else {
        return Err(reason("no motion is loaded"));
    };
    let count = motion.frame_count();
    let index = req.index.as_u64().ok_or_else(|| reason("must be a non-negative integer"))? as usize;
    if index >= count {
        return Err(reason(&format!("must be below the frame count {count}")));
    }
    s.frame = index;
    s.bump();
    Ok(Json(json!({"frame": index, "revision": s.revision})))
}

async fn geometry(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let snapshot = session.lock().await.snapshot();
    let revision = snapshot.revision;
    let bytes = tokio::task::spawn_blocking(move || snapshot.encode())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Response::builder()
        .header(header::CONTENT_TYPE, "application/octet-stream")
        .header("x-revision", revision.to_string())
        .body(Body::from(bytes))
        .map_err(|e| ApiError::internal(e.to_string()))
}

async fn topology(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    let part = |id: Option<&str>, mesh: &avatar_core::geometry::Mesh| {
        let triangles: Vec<u32> = mesh.triangles().into_iter().flatten().collect();
        let uvs: Option<Vec<f32>> = mesh.uvs.as_ref().map(|t| t.iter().flat_map(|uv| uv.map(|c| c as f32)).collect());
        json!({"id": id, "vertex_count": mesh.vertex_count(), "triangles": triangles, "uvs": uvs})
    };
    let garments: Vec<Value> = s.garments.iter().map(|g| part(Some(&g.id), &g.asset.mesh)).collect();
    let skeleton: Vec<Value> =
        s.body.skeleton.joints().iter().map(|j| json!({"name": j.name, "parent": j.parent})).collect();
    Ok(Json(json!({
        "revision": s.revision,
        "body": part(None, &s.body.basis.rest_mesh),
        "garments": garments,
        "skeleton": skeleton,
    })))
}

/// Serves `state` on `addr`, evicting idle sessions once a minute.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let evictor = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            evictor.evict_idle();
        }
    });
    axum::serve(listener, router(state)).await
}
