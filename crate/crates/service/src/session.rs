use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use serde::Serialize;
use serde_json::{json, Value};

use avatar_core::assets::{AssetError, AssetKind, AssetLibrary, BodyAsset};
use avatar_core::pipeline::{evaluate, BoundMotion, DressedGarment, Evaluation, PipelineError};
use avatar_core::shape::{ShapeError, ShapeWeights};

use crate::payload;
use crate::ApiError;

/// One client's editing state. Every successful mutation bumps `revision` by one.
pub struct Session {
    pub id: String,
    pub body: Arc<BodyAsset>,
    pub weights: ShapeWeights,
    pub garments: Vec<Arc<DressedGarment>>,
    pub motion: Option<Arc<BoundMotion>>,
    pub frame: usize,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeView {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionView {
    pub id: String,
    pub frame_count: usize,
    pub frame_time: f64,
    pub unmapped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub id: String,
    pub revision: u64,
    pub body: String,
    pub attributes: Vec<AttributeView>,
    pub garments: Vec<String>,
    pub motion: Option<MotionView>,
    pub frame: usize,
}

/// Immutable copy of what geometry depends on.
pub struct Snapshot {
    pub revision: u64,
    body: Arc<BodyAsset>,
    weights: ShapeWeights,
    garments: Vec<Arc<DressedGarment>>,
    motion: Option<(Arc<BoundMotion>, usize)>,
}

impl Snapshot {
    pub fn evaluate(&self) -> Result<Evaluation, PipelineError> {
        let garments: Vec<&DressedGarment> = self.garments.iter().map(Arc::as_ref).collect();
        evaluate(&self.body, &self.weights, &garments, self.motion.as_ref().map(|(m, f)| (m.as_ref(), *f)))
    }

    pub fn encode(&self) -> Result<Vec<u8>, PipelineError> {
        Ok(payload::encode(self.revision as u32, &self.evaluate()?))
    }
}

impl Session {
    pub fn bump(&mut self) {
        self.revision += 1;
    }

    pub fn view(&self) -> SessionView {
        let basis = &self.body.basis;
        SessionView {
            id: self.id.clone(),
            revision: self.revision,
            body: self.body.id.clone(),
            attributes: basis
                .attribute_names
                .iter()
                .zip(&basis.weight_bounds)
                .zip(self.weights.values())
                .map(|((name, &(low, high)), &value)| AttributeView { name: name.clone(), low, high, value })
                .collect(),
            garments: self.garments.iter().map(|g| g.id.clone()).collect(),
            motion: self.motion.as_ref().map(|m| MotionView {
                id: m.id.clone(),
                frame_count: m.frame_count(),
                frame_time: m.clip.frame_time(),
                unmapped: m.map.unmapped_target_names(&self.body.skeleton),
            }),
            frame: self.frame,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            revision: self.revision,
            body: self.body.clone(),
            weights: self.weights.clone(),
            garments: self.garments.clone(),
            motion: self.motion.clone().map(|m| (m, self.frame)),
        }
    }

    /// Full requested weight vector from `{"name": value, ...}` (partial update)
    /// or `[v0, v1, ...]` (all attributes), with per-field reasons on failure.
    pub fn parse_weights(&self, input: &Value) -> Result<Vec<f64>, ApiError> {
        let names = &self.body.basis.attribute_names;
        let mut values = self.weights.values().to_vec();
        let mut reasons = BTreeMap::new();
        let number = |v: &Value| v.as_f64().filter(|x| x.is_finite());
        match input {
            Value::Object(map) => {
                for (name, v) in map {
                    match (names.iter().position(|n| n == name), number(v)) {
                        (None, _) => {
                            reasons.insert(name.clone(), "unknown attribute".to_string());
                        }
                        (Some(_), None) => {
                            reasons.insert(name.clone(), "must be a finite number".to_string());
                        }
                        (Some(k), Some(x)) => values[k] = x,
                    }
                }
            }
            Value::Array(list) => {
                if list.len() != names.len() {
                    reasons.insert("weights".into(), format!("expected {} values, got {}", names.len(), list.len()));
                } else {
                    for (k, v) in list.iter().enumerate() {
                        match number(v) {
                            Some(x) => values[k] = x,
                            None => {
                                reasons.insert(names[k].clone(), "must be a finite number".to_string());
                            }
                        }
                    }
                }
            }
            _ => {
                reasons.insert("weights".into(), "must be an object or an array".to_string());
            }
        }
        if reasons.is_empty() {
            Ok(values)
        } else {
            Err(ApiError::fields(reasons))
        }
    }

    pub fn set_weights(&mut self, values: &[f64]) -> Result<(), ShapeError> {
        self.weights = ShapeWeights::clamped(&self.body.basis, values)?;
        self.bump();
        Ok(())
    }
}

struct Slot {
    session: Arc<tokio::sync::Mutex<Session>>,
    last_used: Instant,
}

struct Inner {
    library: AssetLibrary,
    idle: Duration,
    sessions: Mutex<HashMap<String, Slot>>,
    bodies: Mutex<HashMap<String, Arc<BodyAsset>>>,
    garments: Mutex<HashMap<(String, String), Arc<DressedGarment>>>,
    motions: Mutex<HashMap<(String, String), Arc<BoundMotion>>>,
}

/// Shared service state: the immutable library, loaded-asset caches and sessions.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

fn asset_error(e: AssetError) -> ApiError {
    match e {
        AssetError::UnknownId(id) => ApiError::not_found("asset", &id),
        AssetError::WrongKind { id, expected, actual } => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "wrong_kind",
            format!("asset {id:?} is a {}, not a {}", kind_name(actual), kind_name(expected)),
        ),
        other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "asset_error", other.to_string()),
    }
}

fn kind_name(k: AssetKind) -> String {
    serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl AppState {
    pub fn new(library: AssetLibrary, idle: Duration) -> Self {
        AppState(Arc::new(Inner {
            library,
            idle,
            sessions: Mutex::new(HashMap::new()),
            bodies: Mutex::new(HashMap::new()),
            garments: Mutex::new(HashMap::new()),
            motions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn library(&self) -> &AssetLibrary {
        &self.0.library
    }

    pub fn body(&self, id: &str) -> Result<Arc<BodyAsset>, ApiError> {
        if let Some(b) = lock(&self.0.bodies).get(id) {
            return Ok(b.clone());
        }
        let body = Arc::new(self.0.library.load_body(id).map_err(asset_error)?);
        Ok(lock(&self.0.bodies).entry(id.to_string()).or_insert(body).clone())
    }

    pub fn garment(&self, body: &Arc<BodyAsset>, id: &str) -> Result<Arc<DressedGarment>, ApiError> {
        let key = (body.id.clone(), id.to_string());
        if let Some(g) = lock(&self.0.garments).get(&key) {
            return Ok(g.clone());
        }
        let asset = self.0.library.load_garment(id, &body.skeleton).map_err(asset_error)?;
        let dressed = DressedGarment::new(id, asset, body)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "asset_error", e.to_string()))?;
        Ok(lock(&self.0.garments).entry(key).or_insert(Arc::new(dressed)).clone())
    }

    pub fn motion(&self, body: &Arc<BodyAsset>, id: &str) -> Result<Arc<BoundMotion>, ApiError> {
        let key = (body.id.clone(), id.to_string());
        if let Some(m) = lock(&self.0.motions).get(&key) {
            return Ok(m.clone());
        }
        let asset = self.0.library.load_motion(id).map_err(asset_error)?;
        let bound = BoundMotion::new(asset, body).map_err(|e| ApiError {
            status: StatusCode::CONFLICT,
            body: json!({"error": "retarget", "message": e.to_string(), "detail": e}),
        })?;
        Ok(lock(&self.0.motions).entry(key).or_insert(Arc::new(bound)).clone())
    }

    /// New session at the rest shape on `body`, or the first body in the library.
    pub async fn create_session(&self, body: Option<&str>) -> Result<SessionView, ApiError> {
        let body_id = match body {
            Some(id) => id.to_string(),
            None => self
                .0
                .library
                .of_kind(AssetKind::BodyBasis)
                .next()
                .map(|e| e.id.clone())
                .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_body", "library has no body asset"))?,
        };
        let body = self.body(&body_id)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session {
            id: id.clone(),
            weights: body.basis.zero_weights(),
            body,
            garments: Vec::new(),
            motion: None,
            frame: 0,
            revision: 0,
        };
        let view = session.view();
        let slot = Slot { session: Arc::new(tokio::sync::Mutex::new(session)), last_used: Instant::now() };
        lock(&self.0.sessions).insert(id, slot);
        Ok(view)
    }

    pub fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        let mut sessions = lock(&self.0.sessions);
        let slot = sessions.get_mut(id).ok_or_else(|| ApiError::not_found("session", id))?;
        slot.last_used = Instant::now();
        Ok(slot.session.clone())
    }

    pub fn remove_session(&self, id: &str) -> Result<(), ApiError> {
        lock(&self.0.sessions).remove(id).map(|_| ()).ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn session_count(&self) -> usize {
        lock(&self.0.sessions).len()
    }

    /// Drops sessions idle for longer than the configured timeout and not in use.
    pub fn evict_idle(&self) -> usize {
        let now = Instant::now();
        let mut sessions = lock(&self.0.sessions);
        let before = sessions.len();
        sessions.retain(|_, s| Arc::strong_count(&s.session) > 1 || now.duration_since(s.last_used) <= self.0.idle);
        before - sessions.len()
    }
}
