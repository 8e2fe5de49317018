use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Duration;

use avatar_core::assets::{scan_library, write_manifest, AssetKind, Manifest};
use avatar_core::bvh::{write_bvh, MotionClip};
use avatar_core::demo::write_demo_library;
use avatar_core::geometry::{Joint, Pose, Skeleton, Vec3};
use avatar_core::pipeline::{evaluate, BoundMotion, DressedGarment, Evaluation};
use avatar_core::shape::ShapeWeights;
use avatar_service::payload::{decode, Geometry, SectionKind};
use avatar_service::{router, AppState, DEFAULT_IDLE};
use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

fn library_dir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        write_demo_library(dir.path(), 24).unwrap();
        add_headless_motion(dir.path());
        dir
    })
    .path()
}

fn add_headless_motion(lib: &Path) {
    let joint = |name: &str, parent, y| Joint { name: name.into(), parent, rest_offset: Vec3::new(0.0, y, 0.0), end_site: None };
    let skel = Skeleton::new(vec![joint("Hips", None, 0.0), joint("Spine", Some(0), 10.0)]).unwrap();
    let clip = MotionClip::from_poses(skel, &[Pose::identity(2)], 1.0 / 30.0).unwrap();
    let dir = lib.join("motions");
    std::fs::write(dir.join("stub.bvh"), write_bvh(&clip)).unwrap();
    let manifest = Manifest {
        id: "stub".into(),
        kind: AssetKind::Motion,
        name: "Stub".into(),
        files: [("clip".to_string(), "stub.bvh".to_string())].into(),
        thumbnail: None,
        epsilon: None,
    };
    write_manifest(&dir, &manifest).unwrap();
}

fn app_with(idle: Duration) -> (Router, AppState) {
    let state = AppState::new(scan_library(library_dir()).unwrap(), idle);
    (router(state.clone()), state)
}

fn app() -> Router {
    app_with(DEFAULT_IDLE).0
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn json_call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn new_session(app: &Router) -> String {
    let (s, v) = json_call(app, Method::POST, "/sessions", None).await;
    assert_eq!(s, StatusCode::CREATED);
    v["id"].as_str().unwrap().to_string()
}

async fn fetch_geometry(app: &Router, id: &str) -> Geometry {
    let (s, b) = call(app, Method::GET, &format!("/sessions/{id}/geometry"), None).await;
    assert_eq!(s, StatusCode::OK);
    decode(&b).unwrap()
}

struct Offline {
    body: avatar_core::assets::BodyAsset,
    lib: avatar_core::assets::AssetLibrary,
}

impl Offline {
    fn new() -> Self {
        let lib = scan_library(library_dir()).unwrap();
        Offline { body: lib.load_body("demo-body").unwrap(), lib }
    }

    fn run(&self, weights: &[f64], garments: &[&str], motion: Option<(&str, usize)>) -> Evaluation {
        let dressed: Vec<DressedGarment> = garments
            .iter()
            .map(|g| DressedGarment::new(g, self.lib.load_garment(g, &self.body.skeleton).unwrap(), &self.body).unwrap())
            .collect();
        let refs: Vec<&DressedGarment> = dressed.iter().collect();
        let bound = motion.map(|(m, f)| (BoundMotion::new(self.lib.load_motion(m).unwrap(), &self.body).unwrap(), f));
        let w = ShapeWeights::clamped(&self.body.basis, weights).unwrap();
        evaluate(&self.body, &w, &refs, bound.as_ref().map(|(m, f)| (m, *f))).unwrap()
    }
}

/// Offline evaluation converted to f32 independently of the service encoder.
fn assert_matches(g: &Geometry, e: &Evaluation) {
    let flat = |m: &avatar_core::geometry::Mesh| -> Vec<u32> {
        let n = m.normals.as_ref().unwrap();
        m.vertices
            .iter()
            .zip(n)
            .flat_map(|(p, n)| [p.x, p.y, p.z, n.x, n.y, n.z])
            .map(|c| (c as f32).to_bits())
            .collect()
    };
    let bits = |d: &[f32]| -> Vec<u32> { d.iter().map(|f| f.to_bits()).collect() };
    assert_eq!(g.sections.len(), e.garments.len() + 2);
    assert_eq!(g.sections[0].kind, SectionKind::Body);
    assert_eq!(bits(&g.sections[0].data), flat(&e.body));
    for (k, m) in e.garments.iter().enumerate() {
        assert_eq!((g.sections[k + 1].kind, g.sections[k + 1].index), (SectionKind::Garment, k as u32));
        assert_eq!(bits(&g.sections[k + 1].data), flat(m));
    }
    let last = g.sections.last().unwrap();
    assert_eq!(last.kind, SectionKind::Joints);
    let joints: Vec<u32> = e.joints.iter().flat_map(|p| [p.x, p.y, p.z]).map(|c| (c as f32).to_bits()).collect();
    assert_eq!(bits(&last.data), joints);
}

#[tokio::test]
async fn new_session_returns_rest_body() {
    let app = app();
    let id = new_session(&app).await;
    let (s, v) = json_call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["revision"], 0);
    assert_eq!(v["garments"], json!([]));
    assert_eq!(v["motion"], Value::Null);
    assert_eq!(v["attributes"].as_array().unwrap().len(), 7);
    let g = fetch_geometry(&app, &id).await;
    assert_eq!(g.revision, 0);
    let offline = Offline::new();
    assert_matches(&g, &offline.run(&[0.0; 7], &[], None));
    let rest = &offline.body.basis.rest_mesh.vertices;
    for (k, p) in rest.iter().enumerate() {
        let d = &g.sections[0].data[k * 6..k * 6 + 3];
        assert!((Vec3::new(d[0] as f64, d[1] as f64, d[2] as f64) - p).norm() < 1e-5);
    }
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = app();
    for (m, uri) in [
        (Method::GET, "/sessions/nope"),
        (Method::GET, "/sessions/nope/geometry"),
        (Method::PUT, "/sessions/nope/frame"),
        (Method::POST, "/sessions/nope/garments/cap"),
    ] {
        let (s, v) = json_call(&app, m, uri, Some(json!({"index": 0}))).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["error"], "unknown_session");
    }
}

#[tokio::test]
async fn shape_is_clamped_and_geometry_follows() {
    let app = app();
    let id = new_session(&app).await;
    let (_, session) = json_call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let high = session["attributes"][1]["high"].as_f64().unwrap();
    let (s, v) = json_call(&app, Method::PUT, &format!("/sessions/{id}/shape"), Some(json!({"weights": {"weight": high + 5.0, "height": 0.25}}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["weights"]["weight"].as_f64().unwrap(), high);
    assert_eq!(v["weights"]["height"].as_f64().unwrap(), 0.25);
    assert_eq!(v["clamped"], json!(["weight"]));
    assert_eq!(v["revision"], 1);
    let g = fetch_geometry(&app, &id).await;
    assert_eq!(g.revision, 1);
    let mut w = [0.0; 7];
    w[0] = 0.25;
    w[1] = high;
    assert_matches(&g, &Offline::new().run(&w, &[], None));
}

#[tokio::test]
async fn invalid_weights_are_422_per_field() {
    let app = app();
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/shape");
    let (s, v) = json_call(&app, Method::PUT, &uri, Some(json!({"weights": {"wingspan": 1.0, "height": "tall"}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"]["wingspan"], "unknown attribute");
    assert_eq!(v["fields"]["height"], "must be a finite number");
    let (s, v) = json_call(&app, Method::PUT, &uri, Some(json!({"weights": [1.0, 2.0]}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["fields"]["weights"].as_str().unwrap().contains("expected 7"));
    let (_, v) = json_call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["revision"], 0);
}

#[tokio::test]
async fn garments_attach_and_detach() {
    let app = app();
    let id = new_session(&app).await;
    let (s, v) = json_call(&app, Method::POST, &format!("/sessions/{id}/garments/shirt"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["revision"].clone(), v["garments"].clone()), (json!(1), json!(["shirt"])));
    let (s, _) = json_call(&app, Method::POST, &format!("/sessions/{id}/garments/shirt"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, v) = json_call(&app, Method::POST, &format!("/sessions/{id}/garments/ghost"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_asset");
    let (s, _) = json_call(&app, Method::POST, &format!("/sessions/{id}/garments/walk"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    json_call(&app, Method::POST, &format!("/sessions/{id}/garments/cap"), None).await;
    let g = fetch_geometry(&app, &id).await;
    assert_eq!(g.sections.len(), 4);
    assert_matches(&g, &Offline::new().run(&[0.0; 7], &["shirt", "cap"], None));
    let (s, v) = json_call(&app, Method::DELETE, &format!("/sessions/{id}/garments/shirt"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["revision"].clone(), v["garments"].clone()), (json!(3), json!(["cap"])));
    let (s, _) = json_call(&app, Method::DELETE, &format!("/sessions/{id}/garments/shirt"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (_, topo) = json_call(&app, Method::GET, &format!("/sessions/{id}/topology"), None).await;
    assert_eq!(topo["garments"][0]["id"], "cap");
    let g = fetch_geometry(&app, &id).await;
    assert_eq!(topo["garments"][0]["vertex_count"].as_u64().unwrap() as usize * 6, g.sections[1].data.len());
}

#[tokio::test]
async fn motion_frame_matches_offline_pipeline() {
    let app = app();
    let id = new_session(&app).await;
    let (s, v) = json_call(&app, Method::PUT, &format!("/sessions/{id}/frame"), Some(json!({"index": 0}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"]["index"], "no motion is loaded");
    let (s, v) = json_call(&app, Method::POST, &format!("/sessions/{id}/motion"), Some(json!({"asset": "walk"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["frame_count"], 24);
    assert_eq!(v["revision"], 1);
    assert!(v["unmapped"].is_array());
    let (s, v) = json_call(&app, Method::PUT, &format!("/sessions/{id}/frame"), Some(json!({"index": 5}))).await;
    assert_eq!((s, v["revision"].clone()), (StatusCode::OK, json!(2)));
    let g = fetch_geometry(&app, &id).await;
    assert_matches(&g, &Offline::new().run(&[0.0; 7], &[], Some(("walk", 5))));
    for bad in [json!(24), json!(-1), json!("five")] {
        let (s, _) = json_call(&app, Method::PUT, &format!("/sessions/{id}/frame"), Some(json!({"index": bad}))).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    }
    let (s, v) = json_call(&app, Method::DELETE, &format!("/sessions/{id}/motion"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["motion"], Value::Null);
}

#[tokio::test]
async fn unmapped_bones_are_409_with_retarget_payload() {
    let app = app();
    let id = new_session(&app).await;
    let (s, v) = json_call(&app, Method::POST, &format!("/sessions/{id}/motion"), Some(json!({"asset": "stub"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "retarget");
    assert_eq!(v["detail"]["error"], "unmapped_bones");
    assert!(v["detail"]["missing"].as_array().unwrap().contains(&json!("head")));
    let (_, v) = json_call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["revision"], 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_serialize() {
    let app = app();
    let id = new_session(&app).await;
    let tasks: Vec<_> = (0..40)
        .map(|k| {
            let app = app.clone();
            let uri = format!("/sessions/{id}/shape");
            tokio::spawn(async move {
                let (s, v) = json_call(&app, Method::PUT, &uri, Some(json!({"weights": {"height": k as f64 / 100.0}}))).await;
                assert_eq!(s, StatusCode::OK);
                v["revision"].as_u64().unwrap()
            })
        })
        .collect();
    let mut revisions = BTreeSet::new();
    for t in tasks {
        revisions.insert(t.await.unwrap());
    }
    assert_eq!(revisions, (1..=40).collect());
    let (_, v) = json_call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["revision"], 40);
}

#[tokio::test]
async fn idle_sessions_are_evicted() {
    let (app, state) = app_with(Duration::ZERO);
    let id = new_session(&app).await;
    std::thread::sleep(Duration::from_millis(5));
    assert_eq!(state.evict_idle(), 1);
    let (s, _) = json_call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (app, state) = app_with(DEFAULT_IDLE);
    let id = new_session(&app).await;
    assert_eq!(state.evict_idle(), 0);
    let (s, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn catalogue_and_layout() {
    let app = app();
    let (s, v) = json_call(&app, Method::GET, "/assets", None).await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = v["entries"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids, vec!["cap", "demo-body", "shirt", "stub", "trousers", "walk", "wave"]);
    let (s, v) = json_call(&app, Method::GET, "/geometry/layout", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["magic"], "AVGM");
    assert_eq!(v["version"], 1);
    let (s, v) = json_call(&app, Method::POST, "/sessions", Some(json!({"body": "shirt"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "wrong_kind");
}
