use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use avatar_core::assets::{export_obj, import_obj};
use avatar_core::bvh::parse_bvh;
use avatar_core::geometry::{icosphere, Mesh, Vec3};
use avatar_core::shape::read_basis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn forge(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avatar-forge")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = forge(args, cwd);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/bvh").join(name)
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn demo_library_scans() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["demo", "lib", "--frames", "6"], tmp.path());
    let listing = ok(&["assets", "scan", "lib"], tmp.path());
    for id in ["demo-body", "cap", "shirt", "trousers", "walk", "wave"] {
        assert!(listing.contains(id), "{listing}");
    }
    assert!(listing.contains("6 assets"));
    let json: serde_json::Value = serde_json::from_str(&ok(&["assets", "scan", "lib", "--json"], tmp.path())).unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), 6);

    fs::write(tmp.path().join("lib/garments/dup.manifest.json"), r#"{"id":"cap","kind":"garment","name":"x","files":{"mesh":"cap.obj"}}"#).unwrap();
    let out = forge(&["assets", "scan", "lib"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate id: cap"));
}

#[test]
fn basis_build_recovers_planted_directions() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rest = icosphere(1);
    fs::write(tmp.path().join("rest.obj"), export_obj(&rest)).unwrap();
    let mut planted = Vec::new();
    for name in ["alpha", "beta"] {
        let field: Vec<Vec3> =
            (0..rest.vertex_count()).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let dir = tmp.path().join("corpus").join(name);
        fs::create_dir_all(&dir).unwrap();
        for (k, t) in [-0.5, 0.25, 1.0].iter().enumerate() {
            let verts = rest.vertices.iter().zip(&field).map(|(v, f)| v + f * *t).collect();
            let sample = Mesh::new(verts, rest.faces.clone(), None, None).unwrap();
            fs::write(dir.join(format!("s{k}.obj")), export_obj(&sample)).unwrap();
        }
        planted.push(field);
    }
    fs::write(tmp.path().join("corpus/notes.txt"), "ignored").unwrap();
    ok(&["basis", "build", "--corpus", "corpus", "--rest", "rest.obj", "--out", "b.avbasis"], tmp.path());
    let basis = read_basis(&fs::read(tmp.path().join("b.avbasis")).unwrap()[..]).unwrap();
    assert_eq!(basis.attribute_names, vec!["alpha", "beta"]);
    for (got, want) in basis.attributes.iter().zip(&planted) {
        let dot: f64 = got.iter().zip(want).map(|(a, b)| a.dot(b)).sum();
        let norm = |f: &[Vec3]| f.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        let cos = dot.abs() / (norm(got) * norm(want));
        assert!((cos - 1.0).abs() < 1e-6, "{cos}");
    }
    let info = ok(&["basis", "info", "b.avbasis"], tmp.path());
    assert!(info.contains("attributes: 2"));
    assert!(info.contains(&format!("vertices: {}", rest.vertex_count())));

    ok(&["basis", "build", "--corpus", "corpus", "--rest", "rest.obj", "--out", "b.json"], tmp.path());
    assert!(ok(&["basis", "info", "b.json"], tmp.path()).contains("alpha"));
}

#[test]
fn bvh_info_reports_hierarchy() {
    let tmp = tempfile::tempdir().unwrap();
    let file = fixture("11_branching_rig.bvh");
    let clip = parse_bvh(&fs::read_to_string(&file).unwrap()).unwrap();
    let info = ok(&["bvh", "info", file.to_str().unwrap()], tmp.path());
    assert!(info.contains(&format!("frames: {}", clip.frame_count())));
    assert!(info.contains(&format!("joints: {}", clip.skeleton().len())));
    for j in clip.skeleton().joints() {
        assert!(info.contains(&j.name));
    }
    let out = forge(&["bvh", "info", "missing.bvh"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn retarget_onto_same_skeleton_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["demo", "lib", "--frames", "12"], tmp.path());
    let file = tmp.path().join("lib/motions/walk.bvh");
    let f = file.to_str().unwrap();
    let stdout = ok(&["retarget", "--bvh", f, "--target", f, "--map", "lib/motions/walk.map.json", "--out", "same.bvh"], tmp.path());
    assert!(stdout.contains("scale: 1"));
    let a = parse_bvh(&fs::read_to_string(&file).unwrap()).unwrap();
    let b = parse_bvh(&fs::read_to_string(tmp.path().join("same.bvh")).unwrap()).unwrap();
    assert_eq!(a.frame_count(), b.frame_count());
    for f in 0..a.frame_count() {
        let (pa, pb) = (a.pose_at_frame(f).unwrap(), b.pose_at_frame(f).unwrap());
        assert!((pa.root_translation - pb.root_translation).norm() < 1e-4);
        for (qa, qb) in pa.local_rotations.iter().zip(&pb.local_rotations) {
            assert!(qa.angle_to(qb) < 1e-4);
        }
    }

    ok(&["retarget", "--bvh", f, "--target", f, "--map", "lib/motions/walk.map.json", "--out", "same.poses"], tmp.path());
    let bytes = fs::read(tmp.path().join("same.poses")).unwrap();
    assert_eq!(&bytes[..4], b"AVPS");
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    assert_eq!((u32_at(4), u32_at(8), u32_at(12)), (1, a.skeleton().len(), a.frame_count()));
    let names: usize = a.skeleton().joints().iter().map(|j| 4 + j.name.len()).sum();
    assert_eq!(bytes.len(), 24 + names + a.frame_count() * (3 + 4 * a.skeleton().len()) * 8);
}

#[test]
fn retarget_reports_mapping_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = forge(
        &["retarget", "--bvh", fixture("11_branching_rig.bvh").to_str().unwrap(), "--target", fixture("01_single_joint.bvh").to_str().unwrap(), "--out", "x.bvh"],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(!tmp.path().join("x.bvh").exists());
}

#[test]
fn garment_prepare_against_mesh_body() {
    let tmp = tempfile::tempdir().unwrap();
    let body = icosphere(3);
    let mut cloth = icosphere(2);
    cloth.vertices.iter_mut().for_each(|v| *v *= 0.9);
    cloth.recompute_normals();
    fs::write(tmp.path().join("body.obj"), export_obj(&body)).unwrap();
    fs::write(tmp.path().join("cloth.obj"), export_obj(&cloth)).unwrap();
    let stdout = ok(&["garment", "prepare", "--body", "body.obj", "--cloth", "cloth.obj", "--out", "g", "--epsilon", "0.01"], tmp.path());
    assert!(stdout.contains(&format!("moved {0} of {0}", cloth.vertex_count())));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("g/cloth.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "garment");
    assert_eq!(manifest["epsilon"], 0.01);
    assert!(manifest["files"].get("weights").is_none());
    let out = import_obj(&fs::read_to_string(tmp.path().join("g/cloth.obj")).unwrap()).unwrap();
    for v in &out.vertices {
        assert!(v.norm() >= 1.01 - 5e-3, "{}", v.norm());
    }
}

#[test]
fn garment_prepare_against_body_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["demo", "lib", "--frames", "2"], tmp.path());
    ok(
        &["garment", "prepare", "--body", "lib/body/demo-body.manifest.json", "--cloth", "lib/garments/cap.obj", "--out", "lib/extra", "--id", "cap2", "--albedo", "lib/garments/cap_albedo.png"],
        tmp.path(),
    );
    let listing = ok(&["assets", "scan", "lib"], tmp.path());
    assert!(listing.contains("cap2"));
    assert!(listing.contains("7 assets"));
    let manifest = fs::read_to_string(tmp.path().join("lib/extra/cap2.manifest.json")).unwrap();
    assert!(manifest.contains("cap2.weights.json"));
    assert!(manifest.contains("cap_albedo.png"));
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["demo", "lib", "--frames", "10"], tmp.path());
    let config = |out: &str| {
        format!(
            r#"{{"library": "lib", "body": "demo-body", "shapes": [[0,0,0,0,0,0,0]],
                "sampling": {{"ranges": {{"height": [-1, 1], "weight": [-0.5, 0.5]}}, "seed": 3, "count": 1}},
                "garment_sets": [["shirt"], ["trousers", "cap"]], "motions": ["walk", "wave"], "stride": 5,
                "outputs": {{"mesh": true, "joints3d": true, "segmentation": true, "normals": true}},
                "output_dir": "{out}"}}"#
        )
    };
    fs::write(tmp.path().join("a.json"), config("run_a")).unwrap();
    fs::write(tmp.path().join("b.json"), config("run_b")).unwrap();
    let stdout = ok(&["generate", "--config", "a.json"], tmp.path());
    assert!(stdout.contains("combinations: 16"), "{stdout}");
    assert!(stdout.contains("failed: 0"));
    ok(&["generate", "--config", "b.json"], tmp.path());
    let (a, b) = (tree(&tmp.path().join("run_a")), tree(&tmp.path().join("run_b")));
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let again = forge(&["generate", "--config", "a.json"], tmp.path());
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("not empty"));
}

#[test]
fn bad_invocations_fail() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!forge(&[], tmp.path()).status.success());
    assert!(!forge(&["basis"], tmp.path()).status.success());
    assert!(!forge(&["generate"], tmp.path()).status.success());
    fs::write(tmp.path().join("c.json"), "{}").unwrap();
    let out = forge(&["generate", "--config", "c.json"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!forge(&["serve", "--assets", "nowhere", "--port", "0"], tmp.path()).status.success());
}
