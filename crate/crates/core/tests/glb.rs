use std::collections::{BTreeMap, HashMap};

use avatar_core::assets::{export_glb, GltfError, Scene, SceneMesh};
use avatar_core::demo::{auto_binding, body_basis, humanoid_skeleton, shirt};
use avatar_core::geometry::{Pose, Quat, Vec3};
use avatar_core::skin::{prepare_garment, skin_mesh, DEFAULT_EPSILON};
use gltf::animation::util::ReadOutputs;
use nalgebra::{Matrix4, Translation3, UnitQuaternion, Vector3};

fn poses(n: usize) -> Vec<Pose> {
    let skel = humanoid_skeleton();
    (0..n)
        .map(|f| {
            let mut p = Pose::identity(skel.len());
            p.root_translation = Vec3::new(0.05 * f as f64, 0.02, 0.0);
            p.local_rotations[skel.find("forearm.L").unwrap()] = Quat::from_euler_angles(0.0, 0.3, 0.9);
            p.local_rotations[skel.find("thigh.R").unwrap()] = Quat::from_euler_angles(0.4 + 0.1 * f as f64, 0.0, 0.0);
            p.local_rotations[skel.find("spine").unwrap()] = Quat::from_euler_angles(0.0, 0.2, 0.0);
            p
        })
        .collect()
}

struct Parsed {
    doc: gltf::Document,
    blob: Vec<u8>,
}

fn parse(bytes: &[u8]) -> Parsed {
    let g = gltf::Gltf::from_slice(bytes).expect("valid glb");
    let blob = g.blob.clone().expect("binary chunk");
    Parsed { doc: g.document, blob }
}

/// World matrices of all nodes with local TRS overridden by animation keyframe `key`.
fn node_worlds(p: &Parsed, key: usize) -> Vec<Matrix4<f32>> {
    let mut rot: HashMap<usize, [f32; 4]> = HashMap::new();
    let mut trans: HashMap<usize, [f32; 3]> = HashMap::new();
    for anim in p.doc.animations() {
        for ch in anim.channels() {
            let reader = ch.reader(|_| Some(&p.blob));
            let node = ch.target().node().index();
            match reader.read_outputs().unwrap() {
                ReadOutputs::Rotations(r) => {
                    rot.insert(node, r.into_f32().nth(key).unwrap());
                }
                ReadOutputs::Translations(mut t) => {
                    trans.insert(node, t.nth(key).unwrap());
                }
                _ => panic!("unexpected channel"),
            }
        }
    }
    let nodes: Vec<gltf::Node> = p.doc.nodes().collect();
    let mut parent = vec![None; nodes.len()];
    for n in &nodes {
        for c in n.children() {
            parent[c.index()] = Some(n.index());
        }
    }
    let local = |i: usize| {
        let (t, r, s) = nodes[i].transform().decomposed();
        let t = trans.get(&i).copied().unwrap_or(t);
        let r = rot.get(&i).copied().unwrap_or(r);
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(r[3], r[0], r[1], r[2]));
        Translation3::new(t[0], t[1], t[2]).to_homogeneous()
            * q.to_homogeneous()
            * Matrix4::new_nonuniform_scaling(&Vector3::new(s[0], s[1], s[2]))
    };
    fn world(i: usize, parent: &[Option<usize>], local: &dyn Fn(usize) -> Matrix4<f32>) -> Matrix4<f32> {
        match parent[i] {
            Some(p) => world(p, parent, local) * local(i),
            None => local(i),
        }
    }
    (0..nodes.len()).map(|i| world(i, &parent, &local)).collect()
}

/// Skinned positions per mesh, evaluated purely from the file contents.
fn reskin(p: &Parsed, key: usize) -> Vec<Vec<Vector3<f32>>> {
    let worlds = node_worlds(p, key);
    let mut out = Vec::new();
    for node in p.doc.nodes() {
        let (Some(mesh), Some(skin)) = (node.mesh(), node.skin()) else { continue };
        let sr = skin.reader(|_| Some(&p.blob));
        let ibms: Vec<Matrix4<f32>> =
            sr.read_inverse_bind_matrices().unwrap().map(|m| Matrix4::from_fn(|r, c| m[c][r])).collect();
        let joints: Vec<Matrix4<f32>> =
            skin.joints().zip(&ibms).map(|(j, ibm)| worlds[j.index()] * ibm).collect();
        for prim in mesh.primitives() {
            let r = prim.reader(|_| Some(&p.blob));
            let pos: Vec<[f32; 3]> = r.read_positions().unwrap().collect();
            let js: Vec<[u16; 4]> = r.read_joints(0).unwrap().into_u16().collect();
            let ws: Vec<[f32; 4]> = r.read_weights(0).unwrap().into_f32().collect();
            out.push(
                pos.iter()
                    .zip(js.iter().zip(&ws))
                    .map(|(v, (j, w))| {
                        let h = nalgebra::Vector4::new(v[0], v[1], v[2], 1.0);
                        let mut acc = nalgebra::Vector4::zeros();
                        for k in 0..4 {
                            acc += joints[j[k] as usize] * h * w[k];
                        }
                        acc.xyz()
                    })
                    .collect(),
            );
        }
    }
    out
}

#[test]
fn animated_scene_reimports_and_matches_skinning() {
    let skel = humanoid_skeleton();
    let basis = body_basis();
    let body = &basis.rest_mesh;
    let binding = auto_binding(body, &skel);
    let cloth = prepare_garment(body, &binding, &shirt(), DEFAULT_EPSILON, Default::default()).unwrap();
    let cloth_binding = cloth.binding.clone().unwrap();
    let poses = poses(2);
    let textures: BTreeMap<String, String> =
        [("albedo".to_string(), "shirt_albedo.png".to_string()), ("normal".to_string(), "shirt_normal.png".to_string())]
            .into();
    let scene = Scene {
        skeleton: &skel,
        meshes: vec![
            SceneMesh { name: "body".into(), mesh: body, binding: &binding, textures: BTreeMap::new() },
            SceneMesh { name: "shirt".into(), mesh: &cloth.mesh, binding: &cloth_binding, textures },
        ],
        poses: &poses,
        frame_time: 1.0 / 30.0,
    };
    let bytes = export_glb(&scene).unwrap();
    let parsed = parse(&bytes);

    let skins: Vec<_> = parsed.doc.skins().collect();
    assert_eq!(skins.len(), 2);
    for s in &skins {
        assert_eq!(s.joints().count(), skel.len());
    }
    let anims: Vec<_> = parsed.doc.animations().collect();
    assert_eq!(anims.len(), 1);
    for ch in anims[0].channels() {
        let times: Vec<f32> = ch.reader(|_| Some(&parsed.blob)).read_inputs().unwrap().collect();
        assert_eq!(times, vec![0.0, 1.0 / 30.0]);
    }
    let uris: Vec<String> = parsed
        .doc
        .images()
        .map(|i| match i.source() {
            gltf::image::Source::Uri { uri, .. } => uri.to_string(),
            _ => panic!("textures must be referenced"),
        })
        .collect();
    assert_eq!(uris, vec!["shirt_albedo.png", "shirt_normal.png"]);

    for key in 0..2 {
        let got = reskin(&parsed, key);
        let expected = [skin_mesh(body, &binding, &poses[key]).unwrap(), skin_mesh(&cloth.mesh, &cloth_binding, &poses[key]).unwrap()];
        assert_eq!(got.len(), 2);
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!(g.len(), e.vertex_count());
            for (a, b) in g.iter().zip(&e.vertices) {
                let d = (a.cast::<f64>() - b).norm();
                assert!(d < 1e-4, "frame {key}: {d}");
            }
        }
    }
}

#[test]
fn rest_scene_has_matching_joint_count() {
    let skel = humanoid_skeleton();
    let basis = body_basis();
    let binding = auto_binding(&basis.rest_mesh, &skel);
    let rest = [Pose::identity(skel.len())];
    let scene = Scene {
        skeleton: &skel,
        meshes: vec![SceneMesh { name: "body".into(), mesh: &basis.rest_mesh, binding: &binding, textures: BTreeMap::new() }],
        poses: &rest,
        frame_time: 1.0 / 30.0,
    };
    let parsed = parse(&export_glb(&scene).unwrap());
    assert_eq!(parsed.doc.skins().next().unwrap().joints().count(), skel.len());
    let got = reskin(&parsed, 0);
    for (a, b) in got[0].iter().zip(&basis.rest_mesh.vertices) {
        assert!((a.cast::<f64>() - b).norm() < 1e-4);
    }
}

#[test]
fn inconsistent_scenes_are_rejected() {
    let skel = humanoid_skeleton();
    let basis = body_basis();
    let binding = auto_binding(&basis.rest_mesh, &skel);
    let short = [Pose::identity(3)];
    let scene = Scene {
        skeleton: &skel,
        meshes: vec![SceneMesh { name: "body".into(), mesh: &basis.rest_mesh, binding: &binding, textures: BTreeMap::new() }],
        poses: &short,
        frame_time: 1.0 / 30.0,
    };
    assert_eq!(export_glb(&scene).unwrap_err(), GltfError::PoseMismatch { frame: 0 });

    let cloth = shirt();
    let scene = Scene {
        skeleton: &skel,
        meshes: vec![SceneMesh { name: "shirt".into(), mesh: &cloth, binding: &binding, textures: BTreeMap::new() }],
        poses: &[],
        frame_time: 1.0 / 30.0,
    };
    assert!(matches!(export_glb(&scene), Err(GltfError::InconsistentBinding { .. })));
}
