use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::{forward_kinematics, Mesh, Pose, Skeleton};
use crate::skin::SkinBinding;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GltfError {
    #[error("mesh {mesh:?}: {reason}")]
    InconsistentBinding { mesh: String, reason: String },
    #[error("pose {frame} does not match the skeleton")]
    PoseMismatch { frame: usize },
    #[error("frame time must be positive")]
    FrameTime,
}

/// One skinned mesh of a scene.
pub struct SceneMesh<'a> {
    pub name: String,
    pub mesh: &'a Mesh,
    pub binding: &'a SkinBinding,
    /// Image references by role; `albedo` and `normal` become material textures.
    pub textures: BTreeMap<String, String>,
}

/// Skinned meshes sharing one skeleton plus an optional animation.
pub struct Scene<'a> {
    pub skeleton: &'a Skeleton,
    pub meshes: Vec<SceneMesh<'a>>,
    pub poses: &'a [Pose],
    pub frame_time: f64,
}

const FLOAT: u32 = 5126;
const UNSIGNED_SHORT: u32 = 5123;
const UNSIGNED_INT: u32 = 5125;
const ARRAY_BUFFER: u32 = 34962;
const ELEMENT_ARRAY_BUFFER: u32 = 34963;

#[derive(Default)]
struct Builder {
    bin: Vec<u8>,
    views: Vec<Value>,
    accessors: Vec<Value>,
}

impl Builder {
    fn push(&mut self, bytes: &[u8], target: Option<u32>) -> usize {
        while !self.bin.len().is_multiple_of(4) {
            self.bin.push(0);
        }
        let mut view = json!({"buffer": 0, "byteOffset": self.bin.len(), "byteLength": bytes.len()});
        if let Some(t) = target {
            view["target"] = json!(t);
        }
        self.bin.extend_from_slice(bytes);
        self.views.push(view);
        self.views.len() - 1
    }

    fn floats(&mut self, data: &[f32], kind: &str, width: usize, target: Option<u32>, bounds: bool) -> usize {
        let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
        let view = self.push(&bytes, target);
        let mut acc = json!({
            "bufferView": view,
            "componentType": FLOAT,
            "count": data.len() / width,
            "type": kind,
        });
        if bounds {
            let mut lo = vec![f32::INFINITY; width];
            let mut hi = vec![f32::NEG_INFINITY; width];
            for chunk in data.chunks(width) {
                for k in 0..width {
                    lo[k] = lo[k].min(chunk[k]);
                    hi[k] = hi[k].max(chunk[k]);
                }
            }
            acc["min"] = json!(lo);
            acc["max"] = json!(hi);
        }
        self.accessors.push(acc);
        self.accessors.len() - 1
    }

    fn ints(&mut self, bytes: Vec<u8>, component: u32, count: usize, kind: &str, target: u32) -> usize {
        let view = self.push(&bytes, Some(target));
        self.accessors.push(json!({
            "bufferView": view,
            "componentType": component,
            "count": count,
            "type": kind,
        }));
        self.accessors.len() - 1
    }
}

fn flat3(v: &[crate::geometry::Vec3]) -> Vec<f32> {
    v.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect()
}

/// Serializes a scene as a binary glTF 2.0 container: one node per joint,
/// one skinned node per mesh, and one animation with a rotation track per
/// joint plus a root translation track. Textures are referenced by URI and
/// texture coordinates are flipped to the top-left image origin.
pub fn export_glb(scene: &Scene<'_>) -> Result<Vec<u8>, GltfError> {
    let skel = scene.skeleton;
    let joint_count = skel.len();
    if joint_count > u16::MAX as usize {
        return Err(GltfError::InconsistentBinding {
            mesh: String::new(),
            reason: "too many joints".into(),
        });
    }
    for (frame, pose) in scene.poses.iter().enumerate() {
        if pose.validate(skel).is_err() {
            return Err(GltfError::PoseMismatch { frame });
        }
    }
    if !scene.poses.is_empty() && !(scene.frame_time > 0.0 && scene.frame_time.is_finite()) {
        return Err(GltfError::FrameTime);
    }

    let mut b = Builder::default();
    let mut nodes: Vec<Value> = skel
        .joints()
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let children: Vec<usize> = skel.children(k).collect();
            let o = j.rest_offset;
            let mut node = json!({"name": j.name, "translation": [o.x, o.y, o.z]});
            if !children.is_empty() {
                node["children"] = json!(children);
            }
            node
        })
        .collect();
    let mut meshes = Vec::new();
    let mut skins = Vec::new();
    let mut materials = Vec::new();
    let mut images: Vec<Value> = Vec::new();
    let mut textures: Vec<Value> = Vec::new();
    let mut scene_nodes = vec![0usize];

    for item in &scene.meshes {
        let fail = |reason: &str| GltfError::InconsistentBinding {
            mesh: item.name.clone(),
            reason: reason.into(),
        };
        let binding = item.binding;
        if binding.vertex_count() != item.mesh.vertex_count() {
            return Err(fail("binding vertex count differs from mesh"));
        }
        if binding.bind_skeleton() != skel {
            return Err(fail("binding skeleton differs from scene skeleton"));
        }
        let bind = forward_kinematics(skel, binding.bind_pose()).map_err(|e| fail(&e.to_string()))?;
        let ibm: Vec<f32> = bind
            .iter()
            .flat_map(|t| {
                let m = t.inverse().to_matrix();
                (0..16).map(move |i| m[i % 4][i / 4] as f32)
            })
            .collect();
        let ibm = b.floats(&ibm, "MAT4", 16, None, false);

        let mut attributes = serde_json::Map::new();
        let pos = b.floats(&flat3(&item.mesh.vertices), "VEC3", 3, Some(ARRAY_BUFFER), true);
        attributes.insert("POSITION".into(), json!(pos));
        if let Some(n) = &item.mesh.normals {
            let acc = b.floats(&flat3(n), "VEC3", 3, Some(ARRAY_BUFFER), false);
            attributes.insert("NORMAL".into(), json!(acc));
        }
        if let Some(uv) = &item.mesh.uvs {
            let flat: Vec<f32> = uv.iter().flat_map(|t| [t[0] as f32, 1.0 - t[1] as f32]).collect();
            let acc = b.floats(&flat, "VEC2", 2, Some(ARRAY_BUFFER), false);
            attributes.insert("TEXCOORD_0".into(), json!(acc));
        }
        let mut joints_bytes = Vec::with_capacity(binding.vertex_count() * 8);
        let mut weights = Vec::with_capacity(binding.vertex_count() * 4);
        for list in binding.influences() {
            for k in 0..4 {
                let (j, w) = list.get(k).copied().unwrap_or((0, 0.0));
                joints_bytes.extend_from_slice(&(j as u16).to_le_bytes());
                weights.push(w as f32);
            }
        }
        let joints_acc = b.ints(joints_bytes, UNSIGNED_SHORT, binding.vertex_count(), "VEC4", ARRAY_BUFFER);
        attributes.insert("JOINTS_0".into(), json!(joints_acc));
        let weights_acc = b.floats(&weights, "VEC4", 4, Some(ARRAY_BUFFER), false);
        attributes.insert("WEIGHTS_0".into(), json!(weights_acc));

        let tris = item.mesh.triangles();
        let idx: Vec<u8> = tris.iter().flatten().flat_map(|i| i.to_le_bytes()).collect();
        let indices = b.ints(idx, UNSIGNED_INT, tris.len() * 3, "SCALAR", ELEMENT_ARRAY_BUFFER);

        let mut primitive = json!({"attributes": attributes, "indices": indices, "mode": 4});
        if !item.textures.is_empty() {
            let mut material = json!({"name": item.name, "pbrMetallicRoughness": {"metallicFactor": 0.0}});
            for (role, uri) in &item.textures {
                let slot = match role.as_str() {
                    "albedo" => "baseColorTexture",
                    "normal" => "normalTexture",
                    _ => continue,
                };
                images.push(json!({"uri": uri}));
                textures.push(json!({"source": images.len() - 1}));
                let tex = json!({"index": textures.len() - 1});
                if slot == "baseColorTexture" {
                    material["pbrMetallicRoughness"][slot] = tex;
                } else {
                    material[slot] = tex;
                }
            }
            materials.push(material);
            primitive["material"] = json!(materials.len() - 1);
        }
        meshes.push(json!({"name": item.name, "primitives": [primitive]}));
        skins.push(json!({
            "joints": (0..joint_count).collect::<Vec<_>>(),
            "inverseBindMatrices": ibm,
            "skeleton": 0,
        }));
        nodes.push(json!({"name": item.name, "mesh": meshes.len() - 1, "skin": skins.len() - 1}));
        scene_nodes.push(nodes.len() - 1);
    }

    let mut animations = Vec::new();
    if !scene.poses.is_empty() {
        let times: Vec<f32> = (0..scene.poses.len()).map(|f| (f as f64 * scene.frame_time) as f32).collect();
        let input = b.floats(&times, "SCALAR", 1, None, true);
        let mut samplers = Vec::new();
        let mut channels = Vec::new();
        for k in 0..joint_count {
            let rot: Vec<f32> = scene
                .poses
                .iter()
                .flat_map(|p| {
                    let q = p.local_rotations[k];
                    [q.i as f32, q.j as f32, q.k as f32, q.w as f32]
                })
                .collect();
            let output = b.floats(&rot, "VEC4", 4, None, false);
            samplers.push(json!({"input": input, "output": output, "interpolation": "LINEAR"}));
            channels.push(json!({"sampler": samplers.len() - 1, "target": {"node": k, "path": "rotation"}}));
        }
        let root = skel.joint(0).rest_offset;
        let tr: Vec<f32> = scene
            .poses
            .iter()
            .flat_map(|p| {
                let t = root + p.root_translation;
                [t.x as f32, t.y as f32, t.z as f32]
            })
            .collect();
        let output = b.floats(&tr, "VEC3", 3, None, false);
        samplers.push(json!({"input": input, "output": output, "interpolation": "LINEAR"}));
        channels.push(json!({"sampler": samplers.len() - 1, "target": {"node": 0, "path": "translation"}}));
        animations.push(json!({"name": "motion", "samplers": samplers, "channels": channels}));
    }

    while b.bin.len() % 4 != 0 {
        b.bin.push(0);
    }
    let mut doc = json!({
        "asset": {"version": "2.0", "generator": "avatar-forge"},
        "scene": 0,
        "scenes": [{"nodes": scene_nodes}],
        "nodes": nodes,
        "buffers": [{"byteLength": b.bin.len()}],
        "bufferViews": b.views,
        "accessors": b.accessors,
    });
    for (key, list) in [
        ("meshes", meshes),
        ("skins", skins),
        ("materials", materials),
        ("images", images),
        ("textures", textures),
        ("animations", animations),
    ] {
        if !list.is_empty() {
            doc[key] = Value::Array(list);
        }
    }
    let mut json_bytes = serde_json::to_vec(&doc).expect("json serialization");
    while !json_bytes.len().is_multiple_of(4) {
        json_bytes.push(b' ');
    }
    let total = 12 + 8 + json_bytes.len() + 8 + b.bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(b"glTF");
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(b"JSON");
    out.extend_from_slice(&json_bytes);
    out.extend_from_slice(&(b.bin.len() as u32).to_le_bytes());
    out.extend_from_slice(b"BIN\0");
    out.extend_from_slice(&b.bin);
    Ok(out)
}
