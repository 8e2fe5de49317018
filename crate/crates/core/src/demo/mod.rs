//! Small synthetic assets: rigs, a capsule body with a seven-attribute shape
//! basis, garments and two motion clips, plus a writer for a ready-to-scan
//! library.

mod body;
mod motion;
mod rigs;
mod wardrobe;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::assets::{write_garment, write_manifest, write_weight_map, AssetError, AssetKind, Manifest};
use crate::bvh::write_bvh;
use crate::shape::write_basis;
use crate::skin::prepare_garment;

pub use body::{auto_binding, body_basis, body_mesh, ATTRIBUTE_NAMES};
pub use motion::{walk_clip, wave_clip};
pub use rigs::{humanoid_skeleton, mocap_skeleton};
pub use wardrobe::{cap, shirt, trousers};

/// 1x1 PNG used for every placeholder texture and thumbnail.
pub const PLACEHOLDER_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x04, 0x00, 0x00, 0x00, 0xb5, 0x1c, 0x0c, 0x02, 0x00, 0x00, 0x00,
    0x0b, 0x49, 0x44, 0x41, 0x54, 0x78, 0xda, 0x63, 0x64, 0x60, 0x00, 0x00, 0x00, 0x06, 0x00, 0x02, 0x30, 0x81,
    0xd0, 0x2f, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
];

pub const BODY_ID: &str = "demo-body";
pub const GARMENT_IDS: [&str; 3] = ["cap", "shirt", "trousers"];
pub const MOTION_IDS: [&str; 2] = ["walk", "wave"];

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> AssetError + '_ {
    move |e| AssetError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), AssetError> {
    fs::write(path, bytes).map_err(io(path))
}

/// Writes the demo body, three prepared garments and two clips of
/// `frames` frames each under `dir`.
pub fn write_demo_library(dir: &Path, frames: usize) -> Result<(), AssetError> {
    for sub in ["body", "garments", "motions"] {
        fs::create_dir_all(dir.join(sub)).map_err(io(dir))?;
    }

    let body_dir = dir.join("body");
    let skeleton = humanoid_skeleton();
    let basis = body_basis();
    let binding = auto_binding(&basis.rest_mesh, &skeleton);
    let mut bytes = Vec::new();
    write_basis(&basis, &mut bytes).map_err(|source| AssetError::Shape { path: body_dir.join("body.avbasis"), source })?;
    write(&body_dir.join("body.avbasis"), bytes)?;
    write(&body_dir.join("body.skeleton.json"), serde_json::to_string_pretty(&skeleton).expect("skeleton serializes"))?;
    write(&body_dir.join("body.weights.json"), write_weight_map(&binding))?;
    write(&body_dir.join("body.png"), PLACEHOLDER_PNG)?;
    let files = [("basis", "body.avbasis"), ("skeleton", "body.skeleton.json"), ("weights", "body.weights.json")];
    write_manifest(
        &body_dir,
        &Manifest {
            id: BODY_ID.into(),
            kind: AssetKind::BodyBasis,
            name: "Demo body".into(),
            files: files.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            thumbnail: Some("body.png".into()),
            epsilon: None,
        },
    )?;

    let garment_dir = dir.join("garments");
    let rest = &basis.rest_mesh;
    for (id, mesh) in [("cap", cap()), ("shirt", shirt()), ("trousers", trousers())] {
        let mut textures = BTreeMap::new();
        for role in ["albedo", "normal"] {
            let path = garment_dir.join(format!("{id}_{role}.png"));
            write(&path, PLACEHOLDER_PNG)?;
            textures.insert(role.to_string(), path.to_string_lossy().into_owned());
        }
        let garment = prepare_garment(rest, &binding, &mesh, crate::skin::DEFAULT_EPSILON, textures)
            .map_err(|source| AssetError::Skin { path: garment_dir.join(id), source })?;
        let name = format!("{}{}", id[..1].to_uppercase(), &id[1..]);
        write_garment(&garment_dir, id, &name, &garment)?;
    }

    let motion_dir = dir.join("motions");
    for (id, clip) in [("walk", walk_clip(frames)), ("wave", wave_clip(frames))] {
        write(&motion_dir.join(format!("{id}.bvh")), write_bvh(&clip))?;
        write(&motion_dir.join(format!("{id}.map.json")), "{\n  \"primary_child\": {\"Hips\": \"LowerBack\"}\n}\n")?;
        let files = [("clip", format!("{id}.bvh")), ("map", format!("{id}.map.json"))];
        write_manifest(
            &motion_dir,
            &Manifest {
                id: id.into(),
                kind: AssetKind::Motion,
                name: format!("{}{}", id[..1].to_uppercase(), &id[1..]),
                files: files.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                thumbnail: None,
                epsilon: None,
            },
        )?;
    }
    Ok(())
}
