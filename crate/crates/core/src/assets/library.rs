use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use super::obj::{export_obj, import_obj, ObjError};
use crate::bvh::{parse_bvh, BvhError, MotionClip};
use crate::geometry::Skeleton;
use crate::retarget::{MapConfig, RetargetError};
use crate::shape::{read_basis, BlendShapeBasis, ShapeError};
use crate::skin::{GarmentAsset, SkinBinding, SkinError, DEFAULT_EPSILON};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssetKind {
    BodyBasis,
    Garment,
    Motion,
}

impl AssetKind {
    fn required_files(self) -> &'static [&'static str] {
        match self {
            AssetKind::BodyBasis => &["basis", "skeleton", "weights"],
            AssetKind::Garment => &["mesh"],
            AssetKind::Motion => &["clip"],
        }
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssetKind::BodyBasis => "body-basis",
            AssetKind::Garment => "garment",
            AssetKind::Motion => "motion",
        })
    }
}

/// On-disk `<name>.manifest.json`. File paths are relative to the manifest.
///
/// Required file roles: body-basis `basis`, `skeleton`, `weights`;
/// garment `mesh` (plus `weights` once prepared, optional `albedo`, `normal`);
/// motion `clip` (optional `map`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub id: String,
    pub kind: AssetKind,
    pub name: String,
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// A catalogue entry with paths resolved against the library root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssetEntry {
    pub id: String,
    pub kind: AssetKind,
    pub name: String,
    pub files: BTreeMap<String, PathBuf>,
    pub thumbnail: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssetLibrary {
    pub root: PathBuf,
    pub entries: Vec<AssetEntry>,
}

#[derive(Debug, Clone, PartialEq, Default, Error, Serialize)]
#[error("catalogue errors: duplicate ids {duplicates:?}, missing files {missing:?}, invalid {invalid:?}")]
pub struct CatalogueError {
    pub duplicates: Vec<String>,
    pub missing: Vec<(String, PathBuf)>,
    pub invalid: Vec<(PathBuf, String)>,
}

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("unknown asset id {0:?}")]
    UnknownId(String),
    #[error("asset {id:?} is a {actual}, expected {expected}")]
    WrongKind { id: String, expected: AssetKind, actual: AssetKind },
    #[error("asset {id:?} has no {role:?} file")]
    MissingRole { id: String, role: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Obj { path: PathBuf, source: ObjError },
    #[error("{path}: {source}")]
    Bvh { path: PathBuf, source: BvhError },
    #[error("{path}: {source}")]
    Shape { path: PathBuf, source: ShapeError },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Skin { path: PathBuf, source: SkinError },
    #[error("{path}: {source}")]
    Map { path: PathBuf, source: RetargetError },
    #[error("{path}: weight map names unknown joint {joint:?}")]
    UnknownJoint { path: PathBuf, joint: String },
}

/// Accepts PNG and JPEG signatures only.
pub fn validate_image_header(bytes: &[u8]) -> Result<&'static str, String> {
    const PNG: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(PNG) {
        if bytes.len() < 24 || &bytes[12..16] != b"IHDR" {
            return Err("PNG without IHDR chunk".into());
        }
        return Ok("png");
    }
    if bytes.len() >= 4 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF {
        return Ok("jpeg");
    }
    Err("not a PNG or JPEG file".into())
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Builds the catalogue from every `*.manifest.json` below `root`, sorted by id.
pub fn scan_library(root: &Path) -> Result<AssetLibrary, CatalogueError> {
    let mut errors = CatalogueError::default();
    if !root.is_dir() {
        errors.invalid.push((root.to_path_buf(), "not a readable directory".into()));
        return Err(errors);
    }
    let mut manifests: Vec<PathBuf> = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.file_name().to_string_lossy().ends_with(MANIFEST_SUFFIX))
        .map(|e| e.into_path())
        .collect();
    manifests.sort();
    let mut entries: Vec<AssetEntry> = Vec::new();
    for path in manifests {
        let manifest: Manifest = match fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
        {
            Ok(m) => m,
            Err(e) => {
                errors.invalid.push((path, e));
                continue;
            }
        };
        let dir = path.parent().unwrap_or(root).to_path_buf();
        let mut entry_ok = true;
        for role in manifest.kind.required_files() {
            if !manifest.files.contains_key(*role) {
                errors.invalid.push((path.clone(), format!("missing {role:?} file for {}", manifest.kind)));
                entry_ok = false;
            }
        }
        if let Some(e) = manifest.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                errors.invalid.push((path.clone(), format!("epsilon must be positive, got {e}")));
                entry_ok = false;
            }
        }
        let files: BTreeMap<String, PathBuf> = manifest.files.iter().map(|(k, v)| (k.clone(), dir.join(v))).collect();
        let thumbnail = manifest.thumbnail.as_ref().map(|t| dir.join(t));
        for file in files.values().chain(thumbnail.iter()) {
            if !file.is_file() {
                errors.missing.push((manifest.id.clone(), file.clone()));
                entry_ok = false;
            } else if is_image(file) {
                if let Err(e) = fs::read(file).map_err(|e| e.to_string()).and_then(|b| validate_image_header(&b).map(|_| ())) {
                    errors.invalid.push((file.clone(), e));
                    entry_ok = false;
                }
            }
        }
        if entry_ok {
            entries.push(AssetEntry {
                id: manifest.id,
                kind: manifest.kind,
                name: manifest.name,
                files,
                thumbnail,
                epsilon: manifest.epsilon,
                manifest: path,
            });
        }
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in entries.windows(2) {
        if pair[0].id == pair[1].id && errors.duplicates.last() != Some(&pair[0].id) {
            errors.duplicates.push(pair[0].id.clone());
        }
    }
    if errors.duplicates.is_empty() && errors.missing.is_empty() && errors.invalid.is_empty() {
        Ok(AssetLibrary { root: root.to_path_buf(), entries })
    } else {
        Err(errors)
    }
}

/// Rest body: shape basis, skeleton and skin binding of the rest mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyAsset {
    pub id: String,
    pub basis: BlendShapeBasis,
    pub skeleton: Skeleton,
    pub binding: SkinBinding,
}

/// Motion clip plus the retarget map configuration shipped with it.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionAsset {
    pub id: String,
    pub clip: MotionClip,
    pub map: MapConfig,
}

fn read_text(path: &Path) -> Result<String, AssetError> {
    fs::read_to_string(path).map_err(|e| AssetError::Io { path: path.to_path_buf(), message: e.to_string() })
}

impl AssetLibrary {
    pub fn get(&self, id: &str) -> Option<&AssetEntry> {
        self.entries.binary_search_by(|e| e.id.as_str().cmp(id)).ok().map(|i| &self.entries[i])
    }

    pub fn of_kind(&self, kind: AssetKind) -> impl Iterator<Item = &AssetEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    fn entry(&self, id: &str, kind: AssetKind) -> Result<&AssetEntry, AssetError> {
        let e = self.get(id).ok_or_else(|| AssetError::UnknownId(id.to_string()))?;
        if e.kind != kind {
            return Err(AssetError::WrongKind { id: id.to_string(), expected: kind, actual: e.kind });
        }
        Ok(e)
    }

    fn file<'e>(entry: &'e AssetEntry, role: &str) -> Result<&'e Path, AssetError> {
        entry.files.get(role).map(PathBuf::as_path).ok_or_else(|| AssetError::MissingRole {
            id: entry.id.clone(),
            role: role.to_string(),
        })
    }

    pub fn load_body(&self, id: &str) -> Result<BodyAsset, AssetError> {
        let e = self.entry(id, AssetKind::BodyBasis)?;
        let basis_path = Self::file(e, "basis")?;
        let bytes = fs::read(basis_path).map_err(|err| AssetError::Io {
            path: basis_path.to_path_buf(),
            message: err.to_string(),
        })?;
        let basis = read_basis(&bytes[..]).map_err(|source| AssetError::Shape { path: basis_path.to_path_buf(), source })?;
        let skel_path = Self::file(e, "skeleton")?;
        let skeleton: Skeleton = serde_json::from_str(&read_text(skel_path)?)
            .map_err(|err| AssetError::Json { path: skel_path.to_path_buf(), message: err.to_string() })?;
        let weights_path = Self::file(e, "weights")?;
        let binding = read_weight_map(&read_text(weights_path)?, &skeleton, weights_path)?;
        if binding.vertex_count() != basis.vertex_count() {
            return Err(AssetError::Skin {
                path: weights_path.to_path_buf(),
                source: SkinError::BindingMismatch { mesh: basis.vertex_count(), binding: binding.vertex_count() },
            });
        }
        Ok(BodyAsset { id: id.to_string(), basis, skeleton, binding })
    }

    /// Loads a garment; its weights, when present, resolve against `skeleton`.
    pub fn load_garment(&self, id: &str, skeleton: &Skeleton) -> Result<GarmentAsset, AssetError> {
        let e = self.entry(id, AssetKind::Garment)?;
        let mesh_path = Self::file(e, "mesh")?;
        let mesh = import_obj(&read_text(mesh_path)?).map_err(|source| AssetError::Obj { path: mesh_path.to_path_buf(), source })?;
        let binding = match e.files.get("weights") {
            Some(p) => {
                let b = read_weight_map(&read_text(p)?, skeleton, p)?;
                if b.vertex_count() != mesh.vertex_count() {
                    return Err(AssetError::Skin {
                        path: p.clone(),
                        source: SkinError::BindingMismatch { mesh: mesh.vertex_count(), binding: b.vertex_count() },
                    });
                }
                Some(b)
            }
            None => None,
        };
        let texture_refs = e
            .files
            .iter()
            .filter(|(role, _)| role.as_str() == "albedo" || role.as_str() == "normal")
            .map(|(role, p)| (role.clone(), p.to_string_lossy().into_owned()))
            .collect();
        Ok(GarmentAsset {
            mesh,
            binding,
            texture_refs,
            offset_epsilon: e.epsilon.unwrap_or(DEFAULT_EPSILON),
        })
    }

    pub fn load_motion(&self, id: &str) -> Result<MotionAsset, AssetError> {
        let e = self.entry(id, AssetKind::Motion)?;
        let clip_path = Self::file(e, "clip")?;
        let clip = parse_bvh(&read_text(clip_path)?).map_err(|source| AssetError::Bvh { path: clip_path.to_path_buf(), source })?;
        let map = match e.files.get("map") {
            Some(p) => MapConfig::from_json(&read_text(p)?).map_err(|source| AssetError::Map { path: p.clone(), source })?,
            None => MapConfig::default(),
        };
        Ok(MotionAsset { id: id.to_string(), clip, map })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightMapFile {
    joints: Vec<String>,
    influences: Vec<Vec<(usize, f64)>>,
}

/// Weight map JSON: `{"joints": [names], "influences": [[[joint, weight], ...], ...]}`
/// where joint indices refer to the `joints` list, not the skeleton order.
pub fn write_weight_map(binding: &SkinBinding) -> String {
    let file = WeightMapFile {
        joints: binding.bind_skeleton().joints().iter().map(|j| j.name.clone()).collect(),
        influences: binding.influences().to_vec(),
    };
    serde_json::to_string(&file).expect("weight map serializes")
}

/// Reads a weight map against `skeleton`, binding at its rest pose.
pub fn read_weight_map(text: &str, skeleton: &Skeleton, path: &Path) -> Result<SkinBinding, AssetError> {
    let file: WeightMapFile =
        serde_json::from_str(text).map_err(|e| AssetError::Json { path: path.to_path_buf(), message: e.to_string() })?;
    let lookup = file
        .joints
        .iter()
        .map(|name| {
            skeleton
                .find(name)
                .ok_or_else(|| AssetError::UnknownJoint { path: path.to_path_buf(), joint: name.clone() })
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let raw = file
        .influences
        .into_iter()
        .enumerate()
        .map(|(vertex, list)| {
            list.into_iter()
                .map(|(j, w)| {
                    lookup.get(j).map(|&k| (k, w)).ok_or(SkinError::InvalidJoint {
                        vertex,
                        joint: j,
                        joints: lookup.len(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| AssetError::Skin { path: path.to_path_buf(), source })?;
    SkinBinding::at_rest(skeleton.clone(), raw).map_err(|source| AssetError::Skin { path: path.to_path_buf(), source })
}

/// Writes a prepared garment as `<id>.obj`, `<id>.weights.json` and
/// `<id>.manifest.json` in `dir`, returning the manifest path.
pub fn write_garment(dir: &Path, id: &str, name: &str, garment: &GarmentAsset) -> Result<PathBuf, AssetError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: std::io::Error| AssetError::Io { path, message: e.to_string() }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = BTreeMap::new();
    let mesh_name = format!("{id}.obj");
    fs::write(dir.join(&mesh_name), export_obj(&garment.mesh)).map_err(io(&dir.join(&mesh_name)))?;
    files.insert("mesh".to_string(), mesh_name);
    if let Some(b) = &garment.binding {
        let weights_name = format!("{id}.weights.json");
        fs::write(dir.join(&weights_name), write_weight_map(b)).map_err(io(&dir.join(&weights_name)))?;
        files.insert("weights".to_string(), weights_name);
    }
    for (role, path) in &garment.texture_refs {
        files.insert(role.clone(), relative_to(dir, Path::new(path)));
    }
    let manifest = Manifest {
        id: id.to_string(),
        kind: AssetKind::Garment,
        name: name.to_string(),
        files,
        thumbnail: None,
        epsilon: Some(garment.offset_epsilon),
    };
    write_manifest(dir, &manifest)
}

/// Writes `<id>.manifest.json` in `dir`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf, AssetError> {
    let path = dir.join(format!("{}{MANIFEST_SUFFIX}", manifest.id));
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| AssetError::Io { path: path.clone(), message: e.to_string() })?;
    Ok(path)
}

fn relative_to(dir: &Path, path: &Path) -> String {
    match (fs::canonicalize(dir), fs::canonicalize(path)) {
        (Ok(d), Ok(p)) => match p.strip_prefix(&d) {
            Ok(rel) => rel.to_string_lossy().into_owned(),
            Err(_) => p.to_string_lossy().into_owned(),
        },
        _ => path.to_string_lossy().into_owned(),
    }
}
