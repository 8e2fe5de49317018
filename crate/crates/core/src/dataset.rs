//! Config-driven batch generation: shapes × garment sets × motion frames,
//! written as meshes plus per-frame annotations and a hashed run manifest.
//!
//! Output layout under `output_dir`, per sequence `s{shape}_g{set}_{motion}`:
//! - `<seq>/f{frame}.obj`: body followed by each garment, with normals and UVs
//! - `<seq>/f{frame}.normals.bin`: `AVNM`, u32 version, u32 count, count × 3 f32
//! - `<seq>/f{frame}.seg.bin`: `AVSG`, u32 version, u32 count, count × u32 label
//! - `<seq>/joints.csv`: `frame,joint,x,y,z` rows for every written frame
//! - `manifest.json`: combinations, statuses and every other file with its SHA-256
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assets::{export_obj, scan_library, AssetError, AssetLibrary, BodyAsset, CatalogueError};
use crate::geometry::Mesh;
use crate::pipeline::{evaluate, segmentation_labels, BoundMotion, DressedGarment, Evaluation, BODY_GROUPS};
use crate::shape::ShapeWeights;

pub const LAYOUT_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

/// Per-attribute uniform sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    /// Attribute name to `[low, high]`; unlisted attributes stay at 0.
    pub ranges: BTreeMap<String, (f64, f64)>,
    pub seed: Option<u64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputKinds {
    pub mesh: bool,
    pub joints3d: bool,
    pub segmentation: bool,
    pub normals: bool,
}

impl OutputKinds {
    pub fn all() -> Self {
        OutputKinds { mesh: true, joints3d: true, segmentation: true, normals: true }
    }
}

fn one() -> usize {
    1
}

/// Generation run description. `library` and `output_dir` are resolved
/// against the config file's directory when read with [`GenerationConfig::from_file`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub library: PathBuf,
    pub body: String,
    /// Explicit weight vectors, applied before any sampled ones.
    #[serde(default)]
    pub shapes: Vec<Vec<f64>>,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    /// Garment id lists; none means a single undressed set.
    #[serde(default)]
    pub garment_sets: Vec<Vec<String>>,
    /// Motion ids; none means a single rest-pose frame.
    #[serde(default)]
    pub motions: Vec<String>,
    #[serde(default = "one")]
    pub stride: usize,
    pub outputs: OutputKinds,
    pub output_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("asset library: {0}")]
    Catalogue(#[from] CatalogueError),
    #[error("body: {0}")]
    Body(#[from] AssetError),
    #[error("output directory {0} is not empty")]
    OutputNotEmpty(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenerationError + '_ {
    move |e| GenerationError::Io { path: path.to_path_buf(), message: e.to_string() }
}

impl GenerationConfig {
    pub fn from_json(text: &str) -> Result<Self, GenerationError> {
        serde_json::from_str(text).map_err(|e| GenerationError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, GenerationError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.library = base.join(&config.library);
        config.output_dir = base.join(&config.output_dir);
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.stride == 0 {
            return Err(GenerationError::Config("stride must be at least 1".into()));
        }
        let o = self.outputs;
        if !(o.mesh || o.joints3d || o.segmentation || o.normals) {
            return Err(GenerationError::Config("at least one output kind is required".into()));
        }
        if let Some(s) = &self.sampling {
            if s.seed.is_none() {
                return Err(GenerationError::Config("sampling requires a seed".into()));
            }
            for (name, (lo, hi)) in &s.ranges {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(GenerationError::Config(format!("range for {name:?} must be finite with low <= high")));
                }
            }
        }
        Ok(())
    }

    /// Shape weight vectors in run order, before clamping.
    pub fn shape_vectors(&self, attribute_names: &[String]) -> Result<Vec<Vec<f64>>, GenerationError> {
        let m = attribute_names.len();
        let mut out = self.shapes.clone();
        if let Some(s) = &self.sampling {
            let index: Vec<Option<(f64, f64)>> = attribute_names.iter().map(|n| s.ranges.get(n).copied()).collect();
            if let Some(unknown) = s.ranges.keys().find(|k| !attribute_names.contains(k)) {
                return Err(GenerationError::Config(format!("unknown attribute {unknown:?} in sampling ranges")));
            }
            let seed = s.seed.ok_or_else(|| GenerationError::Config("sampling requires a seed".into()))?;
            for i in 0..s.count {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                out.push(
                    index
                        .iter()
                        .map(|r| match r {
                            Some((lo, hi)) if hi > lo => rng.random_range(*lo..*hi),
                            Some((lo, _)) => *lo,
                            None => 0.0,
                        })
                        .collect(),
                );
            }
        }
        if out.is_empty() {
            out.push(vec![0.0; m]);
        }
        Ok(out)
    }
}

/// Frames visited for a clip of `frames` frames.
pub fn selected_frames(frames: usize, stride: usize) -> Vec<usize> {
    (0..frames).step_by(stride.max(1)).collect()
}

/// Number of frame outputs: shapes × garment sets × Σ ceil(frames / stride),
/// with a motionless run counting one frame.
pub fn combination_count(shapes: usize, garment_sets: usize, clip_frames: &[usize], stride: usize) -> usize {
    let frames: usize =
        if clip_frames.is_empty() { 1 } else { clip_frames.iter().map(|f| f.div_ceil(stride.max(1))).sum() };
    shapes * garment_sets.max(1) * frames
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationRecord {
    pub shape: usize,
    pub garment_set: usize,
    pub motion: Option<String>,
    /// Absent when the motion itself failed to load.
    pub frame: Option<usize>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Run manifest; lists every output file except itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub layout_version: u32,
    pub body: String,
    pub attribute_names: Vec<String>,
    /// Applied (clamped) weights per shape index.
    pub shapes: Vec<Vec<f64>>,
    pub garment_sets: Vec<Vec<String>>,
    pub stride: usize,
    /// Label value to name: body groups, then `garment_slot_<k>`.
    pub segmentation_legend: Vec<String>,
    pub combination_count: usize,
    pub combinations: Vec<CombinationRecord>,
    pub files: Vec<FileRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn normals_bytes(normals: &[crate::geometry::Vec3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + normals.len() * 12);
    out.extend_from_slice(b"AVNM");
    out.extend_from_slice(&LAYOUT_VERSION.to_le_bytes());
    out.extend_from_slice(&(normals.len() as u32).to_le_bytes());
    for n in normals {
        for c in [n.x, n.y, n.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

pub fn segmentation_bytes(labels: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + labels.len() * 4);
    out.extend_from_slice(b"AVSG");
    out.extend_from_slice(&LAYOUT_VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

/// Decodes a segmentation file.
pub fn read_segmentation(bytes: &[u8]) -> Option<Vec<u32>> {
    if bytes.len() < 12 || &bytes[..4] != b"AVSG" || bytes[4..8] != LAYOUT_VERSION.to_le_bytes() {
        return None;
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().ok()?) as usize;
    let body = &bytes[12..];
    if body.len() != count * 4 {
        return None;
    }
    Some(body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
}

fn merged(eval: &Evaluation) -> Mesh {
    Mesh::merge(std::iter::once(&eval.body).chain(&eval.garments))
}

struct Writer {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl Writer {
    fn put(&mut self, rel: String, bytes: &[u8]) -> Result<String, GenerationError> {
        let path = self.root.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.push(FileRecord { path: rel.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(rel)
    }
}

fn prepare_output(dir: &Path) -> Result<(), GenerationError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() {
            return Err(GenerationError::OutputNotEmpty(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Runs a generation and writes its outputs and manifest.
///
/// Asset failures for a garment set or motion mark the affected combinations
/// as failed in the manifest; the rest of the run continues.
pub fn run_generation(config: &GenerationConfig) -> Result<RunManifest, GenerationError> {
    config.validate()?;
    let library = scan_library(&config.library)?;
    let body = library.load_body(&config.body)?;
    let vectors = config.shape_vectors(&body.basis.attribute_names)?;
    let shapes = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            ShapeWeights::clamped(&body.basis, v).map_err(|e| GenerationError::Config(format!("shape {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    prepare_output(&config.output_dir)?;

    let sets: Vec<Vec<String>> =
        if config.garment_sets.is_empty() { vec![Vec::new()] } else { config.garment_sets.clone() };
    let dressed: Vec<Result<Vec<DressedGarment>, String>> = sets.iter().map(|ids| dress(&library, &body, ids)).collect();
    let motions: Vec<(Option<String>, Result<Option<BoundMotion>, String>)> = if config.motions.is_empty() {
        vec![(None, Ok(None))]
    } else {
        config.motions.iter().map(|id| (Some(id.clone()), bind(&library, &body, id).map(Some))).collect()
    };

    let max_slots = sets.iter().map(Vec::len).max().unwrap_or(0);
    let mut legend: Vec<String> = BODY_GROUPS.iter().map(|s| s.to_string()).collect();
    legend.extend((0..max_slots).map(|k| format!("garment_slot_{k}")));

    let mut writer = Writer { root: config.output_dir.clone(), files: Vec::new() };
    let mut records = Vec::new();
    let mut count = 0;
    for (si, weights) in shapes.iter().enumerate() {
        for (gi, set) in dressed.iter().enumerate() {
            for (motion_id, motion) in &motions {
                let seq = format!("s{si:03}_g{gi:02}_{}", motion_id.as_deref().unwrap_or("rest"));
                let base = CombinationRecord {
                    shape: si,
                    garment_set: gi,
                    motion: motion_id.clone(),
                    frame: None,
                    status: Status::Failed,
                    error: None,
                    files: Vec::new(),
                };
                let (garments, motion) = match (set, motion) {
                    (Ok(g), Ok(m)) => (g, m.as_ref()),
                    (Err(e), _) | (_, Err(e)) => {
                        records.push(CombinationRecord { error: Some(e.clone()), ..base });
                        continue;
                    }
                };
                let frames = motion.map_or(vec![0], |m| selected_frames(m.frame_count(), config.stride));
                count += frames.len();
                let refs: Vec<&DressedGarment> = garments.iter().collect();
                let labels = config.outputs.segmentation.then(|| segmentation_bytes(&segmentation_labels(&body, &refs)));
                let results: Vec<_> = frames
                    .par_iter()
                    .map(|&f| evaluate(&body, weights, &refs, motion.map(|m| (m, f))))
                    .collect();
                let mut csv = String::from("frame,joint,x,y,z\n");
                for (&f, result) in frames.iter().zip(results) {
                    let mut rec = CombinationRecord { frame: Some(f), ..base.clone() };
                    match result {
                        Ok(eval) => {
                            let stem = format!("{seq}/f{f:04}");
                            if config.outputs.mesh {
                                rec.files.push(writer.put(format!("{stem}.obj"), export_obj(&merged(&eval)).as_bytes())?);
                            }
                            if config.outputs.normals {
                                let normals = merged(&eval).normals.unwrap_or_default();
                                rec.files.push(writer.put(format!("{stem}.normals.bin"), &normals_bytes(&normals))?);
                            }
                            if let Some(bytes) = &labels {
                                rec.files.push(writer.put(format!("{stem}.seg.bin"), bytes)?);
                            }
                            for (j, p) in eval.joints.iter().enumerate() {
                                let name = &body.skeleton.joint(j).name;
                                let _ = writeln!(csv, "{f},{name},{},{},{}", p.x, p.y, p.z);
                            }
                            rec.status = Status::Ok;
                        }
                        Err(e) => rec.error = Some(e.to_string()),
                    }
                    records.push(rec);
                }
                if config.outputs.joints3d && records.iter().rev().take(frames.len()).any(|r| r.status == Status::Ok) {
                    let rel = writer.put(format!("{seq}/joints.csv"), csv.as_bytes())?;
                    for r in records.iter_mut().rev().take(frames.len()).filter(|r| r.status == Status::Ok) {
                        r.files.push(rel.clone());
                    }
                }
            }
        }
    }

    writer.files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        layout_version: LAYOUT_VERSION,
        body: config.body.clone(),
        attribute_names: body.basis.attribute_names.clone(),
        shapes: shapes.iter().map(|w| w.values().to_vec()).collect(),
        garment_sets: sets,
        stride: config.stride,
        segmentation_legend: legend,
        combination_count: count,
        combinations: records,
        files: writer.files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = config.output_dir.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

fn dress(library: &AssetLibrary, body: &BodyAsset, ids: &[String]) -> Result<Vec<DressedGarment>, String> {
    ids.iter()
        .map(|id| {
            let asset = library.load_garment(id, &body.skeleton).map_err(|e| e.to_string())?;
            DressedGarment::new(id, asset, body).map_err(|e| e.to_string())
        })
        .collect()
}

fn bind(library: &AssetLibrary, body: &BodyAsset, id: &str) -> Result<BoundMotion, String> {
    let asset = library.load_motion(id).map_err(|e| e.to_string())?;
    BoundMotion::new(asset, body).map_err(|e| format!("motion {id:?}: {e}"))
}
