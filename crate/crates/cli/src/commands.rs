use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};

use avatar_core::assets::{
    import_obj, scan_library, write_garment, AssetEntry, AssetKind, AssetLibrary, Manifest,
};
use avatar_core::bvh::{parse_bvh, write_bvh, MotionClip};
use avatar_core::dataset::{run_generation, GenerationConfig, Status};
use avatar_core::demo::write_demo_library;
use avatar_core::geometry::{Mesh, Skeleton};
use avatar_core::retarget::{retarget_clip, MapConfig, RetargetMap};
use avatar_core::shape::{build_attribute_basis, read_basis, read_basis_json, write_basis, write_basis_json, AttributeSubset};
use avatar_core::skin::{prepare_garment, resolve_penetration, GarmentAsset, DEFAULT_EPSILON};
use avatar_service::{serve as serve_api, AppState};

use crate::pose_binary;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_mesh(path: &Path) -> Result<Mesh> {
    import_obj(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn obj_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")));
    files.sort();
    Ok(files)
}

pub fn basis_build(corpus: &Path, rest: &Path, out: &Path) -> Result<()> {
    let rest_mesh = read_mesh(rest)?;
    let mut dirs: Vec<PathBuf> = fs::read_dir(corpus)
        .with_context(|| format!("listing {}", corpus.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    dirs.retain(|p| p.is_dir());
    dirs.sort();
    if dirs.is_empty() {
        bail!("{} has no attribute subdirectories", corpus.display());
    }
    let mut subsets = Vec::new();
    for dir in dirs {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let samples = obj_files(&dir)?.iter().map(|p| read_mesh(p)).collect::<Result<Vec<_>>>()?;
        subsets.push(AttributeSubset { name, samples });
    }
    let basis = build_attribute_basis(&subsets, &rest_mesh)?;
    if is_json(out) {
        fs::write(out, write_basis_json(&basis)?)?;
    } else {
        let mut bytes = Vec::new();
        write_basis(&basis, &mut bytes)?;
        fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    }
    println!("wrote {} ({} attributes, {} vertices)", out.display(), basis.attribute_count(), basis.vertex_count());
    Ok(())
}

pub fn basis_info(file: &Path) -> Result<()> {
    let basis = if is_json(file) {
        read_basis_json(&read_text(file)?)?
    } else {
        read_basis(&fs::read(file).with_context(|| format!("reading {}", file.display()))?[..])?
    };
    let mesh = &basis.rest_mesh;
    println!("vertices: {}", mesh.vertex_count());
    println!("faces: {}", mesh.faces.len());
    println!("uvs: {}", if mesh.uvs.is_some() { "yes" } else { "no" });
    println!("attributes: {}", basis.attribute_count());
    for (name, (lo, hi)) in basis.attribute_names.iter().zip(&basis.weight_bounds) {
        println!("  {name}: [{lo:.6}, {hi:.6}]");
    }
    Ok(())
}

fn read_clip(path: &Path) -> Result<MotionClip> {
    parse_bvh(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn bvh_info(file: &Path) -> Result<()> {
    let clip = read_clip(file)?;
    let skel = clip.skeleton();
    for (k, joint) in skel.joints().iter().enumerate() {
        let depth = skel.ancestors(k).count();
        let channels: Vec<String> = clip.channels().joint(k).iter().map(|c| format!("{c:?}")).collect();
        let o = joint.rest_offset;
        println!(
            "{}{} offset ({:.4}, {:.4}, {:.4}) channels [{}]",
            "  ".repeat(depth),
            joint.name,
            o.x,
            o.y,
            o.z,
            channels.join(" ")
        );
    }
    println!("joints: {}", skel.len());
    println!("frames: {}", clip.frame_count());
    println!("frame time: {}", clip.frame_time());
    Ok(())
}

fn read_skeleton(path: &Path) -> Result<Skeleton> {
    if is_json(path) {
        serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
    } else {
        Ok(read_clip(path)?.skeleton().clone())
    }
}

pub fn retarget(bvh: &Path, target: &Path, map: Option<&Path>, out: &Path) -> Result<()> {
    let clip = read_clip(bvh)?;
    let target = read_skeleton(target)?;
    let config = match map {
        Some(p) => MapConfig::from_json(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => MapConfig::default(),
    };
    let map = RetargetMap::build(clip.skeleton(), &target, &config)?;
    let motion = retarget_clip(&clip, &target, &map)?;
    let is_bvh = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("bvh"));
    let bytes = if is_bvh {
        write_bvh(&MotionClip::from_poses(target.clone(), &motion.poses, motion.frame_time)?).into_bytes()
    } else {
        pose_binary::encode(&motion)
    };
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    println!("scale: {}", map.scale);
    println!("frames: {}", motion.poses.len());
    let unmapped = map.unmapped_target_names(&target);
    if !unmapped.is_empty() {
        println!("unmapped target joints (held at rest): {}", unmapped.join(", "));
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Single-entry library for a manifest given by path.
fn library_of_manifest(path: &Path) -> Result<(AssetLibrary, String)> {
    let manifest: Manifest =
        serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let entry = AssetEntry {
        id: manifest.id.clone(),
        kind: manifest.kind,
        name: manifest.name,
        files: manifest.files.into_iter().map(|(role, p)| (role, dir.join(p))).collect(),
        thumbnail: manifest.thumbnail.map(|p| dir.join(p)),
        epsilon: manifest.epsilon,
        manifest: path.to_path_buf(),
    };
    Ok((AssetLibrary { root: dir.to_path_buf(), entries: vec![entry] }, manifest.id))
}

pub struct GarmentArgs {
    pub body: PathBuf,
    pub cloth: PathBuf,
    pub out: PathBuf,
    pub id: Option<String>,
    pub epsilon: Option<f64>,
    pub albedo: Option<PathBuf>,
    pub normal: Option<PathBuf>,
}

pub fn garment_prepare(args: &GarmentArgs) -> Result<()> {
    let cloth = read_mesh(&args.cloth)?;
    let epsilon = args.epsilon.unwrap_or(DEFAULT_EPSILON);
    let id = match &args.id {
        Some(id) => id.clone(),
        None => args.cloth.file_stem().map(|s| s.to_string_lossy().into_owned()).context("cloth path has no file name")?,
    };
    let mut textures = BTreeMap::new();
    for (role, path) in [("albedo", &args.albedo), ("normal", &args.normal)] {
        if let Some(p) = path {
            textures.insert(role.to_string(), p.to_string_lossy().into_owned());
        }
    }
    let garment = if is_json(&args.body) {
        let (library, body_id) = library_of_manifest(&args.body)?;
        let body = library.load_body(&body_id)?;
        prepare_garment(&body.basis.rest_mesh, &body.binding, &cloth, epsilon, textures)?
    } else {
        let body = read_mesh(&args.body)?;
        GarmentAsset {
            mesh: resolve_penetration(&body, &cloth, epsilon)?,
            binding: None,
            texture_refs: textures,
            offset_epsilon: epsilon,
        }
    };
    let moved = garment.mesh.vertices.iter().zip(&cloth.vertices).filter(|(a, b)| a != b).count();
    let manifest = write_garment(&args.out, &id, &id, &garment)?;
    println!("moved {moved} of {} cloth vertices", cloth.vertex_count());
    println!("weights: {}", if garment.binding.is_some() { "transferred" } else { "none (mesh body)" });
    println!("wrote {}", manifest.display());
    Ok(())
}

pub fn assets_scan(dir: &Path, json: bool) -> Result<()> {
    let library = match scan_library(dir) {
        Ok(l) => l,
        Err(e) => {
            for id in &e.duplicates {
                eprintln!("duplicate id: {id}");
            }
            for (id, path) in &e.missing {
                eprintln!("missing file for {id}: {}", path.display());
            }
            for (path, reason) in &e.invalid {
                eprintln!("invalid manifest {}: {reason}", path.display());
            }
            bail!("catalogue has errors");
        }
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&library)?);
        return Ok(());
    }
    for kind in [AssetKind::BodyBasis, AssetKind::Garment, AssetKind::Motion] {
        for e in library.of_kind(kind) {
            println!("{:<11} {:<20} {}", kind.to_string(), e.id, e.name);
        }
    }
    println!("{} assets", library.entries.len());
    Ok(())
}

pub fn generate(config: &Path) -> Result<()> {
    let config = GenerationConfig::from_file(config)?;
    let manifest = run_generation(&config)?;
    let failed: Vec<_> = manifest.combinations.iter().filter(|c| !matches!(c.status, Status::Ok)).collect();
    println!("combinations: {}", manifest.combination_count);
    println!("failed: {}", failed.len());
    println!("files: {}", manifest.files.len());
    println!("output: {}", config.output_dir.display());
    Ok(())
}

pub fn serve(assets: &Path, host: &str, port: u16, idle_minutes: u64) -> Result<()> {
    let library = scan_library(assets).map_err(|e| anyhow::anyhow!("{e}"))?;
    let addr = format!("{host}:{port}").parse().with_context(|| format!("bad address {host}:{port}"))?;
    let state = AppState::new(library, Duration::from_secs(idle_minutes * 60));
    let runtime = tokio::runtime::Runtime::new()?;
    println!("serving {} on http://{addr}", assets.display());
    runtime.block_on(serve_api(state, addr))?;
    Ok(())
}

pub fn demo(dir: &Path, frames: usize) -> Result<()> {
    write_demo_library(dir, frames)?;
    let library = scan_library(dir).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!("wrote {} assets to {}", library.entries.len(), dir.display());
    Ok(())
}

