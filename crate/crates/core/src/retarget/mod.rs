//! Motion transfer from a source clip skeleton onto a target skeleton.
//!
//! Four steps: a global scale from rest-pose heights, bone correspondences by
//! name, a per-bone rest-frame alignment rotation, and per-frame rotation
//! transfer through those alignments.

mod alias;

use std::collections::{BTreeMap, HashSet};

use nalgebra::{Matrix3, Rotation3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::MotionClip;
use crate::geometry::{normalize_name, Pose, Quat, Skeleton, Vec3};

pub use alias::{canonical_name, AliasGroup, AliasTable, MANDATORY_ROLES};

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum RetargetError {
    #[error("{skeleton} skeleton is degenerate (no measurable size)")]
    DegenerateSkeleton { skeleton: &'static str },
    #[error("mandatory bones could not be paired: {}", missing.join(", "))]
    UnmappedBones { missing: Vec<String> },
    #[error("conflicting correspondence: {detail}")]
    Conflict { detail: String },
    #[error("unknown {skeleton} joint {name:?}")]
    UnknownJoint { skeleton: &'static str, name: String },
    #[error("{skeleton} bone {joint:?} has zero length")]
    DegenerateBone { skeleton: &'static str, joint: String },
    #[error("root joints must be paired with each other")]
    RootsNotPaired,
    #[error("retarget map was built for different skeletons")]
    StaleMap,
    #[error("invalid map file: {0}")]
    MapFile(String),
}

/// Contents of a retarget map file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Explicit `(source, target)` joint name pairs.
    pub overrides: Vec<(String, String)>,
    /// Extra equivalence groups, consulted before the builtin table.
    pub aliases: Vec<Vec<String>>,
    /// Joint name to the child that defines its bone direction, for either skeleton.
    pub primary_child: BTreeMap<String, String>,
}

impl MapConfig {
    pub fn from_json(text: &str) -> Result<Self, RetargetError> {
        serde_json::from_str(text).map_err(|e| RetargetError::MapFile(e.to_string()))
    }
}

/// Everything needed to transfer a clip: scale, pairs and alignment rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetMap {
    pub scale: f64,
    /// `(source joint, target joint)`, sorted by target joint.
    pub pairs: Vec<(usize, usize)>,
    /// Rotation taking the source bone's rest frame onto the target's, per pair.
    pub alignments: Vec<Quat>,
    /// Target joints without a source; they stay at rest.
    pub unmapped_target: Vec<usize>,
    source_names: Vec<String>,
    target_names: Vec<String>,
}

impl RetargetMap {
    pub fn build(source: &Skeleton, target: &Skeleton, config: &MapConfig) -> Result<Self, RetargetError> {
        let scale = compute_scale(source, target)?;
        let aliases = AliasTable::from_lists(&config.aliases).merged_with_builtin();
        let pairs = map_bones(source, target, &aliases, &config.overrides)?;
        let alignments = compute_alignments(source, target, &pairs, &config.primary_child)?;
        let paired: HashSet<usize> = pairs.iter().map(|p| p.1).collect();
        let unmapped_target = (0..target.len()).filter(|t| !paired.contains(t)).collect();
        Ok(RetargetMap {
            scale,
            pairs,
            alignments,
            unmapped_target,
            source_names: names(source),
            target_names: names(target),
        })
    }

    pub fn matches(&self, source: &Skeleton, target: &Skeleton) -> bool {
        self.source_names == names(source) && self.target_names == names(target)
    }

    /// Names of target joints left at rest.
    pub fn unmapped_target_names(&self, target: &Skeleton) -> Vec<String> {
        self.unmapped_target.iter().map(|&t| target.joint(t).name.clone()).collect()
    }
}

fn names(s: &Skeleton) -> Vec<String> {
    s.joints().iter().map(|j| j.name.clone()).collect()
}

/// Vertical extent of the rest joint cloud, end sites included.
fn rest_height(s: &Skeleton) -> f64 {
    let points: Vec<Vec3> = s.rest_positions().into_iter().chain(s.rest_end_sites()).collect();
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    hi - lo
}

fn total_bone_length(s: &Skeleton) -> f64 {
    s.joints()
        .iter()
        .map(|j| {
            let bone = if j.parent.is_some() { j.rest_offset.norm() } else { 0.0 };
            bone + j.end_site.map_or(0.0, |e| e.norm())
        })
        .sum()
}

/// Target-to-source size ratio: height ratio, or total bone length ratio when
/// either skeleton is flat (height below 1e-6).
pub fn compute_scale(source: &Skeleton, target: &Skeleton) -> Result<f64, RetargetError> {
    let (ls, lt) = (total_bone_length(source), total_bone_length(target));
    if !(ls > 0.0) {
        return Err(RetargetError::DegenerateSkeleton { skeleton: "source" });
    }
    if !(lt > 0.0) {
        return Err(RetargetError::DegenerateSkeleton { skeleton: "target" });
    }
    let (hs, ht) = (rest_height(source), rest_height(target));
    if hs < 1e-6 || ht < 1e-6 {
        return Ok(lt / ls);
    }
    Ok(ht / hs)
}

/// Resolves bone correspondences: overrides, then exact normalized names, then
/// alias groups; roots pair with each other when still free.
pub fn map_bones(
    source: &Skeleton,
    target: &Skeleton,
    aliases: &AliasTable,
    overrides: &[(String, String)],
) -> Result<Vec<(usize, usize)>, RetargetError> {
    let mut src_used = vec![false; source.len()];
    let mut tgt_used = vec![false; target.len()];
    let mut pairs = Vec::new();

    for (s_name, t_name) in overrides {
        let s = source.find(s_name).ok_or_else(|| RetargetError::UnknownJoint {
            skeleton: "source",
            name: s_name.clone(),
        })?;
        let t = target.find(t_name).ok_or_else(|| RetargetError::UnknownJoint {
            skeleton: "target",
            name: t_name.clone(),
        })?;
        if src_used[s] || tgt_used[t] {
            return Err(RetargetError::Conflict {
                detail: format!("override {s_name:?} -> {t_name:?} reuses an already paired joint"),
            });
        }
        src_used[s] = true;
        tgt_used[t] = true;
        pairs.push((s, t));
    }

    let src_canon: Vec<String> = source.joints().iter().map(|j| canonical_name(&j.name)).collect();
    let tgt_canon: Vec<String> = target.joints().iter().map(|j| canonical_name(&j.name)).collect();

    for t in 0..target.len() {
        if tgt_used[t] {
            continue;
        }
        let exact = normalize_name(&target.joint(t).name);
        let hit = (0..source.len())
            .find(|&s| !src_used[s] && normalize_name(&source.joint(s).name) == exact)
            .or_else(|| (0..source.len()).find(|&s| !src_used[s] && src_canon[s] == tgt_canon[t]));
        if let Some(s) = hit {
            src_used[s] = true;
            tgt_used[t] = true;
            pairs.push((s, t));
        }
    }

    for group in &aliases.groups {
        let best = |canon: &[String], used: &[bool]| {
            canon
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .filter_map(|(i, n)| group.names.iter().position(|g| g == n).map(|rank| (rank, i)))
                .min()
                .map(|(_, i)| i)
        };
        if let (Some(s), Some(t)) = (best(&src_canon, &src_used), best(&tgt_canon, &tgt_used)) {
            src_used[s] = true;
            tgt_used[t] = true;
            pairs.push((s, t));
        }
    }

    match (src_used[0], tgt_used[0]) {
        (false, false) => pairs.push((0, 0)),
        _ if pairs.contains(&(0, 0)) => {}
        _ => return Err(RetargetError::RootsNotPaired),
    }

    let mut missing = Vec::new();
    for &role in MANDATORY_ROLES {
        if role == "hips" {
            continue; // satisfied by the root pair
        }
        let Some(group) = aliases.groups.iter().find(|g| g.role == role) else {
            continue;
        };
        let covered = pairs
            .iter()
            .any(|&(s, t)| group.names.contains(&src_canon[s]) || group.names.contains(&tgt_canon[t]));
        if !covered {
            missing.push(role.to_string());
        }
    }
    if !missing.is_empty() {
        return Err(RetargetError::UnmappedBones { missing });
    }

    pairs.sort_by_key(|p| p.1);
    Ok(pairs)
}

/// Orthonormal frame with `primary` as first axis and `up` projected
/// perpendicular to it as second (world X when `up` is parallel).
pub fn frame_from_axes(primary: &Vec3, up: &Vec3) -> Quat {
    let p = primary.normalize();
    let mut s = up - p * up.dot(&p);
    if s.norm() < 1e-6 {
        let x = Vec3::x();
        s = x - p * x.dot(&p);
        if s.norm() < 1e-6 {
            let z = Vec3::z();
            s = z - p * z.dot(&p);
        }
    }
    let s = s.normalize();
    let t = p.cross(&s);
    let m = Matrix3::from_columns(&[p, s, t]);
    Quat::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// World direction of the bone owned by `joint` in the rest pose.
fn bone_direction(
    skeleton: &Skeleton,
    joint: usize,
    primary_child: &BTreeMap<String, String>,
    label: &'static str,
) -> Result<Vec3, RetargetError> {
    let name = &skeleton.joint(joint).name;
    let key = normalize_name(name);
    let chosen = primary_child
        .iter()
        .find(|(k, _)| normalize_name(k) == key)
        .and_then(|(_, child)| skeleton.find(child))
        .filter(|&c| skeleton.joint(c).parent == Some(joint));
    let offset = match chosen.or_else(|| skeleton.children(joint).next()) {
        Some(c) => skeleton.joint(c).rest_offset,
        None => skeleton
            .joint(joint)
            .end_site
            .unwrap_or(skeleton.joint(joint).rest_offset),
    };
    if offset.norm() < 1e-9 {
        return Err(RetargetError::DegenerateBone {
            skeleton: label,
            joint: name.clone(),
        });
    }
    Ok(offset.normalize())
}

/// Per-pair rotation taking the source rest bone frame onto the target's.
pub fn compute_alignments(
    source: &Skeleton,
    target: &Skeleton,
    pairs: &[(usize, usize)],
    primary_child: &BTreeMap<String, String>,
) -> Result<Vec<Quat>, RetargetError> {
    let up = Vec3::y();
    pairs
        .iter()
        .map(|&(s, t)| {
            let fs = frame_from_axes(&bone_direction(source, s, primary_child, "source")?, &up);
            let ft = frame_from_axes(&bone_direction(target, t, primary_child, "target")?, &up);
            Ok(ft * fs.inverse())
        })
        .collect()
}

/// A clip expressed on the target skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetedMotion {
    pub skeleton: Skeleton,
    pub poses: Vec<Pose>,
    pub frame_time: f64,
}

/// Per-target-joint transfer plan derived from a map.
struct Plan {
    /// For each target joint: `(pair index, nearest mapped ancestor pair index)`.
    slots: Vec<Option<(usize, Option<usize>)>>,
}

impl Plan {
    fn new(target: &Skeleton, map: &RetargetMap) -> Self {
        let mut pair_of = vec![None; target.len()];
        for (i, &(_, t)) in map.pairs.iter().enumerate() {
            pair_of[t] = Some(i);
        }
        let slots = (0..target.len())
            .map(|t| {
                pair_of[t].map(|i| {
                    let parent = target.ancestors(t).find_map(|a| pair_of[a]);
                    (i, parent)
                })
            })
            .collect();
        Plan { slots }
    }
}

/// Retargets one source pose.
///
/// For a pair `(s, t)` with nearest mapped ancestor pair `(sp, tp)`:
/// `L_t = A_tp * G_sp^-1 * G_s * A_t^-1`, where `G` are source world rotations.
/// This keeps every mapped target bone pointing the way its source bone points.
/// The root's world position (rest offset plus translation) is scaled.
pub fn retarget_pose(
    source: &Skeleton,
    pose: &Pose,
    target: &Skeleton,
    map: &RetargetMap,
) -> Result<Pose, RetargetError> {
    if !map.matches(source, target) || pose.local_rotations.len() != source.len() {
        return Err(RetargetError::StaleMap);
    }
    Ok(transfer(source, pose, target, map, &Plan::new(target, map)))
}

fn transfer(source: &Skeleton, pose: &Pose, target: &Skeleton, map: &RetargetMap, plan: &Plan) -> Pose {
    let mut world = Vec::with_capacity(source.len());
    for (j, q) in source.joints().iter().zip(&pose.local_rotations) {
        let g = match j.parent {
            Some(p) => world[p] * q,
            None => *q,
        };
        world.push(g);
    }
    let mut out = Pose::identity(target.len());
    for (t, slot) in plan.slots.iter().enumerate() {
        let Some((i, parent)) = *slot else { continue };
        let (s, _) = map.pairs[i];
        let relative = match parent {
            Some(pi) => {
                let (sp, _) = map.pairs[pi];
                map.alignments[pi] * world[sp].inverse() * world[s]
            }
            None => world[s],
        };
        out.local_rotations[t] = crate::geometry::renormalize(&(relative * map.alignments[i].inverse()));
    }
    let source_root = source.joint(0).rest_offset + pose.root_translation;
    out.root_translation = source_root * map.scale - target.joint(0).rest_offset;
    out
}

/// Retargets every frame of `clip`. Frames are independent and processed in parallel.
pub fn retarget_clip(clip: &MotionClip, target: &Skeleton, map: &RetargetMap) -> Result<RetargetedMotion, RetargetError> {
    let source = clip.skeleton();
    if !map.matches(source, target) {
        return Err(RetargetError::StaleMap);
    }
    let plan = Plan::new(target, map);
    let poses = (0..clip.frame_count())
        .into_par_iter()
        .map(|f| {
            let pose = clip.pose_at_frame(f).expect("frame in range");
            transfer(source, &pose, target, map, &plan)
        })
        .collect();
    Ok(RetargetedMotion {
        skeleton: target.clone(),
        poses,
        frame_time: clip.frame_time(),
    })
}
