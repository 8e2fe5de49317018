//! Single evaluation path from (shape, garments, motion frame) to posed
//! geometry, shared by batch generation and the interactive service.

use thiserror::Error;

use crate::assets::{BodyAsset, MotionAsset};
use crate::bvh::{ClipError, MotionClip};
use crate::geometry::{joint_positions, GeometryError, Mesh, Pose, Vec3};
use crate::retarget::{canonical_name, retarget_pose, AliasTable, RetargetError, RetargetMap};
use crate::shape::{apply_shape, shape_displacements, ShapeError, ShapeWeights};
use crate::skin::{nearest_vertices, skin_mesh, GarmentAsset, SkinError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("garment {0:?} has no skin weights")]
    UnboundGarment(String),
    #[error("garment {id:?}: {source}")]
    Garment { id: String, source: SkinError },
    #[error("shape: {0}")]
    Shape(#[from] ShapeError),
    #[error("skinning: {0}")]
    Skin(#[from] SkinError),
    #[error("retarget: {0}")]
    Retarget(#[from] RetargetError),
    #[error("frame: {0}")]
    Clip(#[from] ClipError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

/// A prepared garment ready to follow the body: its vertices anchor to the
/// nearest rest-body vertex and inherit that vertex's shape displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedGarment {
    pub id: String,
    pub asset: GarmentAsset,
    pub anchors: Vec<usize>,
}

impl DressedGarment {
    pub fn new(id: &str, asset: GarmentAsset, body: &BodyAsset) -> Result<Self, PipelineError> {
        let binding = asset.binding.as_ref().ok_or_else(|| PipelineError::UnboundGarment(id.to_string()))?;
        if binding.vertex_count() != asset.mesh.vertex_count() {
            return Err(PipelineError::Garment {
                id: id.to_string(),
                source: SkinError::BindingMismatch { mesh: asset.mesh.vertex_count(), binding: binding.vertex_count() },
            });
        }
        let anchors = nearest_vertices(&body.basis.rest_mesh, &asset.mesh)
            .map_err(|source| PipelineError::Garment { id: id.to_string(), source })?;
        Ok(DressedGarment { id: id.to_string(), asset, anchors })
    }
}

/// A clip with its retarget map onto the body skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundMotion {
    pub id: String,
    pub clip: MotionClip,
    pub map: RetargetMap,
}

impl BoundMotion {
    pub fn new(motion: MotionAsset, body: &BodyAsset) -> Result<Self, RetargetError> {
        let map = RetargetMap::build(motion.clip.skeleton(), &body.skeleton, &motion.map)?;
        Ok(BoundMotion { id: motion.id, clip: motion.clip, map })
    }

    pub fn frame_count(&self) -> usize {
        self.clip.frame_count()
    }
}

/// Posed output of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pose: Pose,
    pub body: Mesh,
    pub garments: Vec<Mesh>,
    pub joints: Vec<Vec3>,
}

/// Body skeleton pose for `frame` of `motion`, or the rest pose without one.
pub fn body_pose(body: &BodyAsset, motion: Option<(&BoundMotion, usize)>) -> Result<Pose, PipelineError> {
    match motion {
        None => Ok(Pose::identity(body.skeleton.len())),
        Some((m, frame)) => {
            let source = m.clip.pose_at_frame(frame)?;
            Ok(retarget_pose(m.clip.skeleton(), &source, &body.skeleton, &m.map)?)
        }
    }
}

/// Shape, dress, retarget and skin.
pub fn evaluate(
    body: &BodyAsset,
    weights: &ShapeWeights,
    garments: &[&DressedGarment],
    motion: Option<(&BoundMotion, usize)>,
) -> Result<Evaluation, PipelineError> {
    let pose = body_pose(body, motion)?;
    let shaped = apply_shape(&body.basis, weights)?;
    let displacement = shape_displacements(&body.basis, weights)?;
    let body_mesh = skin_mesh(&shaped, &body.binding, &pose)?;
    let garment_meshes = garments
        .iter()
        .map(|g| {
            let mut mesh = g.asset.mesh.clone();
            for (v, &a) in mesh.vertices.iter_mut().zip(&g.anchors) {
                *v += displacement[a];
            }
            mesh.recompute_normals();
            let binding = g.asset.binding.as_ref().ok_or_else(|| PipelineError::UnboundGarment(g.id.clone()))?;
            skin_mesh(&mesh, binding, &pose).map_err(|source| PipelineError::Garment { id: g.id.clone(), source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let joints = joint_positions(&body.skeleton, &pose)?;
    Ok(Evaluation { pose, body: body_mesh, garments: garment_meshes, joints })
}

/// Body-part groups used for segmentation labels.
pub const BODY_GROUPS: [&str; 14] = [
    "head",
    "torso",
    "left_upper_arm",
    "left_lower_arm",
    "left_hand",
    "right_upper_arm",
    "right_lower_arm",
    "right_hand",
    "left_upper_leg",
    "left_lower_leg",
    "left_foot",
    "right_upper_leg",
    "right_lower_leg",
    "right_foot",
];

fn group_of_role(role: &str) -> Option<usize> {
    let group = match role {
        "head" | "neck" => "head",
        "hips" | "spine" | "chest" | "left_shoulder" | "right_shoulder" => "torso",
        "left_toe" => "left_foot",
        "right_toe" => "right_foot",
        other => other,
    };
    BODY_GROUPS.iter().position(|g| *g == group)
}

/// Body group of every joint: its own alias role, else the nearest ancestor's,
/// else torso.
pub fn joint_groups(skeleton: &crate::geometry::Skeleton) -> Vec<u32> {
    let table = AliasTable::builtin();
    let own: Vec<Option<usize>> = skeleton
        .joints()
        .iter()
        .map(|j| table.role_of(&canonical_name(&j.name)).and_then(group_of_role))
        .collect();
    (0..skeleton.len())
        .map(|j| {
            std::iter::once(j)
                .chain(skeleton.ancestors(j))
                .find_map(|k| own[k])
                .unwrap_or(1) as u32
        })
        .collect()
}

/// One label per vertex: body vertices by dominant joint group, garment
/// vertices by `BODY_GROUPS.len() + garment slot`.
pub fn segmentation_labels(body: &BodyAsset, garments: &[&DressedGarment]) -> Vec<u32> {
    let groups = joint_groups(&body.skeleton);
    let mut labels: Vec<u32> =
        (0..body.binding.vertex_count()).map(|v| groups[body.binding.dominant_joint(v)]).collect();
    for (slot, g) in garments.iter().enumerate() {
        labels.extend(std::iter::repeat_n((BODY_GROUPS.len() + slot) as u32, g.asset.mesh.vertex_count()));
    }
    labels
}
