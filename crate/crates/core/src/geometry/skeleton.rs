use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Quat, Transform, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Offset from the parent joint in the parent's frame (the root's offset is from the origin).
    pub rest_offset: Vec3,
    pub end_site: Option<Vec3>,
}

/// Joint hierarchy stored as a topologically ordered flat array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Joint>", into = "Vec<Joint>")]
pub struct Skeleton {
    joints: Vec<Joint>,
}

/// Lowercases and strips `_`, `-`, `.`, `:` and whitespace.
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| !matches!(c, '_' | '-' | '.' | ':' | '|') && !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self, GeometryError> {
        if joints.is_empty() {
            return Err(GeometryError::EmptySkeleton);
        }
        let mut seen = HashSet::new();
        let mut roots = 0;
        for (k, joint) in joints.iter().enumerate() {
            match joint.parent {
                None => roots += 1,
                Some(p) if p >= k => {
                    return Err(GeometryError::ParentOrder { joint: k, parent: p });
                }
                Some(_) => {}
            }
            if !seen.insert(normalize_name(&joint.name)) {
                return Err(GeometryError::DuplicateJointName(joint.name.clone()));
            }
            let finite = joint.rest_offset.iter().all(|c| c.is_finite())
                && joint.end_site.is_none_or(|e| e.iter().all(|c| c.is_finite()));
            if !finite {
                return Err(GeometryError::NonFiniteOffset(joint.name.clone()));
            }
        }
        if roots != 1 || joints[0].parent.is_some() {
            return Err(GeometryError::RootCount(roots));
        }
        Ok(Skeleton { joints })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joint(&self, index: usize) -> &Joint {
        &self.joints[index]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        let key = normalize_name(name);
        self.joints.iter().position(|j| normalize_name(&j.name) == key)
    }

    pub fn children(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        self.joints
            .iter()
            .enumerate()
            .skip(index + 1)
            .filter(move |(_, j)| j.parent == Some(index))
            .map(|(k, _)| k)
    }

    pub fn ancestors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.joints[index].parent, move |&p| self.joints[p].parent)
    }

    /// Returns a copy with every offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Skeleton {
        self.map_offsets(|v| v * factor)
    }

    /// Returns a copy with every offset rotated by `rotation` (a rigid turn of the rest pose).
    pub fn rotated(&self, rotation: &Quat) -> Skeleton {
        self.map_offsets(|v| rotation * v)
    }

    fn map_offsets(&self, f: impl Fn(&Vec3) -> Vec3) -> Skeleton {
        let joints = self
            .joints
            .iter()
            .map(|j| Joint {
                name: j.name.clone(),
                parent: j.parent,
                rest_offset: f(&j.rest_offset),
                end_site: j.end_site.as_ref().map(&f),
            })
            .collect();
        Skeleton { joints }
    }

    /// Rest-pose world positions of every joint.
    pub fn rest_positions(&self) -> Vec<Vec3> {
        let mut out: Vec<Vec3> = Vec::with_capacity(self.joints.len());
        for joint in &self.joints {
            let base = joint.parent.map_or_else(Vec3::zeros, |p| out[p]);
            out.push(base + joint.rest_offset);
        }
        out
    }

    /// Rest-pose world positions of all end sites, in joint order.
    pub fn rest_end_sites(&self) -> Vec<Vec3> {
        let rest = self.rest_positions();
        self.joints
            .iter()
            .zip(&rest)
            .filter_map(|(j, p)| j.end_site.map(|e| p + e))
            .collect()
    }
}

impl TryFrom<Vec<Joint>> for Skeleton {
    type Error = GeometryError;

    fn try_from(joints: Vec<Joint>) -> Result<Self, Self::Error> {
        Skeleton::new(joints)
    }
}

impl From<Skeleton> for Vec<Joint> {
    fn from(s: Skeleton) -> Self {
        s.joints
    }
}

/// Per-joint local rotations plus the root translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub root_translation: Vec3,
    pub local_rotations: Vec<Quat>,
}

impl Pose {
    pub fn identity(joint_count: usize) -> Self {
        Pose {
            root_translation: Vec3::zeros(),
            local_rotations: vec![Quat::identity(); joint_count],
        }
    }

    pub fn validate(&self, skeleton: &Skeleton) -> Result<(), GeometryError> {
        if self.local_rotations.len() != skeleton.len() {
            return Err(GeometryError::PoseMismatch {
                pose: self.local_rotations.len(),
                skeleton: skeleton.len(),
            });
        }
        if let Some(k) = self
            .local_rotations
            .iter()
            .position(|q| (q.norm() - 1.0).abs() > 1e-6)
        {
            return Err(GeometryError::NonUnitRotation { joint: k });
        }
        Ok(())
    }

    /// Pre-applies a rigid transform to the whole posed skeleton.
    ///
    /// The scale component of `rigid` is ignored.
    pub fn with_global(&self, skeleton: &Skeleton, rigid: &Transform) -> Pose {
        let mut out = self.clone();
        let root_offset = skeleton.joint(0).rest_offset;
        let root_world = root_offset + self.root_translation;
        out.root_translation =
            rigid.rotation * root_world + rigid.translation - root_offset;
        out.local_rotations[0] = rigid.rotation * self.local_rotations[0];
        out
    }
}

/// World transform of every joint: `world[k] = world[parent] * local[k]`.
///
/// The root's local translation is its rest offset plus the pose's root translation.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &Pose) -> Result<Vec<Transform>, GeometryError> {
    if pose.local_rotations.len() != skeleton.len() {
        return Err(GeometryError::PoseMismatch {
            pose: pose.local_rotations.len(),
            skeleton: skeleton.len(),
        });
    }
    let mut world: Vec<Transform> = Vec::with_capacity(skeleton.len());
    for (joint, rotation) in skeleton.joints().iter().zip(&pose.local_rotations) {
        let transform = match joint.parent {
            None => Transform::new(*rotation, joint.rest_offset + pose.root_translation),
            Some(p) => world[p] * Transform::new(*rotation, joint.rest_offset),
        };
        world.push(transform);
    }
    Ok(world)
}

/// World joint positions for a pose.
pub fn joint_positions(skeleton: &Skeleton, pose: &Pose) -> Result<Vec<Vec3>, GeometryError> {
    Ok(forward_kinematics(skeleton, pose)?
        .into_iter()
        .map(|t| t.translation)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn joint(name: &str, parent: Option<usize>, offset: [f64; 3]) -> Joint {
        Joint {
            name: name.into(),
            parent,
            rest_offset: Vec3::from(offset),
            end_site: None,
        }
    }

    #[test]
    fn normalizes_names() {
        assert_eq!(normalize_name("thigh.L"), "thighl");
        assert_eq!(normalize_name("Left_Up-Leg"), "leftupleg");
        assert_eq!(normalize_name("mixamorig:Hips"), "mixamorighips");
    }

    #[test]
    fn rejects_bad_topology() {
        let err = Skeleton::new(vec![joint("a", None, [0.0; 3]), joint("b", Some(1), [0.0; 3])]);
        assert!(matches!(err, Err(GeometryError::ParentOrder { joint: 1, parent: 1 })));
        let err = Skeleton::new(vec![joint("a", None, [0.0; 3]), joint("b", None, [0.0; 3])]);
        assert!(matches!(err, Err(GeometryError::RootCount(2))));
        let err = Skeleton::new(vec![joint("Left_Arm", None, [0.0; 3]), joint("leftarm", Some(0), [0.0; 3])]);
        assert!(matches!(err, Err(GeometryError::DuplicateJointName(_))));
    }

    #[test]
    fn identity_pose_sums_offsets() {
        let s = Skeleton::new(vec![
            joint("root", None, [0.5, 0.0, 0.0]),
            joint("a", Some(0), [0.0, 1.0, 0.0]),
            joint("b", Some(1), [0.0, 0.0, 2.0]),
            joint("c", Some(0), [-1.0, 0.0, 0.0]),
        ])
        .unwrap();
        let world = joint_positions(&s, &Pose::identity(4)).unwrap();
        assert_eq!(world, s.rest_positions());
        assert_eq!(world[2], Vec3::new(0.5, 1.0, 2.0));
        assert_eq!(world[3], Vec3::new(-0.5, 0.0, 0.0));
    }

    #[test]
    fn two_joint_chain_quarter_turn() {
        let s = Skeleton::new(vec![joint("root", None, [0.0; 3]), joint("tip", Some(0), [0.0, 1.0, 0.0])])
            .unwrap();
        let mut pose = Pose::identity(2);
        pose.local_rotations[0] = Quat::from_axis_angle(&Vec3::z_axis(), FRAC_PI_2);
        let world = joint_positions(&s, &pose).unwrap();
        assert!((world[1] - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let s = Skeleton::new(vec![joint("root", None, [0.0; 3])]).unwrap();
        assert!(matches!(
            forward_kinematics(&s, &Pose::identity(3)),
            Err(GeometryError::PoseMismatch { pose: 3, skeleton: 1 })
        ));
    }

    #[test]
    fn children_in_document_order() {
        let s = Skeleton::new(vec![
            joint("root", None, [0.0; 3]),
            joint("a", Some(0), [1.0, 0.0, 0.0]),
            joint("a1", Some(1), [1.0, 0.0, 0.0]),
            joint("b", Some(0), [0.0, 1.0, 0.0]),
        ])
        .unwrap();
        assert_eq!(s.children(0).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(s.ancestors(2).collect::<Vec<_>>(), vec![1, 0]);
    }
}
