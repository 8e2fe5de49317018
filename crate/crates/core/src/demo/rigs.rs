use crate::geometry::{Joint, Skeleton, Vec3};

struct Spec<'a> {
    name: &'a str,
    parent: Option<&'a str>,
    offset: [f64; 3],
    end: Option<[f64; 3]>,
}

fn build(specs: &[Spec<'_>]) -> Skeleton {
    let mut joints: Vec<Joint> = Vec::with_capacity(specs.len());
    for s in specs {
        let parent = s.parent.map(|p| {
            joints
                .iter()
                .position(|j| j.name == p)
                .unwrap_or_else(|| panic!("parent {p} not declared before {}", s.name))
        });
        joints.push(Joint {
            name: s.name.to_string(),
            parent,
            rest_offset: Vec3::from(s.offset),
            end_site: s.end.map(Vec3::from),
        });
    }
    Skeleton::new(joints).expect("demo rig is valid")
}

macro_rules! j {
    ($name:expr, $parent:expr, $off:expr) => {
        Spec { name: $name, parent: $parent, offset: $off, end: None }
    };
    ($name:expr, $parent:expr, $off:expr, end $e:expr) => {
        Spec { name: $name, parent: $parent, offset: $off, end: Some($e) }
    };
}

/// Blender-style humanoid in meters, facing +Z with its left side on +X.
pub fn humanoid_skeleton() -> Skeleton {
    build(&[
        j!("hips", None, [0.0, 0.95, 0.0]),
        j!("spine", Some("hips"), [0.0, 0.1, 0.0]),
        j!("chest", Some("spine"), [0.0, 0.2, 0.0]),
        j!("neck", Some("chest"), [0.0, 0.22, 0.0]),
        j!("head", Some("neck"), [0.0, 0.1, 0.0], end [0.0, 0.2, 0.0]),
        j!("shoulder.L", Some("chest"), [0.03, 0.17, 0.0]),
        j!("upper_arm.L", Some("shoulder.L"), [0.15, 0.0, 0.0]),
        j!("forearm.L", Some("upper_arm.L"), [0.28, 0.0, 0.0]),
        j!("hand.L", Some("forearm.L"), [0.25, 0.0, 0.0], end [0.09, 0.0, 0.0]),
        j!("shoulder.R", Some("chest"), [-0.03, 0.17, 0.0]),
        j!("upper_arm.R", Some("shoulder.R"), [-0.15, 0.0, 0.0]),
        j!("forearm.R", Some("upper_arm.R"), [-0.28, 0.0, 0.0]),
        j!("hand.R", Some("forearm.R"), [-0.25, 0.0, 0.0], end [-0.09, 0.0, 0.0]),
        j!("thigh.L", Some("hips"), [0.09, -0.05, 0.0]),
        j!("shin.L", Some("thigh.L"), [0.0, -0.43, 0.0]),
        j!("foot.L", Some("shin.L"), [0.0, -0.42, 0.0]),
        j!("toe.L", Some("foot.L"), [0.0, -0.05, 0.12], end [0.0, 0.0, 0.05]),
        j!("thigh.R", Some("hips"), [-0.09, -0.05, 0.0]),
        j!("shin.R", Some("thigh.R"), [0.0, -0.43, 0.0]),
        j!("foot.R", Some("shin.R"), [0.0, -0.42, 0.0]),
        j!("toe.R", Some("foot.R"), [0.0, -0.05, 0.12], end [0.0, 0.0, 0.05]),
    ])
}

/// CMU-style capture rig in centimeters with extra hip, spine and neck links.
pub fn mocap_skeleton() -> Skeleton {
    build(&[
        j!("Hips", None, [0.0, 0.0, 0.0]),
        j!("LHipJoint", Some("Hips"), [0.0, 0.0, 0.0]),
        j!("LeftUpLeg", Some("LHipJoint"), [10.0, -6.0, 1.0]),
        j!("LeftLeg", Some("LeftUpLeg"), [0.0, -45.0, 0.0]),
        j!("LeftFoot", Some("LeftLeg"), [0.0, -44.0, -1.0]),
        j!("LeftToeBase", Some("LeftFoot"), [0.0, -4.0, 13.0], end [0.0, 0.0, 5.0]),
        j!("RHipJoint", Some("Hips"), [0.0, 0.0, 0.0]),
        j!("RightUpLeg", Some("RHipJoint"), [-10.0, -6.0, 1.0]),
        j!("RightLeg", Some("RightUpLeg"), [0.0, -45.0, 0.0]),
        j!("RightFoot", Some("RightLeg"), [0.0, -44.0, -1.0]),
        j!("RightToeBase", Some("RightFoot"), [0.0, -4.0, 13.0], end [0.0, 0.0, 5.0]),
        j!("LowerBack", Some("Hips"), [0.0, 2.0, 0.0]),
        j!("Spine", Some("LowerBack"), [0.0, 11.0, 0.0]),
        j!("Spine1", Some("Spine"), [0.0, 12.0, 0.0]),
        j!("Neck", Some("Spine1"), [0.0, 20.0, 0.0]),
        j!("Neck1", Some("Neck"), [0.0, 5.0, 0.0]),
        j!("Head", Some("Neck1"), [0.0, 6.0, 0.0], end [0.0, 20.0, 0.0]),
        j!("LeftShoulder", Some("Spine1"), [3.0, 18.0, 0.0]),
        j!("LeftArm", Some("LeftShoulder"), [16.0, 0.0, 0.0]),
        j!("LeftForeArm", Some("LeftArm"), [29.0, 0.0, 0.0]),
        j!("LeftHand", Some("LeftForeArm"), [25.0, 0.0, 0.0], end [9.0, 0.0, 0.0]),
        j!("RightShoulder", Some("Spine1"), [-3.0, 18.0, 0.0]),
        j!("RightArm", Some("RightShoulder"), [-16.0, 0.0, 0.0]),
        j!("RightForeArm", Some("RightArm"), [-29.0, 0.0, 0.0]),
        j!("RightHand", Some("RightForeArm"), [-25.0, 0.0, 0.0], end [-9.0, 0.0, 0.0]),
    ])
}
