use std::f64::consts::TAU;

use nalgebra::Unit;

use super::mocap_skeleton;
use crate::bvh::MotionClip;
use crate::geometry::{Pose, Quat, Vec3};

fn rot(axis: Vec3, degrees: f64) -> Quat {
    Quat::from_axis_angle(&Unit::new_normalize(axis), degrees.to_radians())
}

fn clip(frames: usize, pose_at: impl Fn(f64, &mut Pose, &dyn Fn(&str) -> usize)) -> MotionClip {
    let skel = mocap_skeleton();
    let find = |name: &str| skel.find(name).expect("mocap joint");
    let poses: Vec<Pose> = (0..frames)
        .map(|f| {
            let mut pose = Pose::identity(skel.len());
            pose.root_translation = Vec3::new(0.0, 92.0, 0.0);
            pose_at(f as f64 / frames as f64, &mut pose, &find);
            pose
        })
        .collect();
    MotionClip::from_poses(skel, &poses, 1.0 / 30.0).expect("demo clip is valid")
}

/// One walk cycle in place with arms lowered, on the centimeter capture rig.
pub fn walk_clip(frames: usize) -> MotionClip {
    clip(frames, |t, pose, find| {
        let phase = TAU * t;
        let swing = 25.0 * phase.sin();
        pose.root_translation += Vec3::new(0.0, 2.0 * (2.0 * phase).cos(), 120.0 * t);
        pose.local_rotations[find("LeftUpLeg")] = rot(Vec3::x(), -swing);
        pose.local_rotations[find("RightUpLeg")] = rot(Vec3::x(), swing);
        pose.local_rotations[find("LeftLeg")] = rot(Vec3::x(), 35.0 * phase.sin().max(0.0));
        pose.local_rotations[find("RightLeg")] = rot(Vec3::x(), 35.0 * (-phase.sin()).max(0.0));
        pose.local_rotations[find("LeftArm")] = rot(Vec3::z(), -70.0) * rot(Vec3::y(), 0.6 * swing);
        pose.local_rotations[find("RightArm")] = rot(Vec3::z(), 70.0) * rot(Vec3::y(), 0.6 * swing);
        pose.local_rotations[find("LeftForeArm")] = rot(Vec3::y(), 15.0);
        pose.local_rotations[find("RightForeArm")] = rot(Vec3::y(), -15.0);
        pose.local_rotations[find("Spine")] = rot(Vec3::y(), -0.3 * swing);
    })
}

/// Right arm raised and waving, left arm lowered.
pub fn wave_clip(frames: usize) -> MotionClip {
    clip(frames, |t, pose, find| {
        let phase = TAU * t;
        pose.local_rotations[find("LeftArm")] = rot(Vec3::z(), -75.0);
        pose.local_rotations[find("RightArm")] = rot(Vec3::z(), -60.0);
        pose.local_rotations[find("RightForeArm")] = rot(Vec3::z(), -70.0 + 25.0 * (2.0 * phase).sin());
        pose.local_rotations[find("Head")] = rot(Vec3::y(), 10.0 * phase.sin());
    })
}
