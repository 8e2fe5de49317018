use std::fmt::Write;

use super::MotionClip;
use crate::geometry::{Skeleton, Vec3};

/// Serializes a clip with tab indentation, LF line endings and 6-decimal values.
///
/// Joints are written depth-first with children in index order; frame columns
/// follow the written joint order. The frame time uses the shortest exact
/// decimal representation.
pub fn write_bvh(clip: &MotionClip) -> String {
    let skeleton = clip.skeleton();
    let order = preorder(skeleton);
    let mut out = String::with_capacity(256 + clip.frame_count() * clip.channels().total() * 10);
    out.push_str("HIERARCHY\n");
    write_joint(&mut out, clip, 0);
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", clip.frame_count());
    let _ = writeln!(out, "Frame Time: {}", clip.frame_time());
    for row in clip.frames() {
        let mut first = true;
        for &joint in &order {
            let base = clip.channels().offset(joint);
            for k in 0..clip.channels().joint(joint).len() {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{:.6}", row[base + k]);
            }
        }
        out.push('\n');
    }
    out
}

fn preorder(skeleton: &Skeleton) -> Vec<usize> {
    let mut children = vec![Vec::new(); skeleton.len()];
    for (k, joint) in skeleton.joints().iter().enumerate() {
        if let Some(p) = joint.parent {
            children[p].push(k);
        }
    }
    let mut order = Vec::with_capacity(skeleton.len());
    let mut stack = vec![0];
    while let Some(j) = stack.pop() {
        order.push(j);
        stack.extend(children[j].iter().rev());
    }
    order
}

fn write_joint(out: &mut String, clip: &MotionClip, root: usize) {
    enum Step {
        Open(usize),
        EndSite(usize),
        Close(usize),
    }
    let skeleton = clip.skeleton();
    let mut children = vec![Vec::new(); skeleton.len()];
    let mut depth = vec![0usize; skeleton.len()];
    for (k, joint) in skeleton.joints().iter().enumerate() {
        if let Some(p) = joint.parent {
            children[p].push(k);
            depth[k] = depth[p] + 1;
        }
    }
    let mut steps = vec![Step::Open(root)];
    while let Some(step) = steps.pop() {
        match step {
            Step::Open(j) => {
                let d = depth[j];
                let data = skeleton.joint(j);
                let keyword = if data.parent.is_none() { "ROOT" } else { "JOINT" };
                indent(out, d);
                let _ = writeln!(out, "{keyword} {}", data.name);
                indent(out, d);
                out.push_str("{\n");
                indent(out, d + 1);
                write_offset(out, &data.rest_offset);
                indent(out, d + 1);
                let channels = clip.channels().joint(j);
                let _ = write!(out, "CHANNELS {}", channels.len());
                for c in channels {
                    let _ = write!(out, " {c}");
                }
                out.push('\n');
                steps.push(Step::Close(j));
                if data.end_site.is_some() {
                    steps.push(Step::EndSite(j));
                }
                steps.extend(children[j].iter().rev().copied().map(Step::Open));
            }
            Step::EndSite(j) => {
                let d = depth[j] + 1;
                let end = skeleton.joint(j).end_site.unwrap_or_else(Vec3::zeros);
                indent(out, d);
                out.push_str("End Site\n");
                indent(out, d);
                out.push_str("{\n");
                indent(out, d + 1);
                write_offset(out, &end);
                indent(out, d);
                out.push_str("}\n");
            }
            Step::Close(j) => {
                indent(out, depth[j]);
                out.push_str("}\n");
            }
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    out.extend(std::iter::repeat_n('\t', depth));
}

fn write_offset(out: &mut String, v: &Vec3) {
    let _ = writeln!(out, "OFFSET {:.6} {:.6} {:.6}", v.x, v.y, v.z);
}
