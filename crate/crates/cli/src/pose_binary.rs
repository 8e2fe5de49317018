//! Binary pose sequence written by `retarget` for non-BVH outputs.
//!
//! All fields little-endian:
//! - header: `AVPS`, u32 version, u32 joint count, u32 frame count, f64 frame time
//! - names: joint count × (u32 byte length, UTF-8 bytes)
//! - frames: frame count × (3 f64 root translation, joint count × 4 f64 quaternion x, y, z, w)

use avatar_core::retarget::RetargetedMotion;

pub const MAGIC: &[u8; 4] = b"AVPS";
pub const VERSION: u32 = 1;

pub fn encode(motion: &RetargetedMotion) -> Vec<u8> {
    let skel = &motion.skeleton;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [VERSION, skel.len() as u32, motion.poses.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&motion.frame_time.to_le_bytes());
    for j in skel.joints() {
        out.extend_from_slice(&(j.name.len() as u32).to_le_bytes());
        out.extend_from_slice(j.name.as_bytes());
    }
    for pose in &motion.poses {
        for c in pose.root_translation.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for q in &pose.local_rotations {
            for c in q.coords.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    out
}
