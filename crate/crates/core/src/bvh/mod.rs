//! Biovision Hierarchy motion files.
//!
//! Rotation channels compose intrinsically in the order they are listed, so
//! `Zrotation Xrotation Yrotation` yields `Rz * Rx * Ry`. Values are degrees.

mod parse;
mod write;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{GeometryError, Pose, Quat, Skeleton, Vec3};

pub use parse::parse_bvh;
pub use write::write_bvh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrotation | Channel::Yrotation | Channel::Zrotation)
    }

    fn axis(self) -> usize {
        match self {
            Channel::Xposition | Channel::Xrotation => 0,
            Channel::Yposition | Channel::Yrotation => 1,
            Channel::Zposition | Channel::Zrotation => 2,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "xposition" => Channel::Xposition,
            "yposition" => Channel::Yposition,
            "zposition" => Channel::Zposition,
            "xrotation" => Channel::Xrotation,
            "yrotation" => Channel::Yrotation,
            "zrotation" => Channel::Zrotation,
            _ => return Err(()),
        })
    }
}

/// Per-joint channel lists, in joint order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSpec {
    per_joint: Vec<Vec<Channel>>,
    offsets: Vec<usize>,
}

impl ChannelSpec {
    pub fn new(per_joint: Vec<Vec<Channel>>) -> Result<Self, ClipError> {
        for (joint, list) in per_joint.iter().enumerate() {
            for (k, c) in list.iter().enumerate() {
                if list[..k].contains(c) {
                    return Err(ClipError::DuplicateChannel { joint, channel: *c });
                }
            }
        }
        let mut offsets = Vec::with_capacity(per_joint.len());
        let mut acc = 0;
        for list in &per_joint {
            offsets.push(acc);
            acc += list.len();
        }
        Ok(ChannelSpec { per_joint, offsets })
    }

    pub fn joint(&self, index: usize) -> &[Channel] {
        &self.per_joint[index]
    }

    pub fn joint_count(&self) -> usize {
        self.per_joint.len()
    }

    /// Index of the joint's first value within a frame row.
    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    pub fn total(&self) -> usize {
        self.per_joint.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClipError {
    #[error("channel spec covers {channels} joints, skeleton has {joints}")]
    JointCount { channels: usize, joints: usize },
    #[error("joint {joint} lists {channel} twice")]
    DuplicateChannel { joint: usize, channel: Channel },
    #[error("frame {frame} has {found} values, expected {expected}")]
    RowLength { frame: usize, expected: usize, found: usize },
    #[error("frame {frame} holds a non-finite value")]
    NonFinite { frame: usize },
    #[error("frame time must be positive and finite, got {0}")]
    FrameTime(f64),
    #[error("frame {frame} out of range for {count} frames")]
    FrameIndex { frame: usize, count: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A parsed motion: skeleton, channel layout, frame time and raw frame rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    skeleton: Skeleton,
    channels: ChannelSpec,
    frame_time: f64,
    frames: Vec<Vec<f64>>,
}

impl MotionClip {
    pub fn new(
        skeleton: Skeleton,
        channels: ChannelSpec,
        frame_time: f64,
        frames: Vec<Vec<f64>>,
    ) -> Result<Self, ClipError> {
        if channels.joint_count() != skeleton.len() {
            return Err(ClipError::JointCount {
                channels: channels.joint_count(),
                joints: skeleton.len(),
            });
        }
        if !(frame_time > 0.0 && frame_time.is_finite()) {
            return Err(ClipError::FrameTime(frame_time));
        }
        let expected = channels.total();
        for (frame, row) in frames.iter().enumerate() {
            if row.len() != expected {
                return Err(ClipError::RowLength {
                    frame,
                    expected,
                    found: row.len(),
                });
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(ClipError::NonFinite { frame });
            }
        }
        Ok(MotionClip {
            skeleton,
            channels,
            frame_time,
            frames,
        })
    }

    /// Encodes poses with a root layout of `Xposition Yposition Zposition Zrotation Yrotation Xrotation`
    /// and `Zrotation Yrotation Xrotation` on every other joint.
    pub fn from_poses(skeleton: Skeleton, poses: &[Pose], frame_time: f64) -> Result<Self, ClipError> {
        use Channel::*;
        let per_joint = (0..skeleton.len())
            .map(|k| {
                if k == 0 {
                    vec![Xposition, Yposition, Zposition, Zrotation, Yrotation, Xrotation]
                } else {
                    vec![Zrotation, Yrotation, Xrotation]
                }
            })
            .collect();
        let channels = ChannelSpec::new(per_joint)?;
        let mut frames = Vec::with_capacity(poses.len());
        for pose in poses {
            pose.validate(&skeleton)?;
            let mut row = Vec::with_capacity(channels.total());
            let t = pose.root_translation;
            row.extend([t.x, t.y, t.z]);
            for q in &pose.local_rotations {
                let (roll, pitch, yaw) = q.euler_angles();
                row.extend([yaw.to_degrees(), pitch.to_degrees(), roll.to_degrees()]);
            }
            frames.push(row);
        }
        MotionClip::new(skeleton, channels, frame_time, frames)
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn channels(&self) -> &ChannelSpec {
        &self.channels
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Local rotations and root translation at `frame`.
    ///
    /// Position channels on non-root joints are kept in the clip but ignored here.
    pub fn pose_at_frame(&self, frame: usize) -> Result<Pose, ClipError> {
        let row = self.frames.get(frame).ok_or(ClipError::FrameIndex {
            frame,
            count: self.frames.len(),
        })?;
        let mut pose = Pose::identity(self.skeleton.len());
        for joint in 0..self.skeleton.len() {
            let base = self.channels.offset(joint);
            let mut q = Quat::identity();
            for (k, &channel) in self.channels.joint(joint).iter().enumerate() {
                let value = row[base + k];
                if channel.is_rotation() {
                    q *= axis_rotation(channel.axis(), value.to_radians());
                } else if joint == 0 {
                    pose.root_translation[channel.axis()] = value;
                }
            }
            pose.local_rotations[joint] = q;
        }
        Ok(pose)
    }

    pub fn poses(&self) -> Vec<Pose> {
        (0..self.frame_count())
            .map(|f| self.pose_at_frame(f).expect("frame in range"))
            .collect()
    }
}

fn axis_rotation(axis: usize, radians: f64) -> Quat {
    let mut v = Vec3::zeros();
    v[axis] = 1.0;
    Quat::from_axis_angle(&nalgebra::Unit::new_unchecked(v), radians)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BvhErrorKind {
    MissingKeyword(&'static str),
    UnexpectedToken { expected: &'static str, found: String },
    UnexpectedEof { expected: &'static str },
    UnbalancedBraces,
    InvalidNumber(String),
    InvalidChannel(String),
    ChannelCount { declared: usize, found: usize },
    DuplicateChannel(String),
    ValueCount { expected: usize, found: usize },
    FrameCountMismatch { declared: usize, found: usize },
    InvalidFrameTime(String),
    NoChannels,
    Skeleton(String),
}

impl fmt::Display for BvhErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use BvhErrorKind::*;
        match self {
            MissingKeyword(k) => write!(f, "missing {k} keyword"),
            UnexpectedToken { expected, found } => write!(f, "expected {expected}, found {found:?}"),
            UnexpectedEof { expected } => write!(f, "unexpected end of input, expected {expected}"),
            UnbalancedBraces => write!(f, "unbalanced braces"),
            InvalidNumber(s) => write!(f, "invalid number {s:?}"),
            InvalidChannel(s) => write!(f, "unknown channel {s:?}"),
            ChannelCount { declared, found } => {
                write!(f, "CHANNELS declares {declared} channels but lists {found}")
            }
            DuplicateChannel(s) => write!(f, "channel {s} listed twice"),
            ValueCount { expected, found } => write!(f, "frame row has {found} values, expected {expected}"),
            FrameCountMismatch { declared, found } => {
                write!(f, "Frames: declares {declared} frames but {found} rows were found")
            }
            InvalidFrameTime(s) => write!(f, "frame time must be positive, got {s}"),
            NoChannels => write!(f, "hierarchy declares no channels"),
            Skeleton(s) => write!(f, "invalid skeleton: {s}"),
        }
    }
}

/// Parse failure with a 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct BvhError {
    pub line: usize,
    pub kind: BvhErrorKind,
}
