//! Forward kinematics of the hand in the palm frame (x distal, y radial,
//! z palmar).

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};

use crate::actuators::arc_endpoint;
use crate::error::{Error, Result};

use super::channel::{ChannelId, Finger, CHANNEL_COUNT};
use super::kapandji::{kapandji_points, KAPANDJI_TARGETS};
use super::model::HandModel;

/// Joint coordinate per channel, rad: bend for compartments, opening for
/// bellows.
pub type Joints = [f64; CHANNEL_COUNT];

#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub joints: Joints,
    /// index, middle, ring, little
    pub fingertips: [Isometry3<f64>; 4],
    pub thumb_tip: Isometry3<f64>,
    pub kapandji_targets: [Point3<f64>; KAPANDJI_TARGETS],
    pub timestamp: f64,
}

impl HandPose {
    pub fn thumb_tip_point(&self) -> Point3<f64> {
        Point3::from(self.thumb_tip.translation.vector)
    }

    pub fn fingertip(&self, f: Finger) -> &Isometry3<f64> {
        &self.fingertips[f.index()]
    }
}

/// Slack on joint limits for values produced by bisection.
const LIMIT_SLACK: f64 = 1e-9;

pub fn check_joints(model: &HandModel, joints: &Joints) -> Result<()> {
    for ch in ChannelId::ALL {
        let q = joints[ch.index()];
        let lim = model.joint_limit(ch);
        if !(q >= -LIMIT_SLACK && q <= lim + LIMIT_SLACK) {
            return Err(Error::domain(format!("joint {q} rad outside [0, {lim}]")).on_channel(ch));
        }
    }
    Ok(())
}

fn axis(v: Vector3<f64>) -> Unit<Vector3<f64>> {
    Unit::new_normalize(v)
}

fn rot(v: Vector3<f64>, angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&axis(v), angle)
}

/// Rigid motion of the ulnar palm scaffold for a palm-bellow opening.
pub fn ulnar_scaffold_transform(model: &HandModel, palm_angle: f64) -> Isometry3<f64> {
    let g = &model.geometry;
    let p = Vector3::from(g.ulnar_axis_point);
    let r = rot(Vector3::from(g.ulnar_axis_dir), palm_angle);
    Translation3::from(p) * r * Translation3::from(-p)
}

fn finger_yaw(f: Finger, joints: &Joints) -> f64 {
    let im = joints[ChannelId::AbductionIndexMiddle.index()];
    let mr = joints[ChannelId::AbductionMiddleRing.index()];
    let rl = joints[ChannelId::AbductionRingLittle.index()];
    match f {
        Finger::Index => im,
        Finger::Middle => 0.0,
        Finger::Ring => -mr,
        Finger::Little => -(mr + rl),
    }
}

/// Frame at the finger base: x along the unbent finger, y radial, z palmar.
pub fn finger_base_frame(model: &HandModel, f: Finger, joints: &Joints) -> Isometry3<f64> {
    let base = Vector3::from(model.geometry.finger_bases[f.index()]);
    let local = Translation3::from(base) * rot(Vector3::z(), finger_yaw(f, joints));
    if f.on_ulnar_scaffold() {
        ulnar_scaffold_transform(model, joints[ChannelId::PalmBellow.index()]) * local
    } else {
        local
    }
}

/// Frame at arc length `s` along the finger's neutral axis.
pub fn finger_frame_at(model: &HandModel, f: Finger, joints: &Joints, s: f64) -> Isometry3<f64> {
    let spec = model.finger(f);
    let (lb, lt) = (spec.base.arc_length, spec.tip.arc_length);
    let bend_b = joints[f.base_channel().index()];
    let bend_t = joints[f.tip_channel().index()];
    let (planar, angle) = if s <= lb {
        let b = bend_b * s / lb;
        (arc_endpoint(s, b), b)
    } else {
        let s2 = (s - lb).min(lt);
        let b2 = bend_t * s2 / lt;
        let pose = crate::actuators::compose_arcs(lb, bend_b, s2, b2);
        (pose.position, pose.angle)
    };
    // planar y (flexion side) maps to palmar z
    let local = Translation3::new(planar.x, 0.0, planar.y) * rot(-Vector3::y(), angle);
    finger_base_frame(model, f, joints) * local
}

pub fn fingertip_frame(model: &HandModel, f: Finger, joints: &Joints) -> Isometry3<f64> {
    finger_frame_at(model, f, joints, model.finger(f).total_length())
}

/// Frames along the thumb chain: after each bellow hinge, and the tip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThumbFrames {
    pub hinges: [Isometry3<f64>; 3],
    pub tip: Isometry3<f64>,
}

/// Thumb chain. Rest direction of the thumb is +y (perpendicular to the
/// fingers). Each hinge axis is x rotated by its mounting angle:
/// proximal about the palm normal, middle and distal about the thumb axis.
pub fn thumb_frames(model: &HandModel, joints: &Joints) -> ThumbFrames {
    let t = &model.thumb;
    let m = t.mount;
    let q = |c: ChannelId| joints[c.index()];

    let h1 = rot(Vector3::z(), m.proximal_deg.to_radians()) * Vector3::x();
    let h2 = rot(Vector3::y(), m.middle_deg.to_radians()) * Vector3::x();
    let h3 = rot(Vector3::y(), m.distal_deg.to_radians()) * Vector3::x();

    let f1 = Translation3::from(Vector3::from(t.base)) * rot(h1, q(ChannelId::ThumbProximal));
    let f2 = f1 * Translation3::new(0.0, t.links[0], 0.0) * rot(h2, q(ChannelId::ThumbMiddle));
    let f3 = f2 * Translation3::new(0.0, t.links[1], 0.0) * rot(h3, q(ChannelId::ThumbDistal));
    let f3_end = f3 * Translation3::new(0.0, t.links[2], 0.0);

    let bend = q(ChannelId::ThumbTip);
    let planar = arc_endpoint(t.tip.arc_length, bend);
    let curl = h3.cross(&Vector3::y());
    let offset = Vector3::y() * planar.x + curl * planar.y;
    let tip = f3_end * Translation3::from(offset) * rot(h3, bend);
    ThumbFrames {
        hinges: [f1, f2, f3],
        tip,
    }
}

pub fn thumb_tip_point(model: &HandModel, joints: &Joints) -> Point3<f64> {
    Point3::from(thumb_frames(model, joints).tip.translation.vector)
}

pub fn forward_kinematics(model: &HandModel, joints: &Joints) -> Result<HandPose> {
    check_joints(model, joints)?;
    Ok(pose_unchecked(model, joints, 0.0))
}

pub(crate) fn pose_unchecked(model: &HandModel, joints: &Joints, timestamp: f64) -> HandPose {
    let joints = joints.map(|q| q.max(0.0));
    HandPose {
        joints,
        fingertips: Finger::ALL.map(|f| fingertip_frame(model, f, &joints)),
        thumb_tip: thumb_frames(model, &joints).tip,
        kapandji_targets: kapandji_points(model, &joints),
        timestamp,
    }
}
