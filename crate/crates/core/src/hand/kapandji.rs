//! The ten thumb-opposition targets, attached to the posed hand.

use nalgebra::{Point3, Vector3};

use super::channel::{ChannelId, Finger};
use super::kinematics::{finger_frame_at, ulnar_scaffold_transform, Joints};
use super::model::HandModel;

pub const KAPANDJI_TARGETS: usize = 10;

/// Thumb-tip-to-target distance that counts as a touch, m.
pub const CONTACT_TOLERANCE: f64 = 0.005;

pub const KAPANDJI_LABELS: [&str; KAPANDJI_TARGETS] = [
    "index proximal phalanx, radial side",
    "index middle phalanx, radial side",
    "index tip",
    "middle tip",
    "ring tip",
    "little tip",
    "little distal crease",
    "little middle crease",
    "little base",
    "distal palmar crease",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KapandjiTarget {
    /// 1-based position in the test sequence.
    pub number: usize,
    pub label: &'static str,
    pub point: Point3<f64>,
    /// Outward surface normal at the target.
    pub normal: Vector3<f64>,
}

/// Where a target sits on the hand.
#[derive(Debug, Clone, Copy)]
enum Anchor {
    /// Arc length fraction along the finger, lateral (radial) and palmar offsets in units of
    /// half-width and pad thickness.
    Finger {
        finger: Finger,
        s: f64,
        radial: f64,
        palmar: f64,
    },
    PalmCrease,
}

const ANCHORS: [Anchor; KAPANDJI_TARGETS] = {
    use Finger::*;
    [
        Anchor::Finger {
            finger: Index,
            s: 0.25,
            radial: 1.0,
            palmar: 0.0,
        },
        Anchor::Finger {
            finger: Index,
            s: 0.70,
            radial: 1.0,
            palmar: 0.0,
        },
        Anchor::Finger {
            finger: Index,
            s: 1.0,
            radial: 0.0,
            palmar: 0.0,
        },
        Anchor::Finger {
            finger: Middle,
            s: 1.0,
            radial: 0.0,
            palmar: 0.0,
        },
        Anchor::Finger {
            finger: Ring,
            s: 1.0,
            radial: 0.0,
            palmar: 0.0,
        },
        Anchor::Finger {
            finger: Little,
            s: 1.0,
            radial: 0.0,
            palmar: 0.0,
        },
        Anchor::Finger {
            finger: Little,
            s: 0.75,
            radial: 0.0,
            palmar: 1.0,
        },
        Anchor::Finger {
            finger: Little,
            s: 0.53,
            radial: 0.0,
            palmar: 1.0,
        },
        Anchor::Finger {
            finger: Little,
            s: 0.08,
            radial: 0.0,
            palmar: 1.0,
        },
        Anchor::PalmCrease,
    ]
};

/// Finger whose posture moves the target, if any.
pub fn target_finger(number: usize) -> Option<Finger> {
    match ANCHORS[number - 1] {
        Anchor::Finger { finger, .. } => Some(finger),
        Anchor::PalmCrease => None,
    }
}

/// Whether the target rides on the ulnar palm scaffold.
pub fn on_ulnar_scaffold(number: usize) -> bool {
    target_finger(number).is_none_or(Finger::on_ulnar_scaffold)
}

pub fn kapandji_targets(model: &HandModel, joints: &Joints) -> [KapandjiTarget; KAPANDJI_TARGETS] {
    let g = &model.geometry;
    std::array::from_fn(|i| {
        let (point, normal) = match ANCHORS[i] {
            Anchor::Finger {
                finger,
                s,
                radial,
                palmar,
            } => {
                let frame = finger_frame_at(
                    model,
                    finger,
                    joints,
                    s * model.finger(finger).total_length(),
                );
                let local =
                    Vector3::new(0.0, radial * g.finger_half_width, palmar * g.pad_thickness);
                let normal = if radial > 0.0 {
                    Vector3::y()
                } else if palmar > 0.0 {
                    Vector3::z()
                } else {
                    Vector3::x()
                };
                (frame * Point3::from(local), frame.rotation * normal)
            }
            Anchor::PalmCrease => {
                let t = ulnar_scaffold_transform(model, joints[ChannelId::PalmBellow.index()]);
                let flat =
                    Point3::from(Vector3::from(g.palmar_crease) + Vector3::z() * g.pad_thickness);
                (t * flat, t.rotation * Vector3::z())
            }
        };
        KapandjiTarget {
            number: i + 1,
            label: KAPANDJI_LABELS[i],
            point,
            normal,
        }
    })
}

pub(crate) fn kapandji_points(
    model: &HandModel,
    joints: &Joints,
) -> [Point3<f64>; KAPANDJI_TARGETS] {
    kapandji_targets(model, joints).map(|t| t.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::kinematics::forward_kinematics;
    use crate::hand::CHANNEL_COUNT;

    #[test]
    fn flat_pose_targets_inside_hand_box() {
        let m = HandModel::default();
        let q = [0.0; CHANNEL_COUNT];
        let pose = forward_kinematics(&m, &q).unwrap();
        let mut pts: Vec<Point3<f64>> = pose
            .fingertips
            .iter()
            .map(|t| Point3::from(t.translation.vector))
            .collect();
        pts.extend(
            m.geometry
                .finger_bases
                .iter()
                .map(|b| Point3::from(Vector3::from(*b))),
        );
        let lo = pts
            .iter()
            .fold(Vector3::repeat(f64::INFINITY), |a, p| a.inf(&p.coords));
        let hi = pts
            .iter()
            .fold(Vector3::repeat(f64::NEG_INFINITY), |a, p| a.sup(&p.coords));
        let margin = Vector3::new(0.0, m.geometry.finger_half_width, m.geometry.pad_thickness)
            + Vector3::repeat(1e-12);
        for t in kapandji_targets(&m, &q) {
            let p = t.point.coords;
            assert!(p.x >= 0.0 && p.x <= hi.x, "target {}", t.number);
            assert!(
                p.y >= lo.y - margin.y && p.y <= hi.y + margin.y,
                "target {}",
                t.number
            );
            assert!(p.z >= -margin.z && p.z <= margin.z, "target {}", t.number);
        }
    }

    #[test]
    fn target_three_is_index_tip() {
        let m = HandModel::default();
        let q = [0.0; CHANNEL_COUNT];
        let pose = forward_kinematics(&m, &q).unwrap();
        let t = kapandji_targets(&m, &q);
        assert!(
            (t[2].point.coords - pose.fingertip(Finger::Index).translation.vector).norm() < 1e-15
        );
    }

    #[test]
    fn ulnar_targets_move_rigidly_with_palm() {
        let m = HandModel::default();
        let flat = [0.0; CHANNEL_COUNT];
        let mut q = flat;
        q[ChannelId::PalmBellow.index()] = 0.4;
        let a = kapandji_targets(&m, &flat);
        let b = kapandji_targets(&m, &q);
        let t = ulnar_scaffold_transform(&m, 0.4);
        for i in 0..KAPANDJI_TARGETS {
            if i >= 4 {
                assert!(on_ulnar_scaffold(i + 1));
                assert!((t * a[i].point - b[i].point).norm() < 1e-12);
                assert!((a[i].point - b[i].point).norm() > 1e-3);
            } else {
                assert_eq!(a[i].point, b[i].point);
            }
        }
    }
}
