//! The shipped posture library: 33 taxonomy grasps, the ten Kapandji
//! postures and three in-hand rotation synergies.

use serde::{Deserialize, Serialize};

use crate::control::{MassTrajectory, TrajectorySample};
use crate::error::{Error, Result};
use crate::hand::{
    masses_for_joints, rest_masses, ChannelId, HandModel, Joints, CHANNEL_COUNT, KAPANDJI_TARGETS,
};

use super::authoring::author_kapandji;

/// Grasp types by taxonomy id.
pub const TAXONOMY: [(u8, &str); 33] = [
    (1, "Large Diameter"),
    (2, "Small Diameter"),
    (3, "Medium Wrap"),
    (4, "Adducted Thumb"),
    (5, "Light Tool"),
    (6, "Prismatic 4 Finger"),
    (7, "Prismatic 3 Finger"),
    (8, "Prismatic 2 Finger"),
    (9, "Palmar Pinch"),
    (10, "Power Disk"),
    (11, "Power Sphere"),
    (12, "Precision Disk"),
    (13, "Precision Sphere"),
    (14, "Tripod"),
    (15, "Fixed Hook"),
    (16, "Lateral"),
    (17, "Index Finger Extension"),
    (18, "Extension Type"),
    (19, "Distal Type"),
    (20, "Writing Tripod"),
    (21, "Tripod Variation"),
    (22, "Parallel Extension"),
    (23, "Adduction Grip"),
    (24, "Tip Pinch"),
    (25, "Lateral Tripod"),
    (26, "Sphere 4 Finger"),
    (27, "Quadpod"),
    (28, "Sphere 3 Finger"),
    (29, "Stick"),
    (30, "Palmar"),
    (31, "Ring"),
    (32, "Ventral"),
    (33, "Inferior Pincer"),
];

/// In-hand rotation synergies, named by rotation axis.
pub const IN_HAND_SYNERGIES: [&str; 3] = ["proximal-distal", "dorsal-palmar", "radial-ulnar"];

/// Seconds from rest until a posture's setpoints are applied.
const ONSET: f64 = 0.1;
/// Seconds per half cycle of an in-hand rotation.
const HALF_CYCLE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryKind {
    Taxonomy {
        id: u8,
    },
    Kapandji {
        target: u8,
    },
    InHand,
    /// Recorded by an operator.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub kind: EntryKind,
    pub trajectory: MassTrajectory,
}

impl LibraryEntry {
    pub fn name(&self) -> &str {
        &self.trajectory.name
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PostureLibrary {
    pub entries: Vec<LibraryEntry>,
}

pub fn kapandji_name(target: usize) -> String {
    format!("Kapandji {target}")
}

pub fn in_hand_name(axis: &str) -> String {
    format!("Rotate {axis}")
}

/// Posture as fractions of each joint's range.
#[derive(Debug, Clone, Copy)]
struct Shape {
    /// (base, tip) per finger: index, middle, ring, little
    fingers: [(f64, f64); 4],
    /// proximal, middle, distal, tip
    thumb: [f64; 4],
    palm: f64,
    /// index-middle, middle-ring, ring-little
    spread: [f64; 3],
}

impl Shape {
    const fn new(fingers: [(f64, f64); 4], thumb: [f64; 4], palm: f64, spread: [f64; 3]) -> Self {
        Self {
            fingers,
            thumb,
            palm,
            spread,
        }
    }

    fn joints(&self, model: &HandModel) -> Joints {
        let mut frac = [0.0; CHANNEL_COUNT];
        for (k, (b, t)) in self.fingers.iter().enumerate() {
            frac[2 * k] = *b;
            frac[2 * k + 1] = *t;
        }
        frac[8..12].copy_from_slice(&self.thumb);
        frac[12] = self.palm;
        frac[13..16].copy_from_slice(&self.spread);
        std::array::from_fn(|i| frac[i].clamp(0.0, 1.0) * model.joint_limit(ChannelId::ALL[i]))
    }
}

const fn same(b: f64, t: f64) -> [(f64, f64); 4] {
    [(b, t); 4]
}

const NO_SPREAD: [f64; 3] = [0.0; 3];

const TAXONOMY_SHAPES: [Shape; 33] = [
    Shape::new(same(0.45, 0.35), [0.6, 0.3, 0.3, 0.3], 0.3, NO_SPREAD),
    Shape::new(same(0.8, 0.7), [0.7, 0.4, 0.5, 0.5], 0.5, NO_SPREAD),
    Shape::new(same(0.65, 0.5), [0.65, 0.35, 0.4, 0.4], 0.4, NO_SPREAD),
    Shape::new(same(0.7, 0.6), [0.1, 0.1, 0.2, 0.1], 0.4, NO_SPREAD),
    Shape::new(
        [(0.5, 0.4), (0.75, 0.6), (0.75, 0.6), (0.75, 0.6)],
        [0.3, 0.2, 0.3, 0.2],
        0.3,
        NO_SPREAD,
    ),
    Shape::new(same(0.5, 0.1), [0.8, 0.5, 0.3, 0.2], 0.1, NO_SPREAD),
    Shape::new(
        [(0.5, 0.1), (0.5, 0.1), (0.5, 0.1), (0.1, 0.0)],
        [0.8, 0.5, 0.3, 0.2],
        0.1,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.5, 0.1), (0.5, 0.1), (0.0, 0.0), (0.0, 0.0)],
        [0.8, 0.5, 0.3, 0.2],
        0.0,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.4, 0.3), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
        [0.7, 0.4, 0.5, 0.3],
        0.0,
        NO_SPREAD,
    ),
    Shape::new(same(0.5, 0.3), [0.7, 0.5, 0.3, 0.2], 0.6, [0.6, 0.6, 0.6]),
    Shape::new(
        same(0.55, 0.45),
        [0.75, 0.45, 0.45, 0.35],
        0.7,
        [0.5, 0.5, 0.5],
    ),
    Shape::new(same(0.3, 0.2), [0.8, 0.6, 0.2, 0.1], 0.5, [0.8, 0.8, 0.8]),
    Shape::new(same(0.35, 0.3), [0.8, 0.5, 0.3, 0.2], 0.6, [0.5, 0.5, 0.5]),
    Shape::new(
        [(0.45, 0.35), (0.45, 0.35), (0.1, 0.1), (0.1, 0.1)],
        [0.8, 0.5, 0.4, 0.3],
        0.2,
        NO_SPREAD,
    ),
    Shape::new(same(0.1, 0.8), [0.0, 0.0, 0.0, 0.0], 0.0, NO_SPREAD),
    Shape::new(same(0.6, 0.6), [0.1, 0.4, 0.3, 0.3], 0.2, NO_SPREAD),
    Shape::new(
        [(0.1, 0.05), (0.8, 0.7), (0.8, 0.7), (0.8, 0.7)],
        [0.4, 0.2, 0.3, 0.3],
        0.3,
        NO_SPREAD,
    ),
    Shape::new(same(0.2, 0.0), [0.9, 0.7, 0.2, 0.0], 0.2, [0.3, 0.3, 0.3]),
    Shape::new(
        [(0.2, 0.1), (0.2, 0.1), (0.7, 0.7), (0.7, 0.7)],
        [0.5, 0.5, 0.4, 0.3],
        0.3,
        [0.4, 0.0, 0.0],
    ),
    Shape::new(
        [(0.4, 0.2), (0.5, 0.4), (0.7, 0.7), (0.7, 0.7)],
        [0.7, 0.4, 0.5, 0.4],
        0.3,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.3, 0.3), (0.3, 0.2), (0.6, 0.6), (0.6, 0.6)],
        [0.4, 0.5, 0.4, 0.4],
        0.3,
        [0.2, 0.0, 0.0],
    ),
    Shape::new(same(0.5, 0.0), [0.5, 0.6, 0.1, 0.0], 0.1, NO_SPREAD),
    Shape::new(
        [(0.05, 0.05), (0.05, 0.05), (0.7, 0.7), (0.7, 0.7)],
        [0.3, 0.2, 0.3, 0.3],
        0.3,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.55, 0.6), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
        [0.7, 0.3, 0.6, 0.5],
        0.0,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.6, 0.6), (0.55, 0.5), (0.8, 0.8), (0.8, 0.8)],
        [0.2, 0.4, 0.4, 0.4],
        0.4,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.5, 0.4), (0.5, 0.4), (0.5, 0.4), (0.2, 0.2)],
        [0.75, 0.45, 0.4, 0.3],
        0.5,
        [0.5, 0.5, 0.3],
    ),
    Shape::new(
        [(0.45, 0.4), (0.45, 0.4), (0.45, 0.4), (0.1, 0.1)],
        [0.8, 0.5, 0.45, 0.35],
        0.4,
        [0.3, 0.3, 0.0],
    ),
    Shape::new(
        [(0.5, 0.4), (0.5, 0.4), (0.15, 0.15), (0.15, 0.15)],
        [0.7, 0.45, 0.4, 0.3],
        0.3,
        [0.5, 0.2, 0.0],
    ),
    Shape::new(
        [(0.5, 0.4), (0.7, 0.5), (0.7, 0.5), (0.7, 0.5)],
        [0.2, 0.1, 0.5, 0.5],
        0.3,
        NO_SPREAD,
    ),
    Shape::new(same(0.25, 0.05), [0.4, 0.1, 0.1, 0.0], 0.2, NO_SPREAD),
    Shape::new(
        [(0.5, 0.5), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
        [0.6, 0.3, 0.5, 0.5],
        0.0,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.3, 0.0), (0.7, 0.6), (0.7, 0.6), (0.7, 0.6)],
        [0.3, 0.1, 0.2, 0.1],
        0.3,
        NO_SPREAD,
    ),
    Shape::new(
        [(0.5, 0.7), (0.1, 0.1), (0.1, 0.1), (0.1, 0.1)],
        [0.6, 0.2, 0.4, 0.3],
        0.1,
        NO_SPREAD,
    ),
];

/// The two alternating postures of each in-hand rotation.
fn in_hand_shapes(axis: &str) -> (Shape, Shape) {
    let thumb = [0.75, 0.45, 0.4, 0.3];
    match axis {
        "proximal-distal" => (
            Shape::new(
                [(0.3, 0.3), (0.4, 0.3), (0.4, 0.3), (0.6, 0.5)],
                thumb,
                0.5,
                [0.3, 0.3, 0.3],
            ),
            Shape::new(
                [(0.6, 0.5), (0.4, 0.3), (0.4, 0.3), (0.3, 0.3)],
                thumb,
                0.5,
                [0.3, 0.3, 0.3],
            ),
        ),
        "dorsal-palmar" => (
            Shape::new(
                [(0.3, 0.2), (0.6, 0.5), (0.4, 0.3), (0.4, 0.3)],
                thumb,
                0.5,
                [0.3, 0.3, 0.3],
            ),
            Shape::new(
                [(0.6, 0.5), (0.3, 0.2), (0.4, 0.3), (0.4, 0.3)],
                thumb,
                0.5,
                [0.3, 0.3, 0.3],
            ),
        ),
        _ => (
            Shape::new(
                [(0.6, 0.3), (0.6, 0.3), (0.6, 0.3), (0.6, 0.3)],
                [0.75, 0.2, 0.4, 0.6],
                0.5,
                [0.3, 0.3, 0.3],
            ),
            Shape::new(
                [(0.3, 0.3), (0.3, 0.3), (0.3, 0.3), (0.3, 0.3)],
                [0.75, 0.6, 0.4, 0.2],
                0.5,
                [0.3, 0.3, 0.3],
            ),
        ),
    }
}

fn posture(name: String, model: &HandModel, joints: &Joints) -> Result<MassTrajectory> {
    MassTrajectory::step(
        name,
        rest_masses(model),
        masses_for_joints(model, joints),
        ONSET,
    )
}

impl PostureLibrary {
    /// Authors the default library for `model`.
    pub fn default_for(model: &HandModel) -> Result<Self> {
        model.validate()?;
        let mut entries =
            Vec::with_capacity(TAXONOMY.len() + KAPANDJI_TARGETS + IN_HAND_SYNERGIES.len());
        for ((id, name), shape) in TAXONOMY.iter().zip(&TAXONOMY_SHAPES) {
            entries.push(LibraryEntry {
                kind: EntryKind::Taxonomy { id: *id },
                trajectory: posture(name.to_string(), model, &shape.joints(model))?,
            });
        }
        let kapandji =
            crate::par::map_range(crate::par::Execution::Parallel, KAPANDJI_TARGETS, |i| {
                author_kapandji(model, i + 1)
            });
        for (i, sol) in kapandji.iter().enumerate() {
            entries.push(LibraryEntry {
                kind: EntryKind::Kapandji {
                    target: i as u8 + 1,
                },
                trajectory: posture(kapandji_name(i + 1), model, &sol.joints)?,
            });
        }
        for axis in IN_HAND_SYNERGIES {
            let (a, b) = in_hand_shapes(axis);
            let (ma, mb) = (
                masses_for_joints(model, &a.joints(model)),
                masses_for_joints(model, &b.joints(model)),
            );
            let mut samples = vec![TrajectorySample {
                t: 0.0,
                m: rest_masses(model),
            }];
            for k in 0..5 {
                samples.push(TrajectorySample {
                    t: ONSET + k as f64 * HALF_CYCLE,
                    m: if k % 2 == 0 { ma } else { mb },
                });
            }
            entries.push(LibraryEntry {
                kind: EntryKind::InHand,
                trajectory: MassTrajectory::new(in_hand_name(axis), samples)?,
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| e.name() == name)
    }

    pub fn require(&self, name: &str) -> Result<&LibraryEntry> {
        self.get(name)
            .ok_or_else(|| Error::UnknownEntry(name.to_string()))
    }

    /// Adds `entry`, replacing any entry of the same name.
    pub fn insert(&mut self, entry: LibraryEntry) {
        match self.entries.iter_mut().find(|e| e.name() == entry.name()) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn kapandji(&self, target: usize) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| {
            e.kind
                == EntryKind::Kapandji {
                    target: target as u8,
                }
        })
    }

    pub fn taxonomy(&self) -> impl Iterator<Item = &LibraryEntry> {
        self.entries
            .iter()
            .filter(|e| matches!(e.kind, EntryKind::Taxonomy { .. }))
    }

    pub fn taxonomy_by_name(&self, name: &str) -> Option<&LibraryEntry> {
        self.taxonomy().find(|e| e.name() == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_library_shape() {
        let m = HandModel::default();
        let lib = PostureLibrary::default_for(&m).unwrap();
        assert_eq!(lib.len(), 46);
        assert_eq!(lib.taxonomy().count(), 33);
        assert!((1..=10).all(|n| lib.kapandji(n).is_some()));
        let mut names = lib.names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 46);
        assert!(lib.get("Power Sphere").is_some());
        assert!(matches!(lib.require("nope"), Err(Error::UnknownEntry(_))));
    }

    #[test]
    fn taxonomy_shapes_within_unit_range() {
        for s in &TAXONOMY_SHAPES {
            let all = s
                .fingers
                .iter()
                .flat_map(|(a, b)| [*a, *b])
                .chain(s.thumb)
                .chain([s.palm])
                .chain(s.spread);
            for v in all {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
