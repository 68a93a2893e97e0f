use serde::{Deserialize, Serialize};

use crate::actuators::{
    BellowSpec, MomentArmTable, PneuFlexCompartmentSpec, TwoCompartmentFingerSpec,
};
use crate::error::{Error, Result};
use crate::pneumatics::{P_ATM, T_ROOM};

use super::channel::{ChannelId, ChannelKind, Finger, CHANNEL_COUNT};

/// A bellow acting across a living hinge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellowJoint {
    pub bellow: BellowSpec,
    /// N·m/rad
    pub hinge_stiffness: f64,
}

impl BellowJoint {
    /// Chooses the hinge stiffness so free inflation at `gauge` settles at
    /// `opening`.
    pub fn reaching(bellow: BellowSpec, gauge: f64, opening: f64) -> Self {
        let hinge_stiffness = bellow.torque_unchecked(gauge, opening) / opening;
        Self {
            bellow,
            hinge_stiffness,
        }
    }
}

/// Mounting angles of the three thumb bellows, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThumbMount {
    /// Proximal hinge axis, rotated toward radial in the palm plane.
    pub proximal_deg: f64,
    /// Middle hinge, rotated toward dorsal in the plane of its pouches.
    pub middle_deg: f64,
    /// Distal hinge, rotated toward palmar about the thumb's long axis.
    pub distal_deg: f64,
}

impl Default for ThumbMount {
    fn default() -> Self {
        Self {
            proximal_deg: 30.0,
            middle_deg: 90.0,
            distal_deg: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThumbSpec {
    /// proximal, middle, distal
    pub bellows: [BellowJoint; 3],
    pub mount: ThumbMount,
    /// Rigid scaffold segments after each bellow hinge, m.
    pub links: [f64; 3],
    pub tip: PneuFlexCompartmentSpec,
    /// Position of the proximal hinge in the palm frame, m.
    pub base: [f64; 3],
}

/// Palm-frame geometry. Axes: x distal along the fingers, y radial toward the
/// thumb, z palmar (out of the palm). Not measured data: adult-hand-scale
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PalmGeometry {
    /// Knuckle (finger base) positions for index, middle, ring, little.
    pub finger_bases: [[f64; 3]; 4],
    /// A point on the hinge between radial and ulnar palm scaffolds.
    pub ulnar_axis_point: [f64; 3],
    /// Direction of that hinge; positive palm rotation is right-handed about it.
    pub ulnar_axis_dir: [f64; 3],
    /// Lateral half-width of a finger, m.
    pub finger_half_width: f64,
    /// Soft pad thickness on palmar surfaces, m.
    pub pad_thickness: f64,
    /// Distal palmar crease on the ulnar scaffold (flat-hand coordinates).
    pub palmar_crease: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandModel {
    /// index, middle, ring, little
    pub fingers: [TwoCompartmentFingerSpec; 4],
    pub thumb: ThumbSpec,
    pub palm: BellowJoint,
    /// index-middle, middle-ring, ring-little
    pub abduction: [BellowJoint; 3],
    pub geometry: PalmGeometry,
    /// K
    pub temperature: f64,
    /// Pa absolute
    pub atmosphere: f64,
}

/// Gauge pressure at which the default bellows are sized, Pa.
pub const BELLOW_REFERENCE_PRESSURE: f64 = 250e3;

/// The actuator behind a channel.
#[derive(Debug, Clone, Copy)]
pub enum Actuator<'a> {
    Compartment(&'a PneuFlexCompartmentSpec),
    Bellow(&'a BellowJoint),
}

impl HandModel {
    pub fn finger(&self, f: Finger) -> &TwoCompartmentFingerSpec {
        &self.fingers[f.index()]
    }

    pub fn actuator(&self, channel: ChannelId) -> Actuator<'_> {
        match channel.kind() {
            ChannelKind::FingerBase(f) => Actuator::Compartment(&self.fingers[f.index()].base),
            ChannelKind::FingerTip(f) => Actuator::Compartment(&self.fingers[f.index()].tip),
            ChannelKind::ThumbBellow(i) => Actuator::Bellow(&self.thumb.bellows[i]),
            ChannelKind::ThumbTip => Actuator::Compartment(&self.thumb.tip),
            ChannelKind::Palm => Actuator::Bellow(&self.palm),
            ChannelKind::Abduction(i) => Actuator::Bellow(&self.abduction[i]),
        }
    }

    /// The bellow behind `channel`, if it is one.
    pub fn bellow_mut(&mut self, channel: ChannelId) -> Option<&mut BellowJoint> {
        match channel.kind() {
            ChannelKind::ThumbBellow(i) => Some(&mut self.thumb.bellows[i]),
            ChannelKind::Palm => Some(&mut self.palm),
            ChannelKind::Abduction(i) => Some(&mut self.abduction[i]),
            _ => None,
        }
    }

    /// Upper joint limit of a channel, rad.
    pub fn joint_limit(&self, channel: ChannelId) -> f64 {
        match self.actuator(channel) {
            Actuator::Compartment(c) => c.max_free_bend(),
            Actuator::Bellow(b) => b.bellow.max_opening,
        }
    }

    pub fn joint_limits(&self) -> [f64; CHANNEL_COUNT] {
        ChannelId::ALL.map(|c| self.joint_limit(c))
    }

    /// Highest gauge pressure the channel's actuator is rated for, Pa.
    pub fn max_gauge(&self, channel: ChannelId) -> f64 {
        match self.actuator(channel) {
            Actuator::Compartment(c) => c.max_pressure,
            Actuator::Bellow(b) => b.bellow.max_pressure,
        }
    }

    /// Chamber volume of `channel` at joint coordinate `joint`, m³.
    pub fn chamber_volume(&self, channel: ChannelId, joint: f64) -> f64 {
        match self.actuator(channel) {
            Actuator::Compartment(c) => crate::actuators::compartment_volume(c, joint),
            Actuator::Bellow(b) => b.bellow.chamber_volume(joint),
        }
    }

    pub fn rest_volumes(&self) -> [f64; CHANNEL_COUNT] {
        ChannelId::ALL.map(|c| self.chamber_volume(c, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.fingers {
            f.base.validate()?;
            f.tip.validate()?;
            if !(f.tip_stiffness > 0.0 && f.max_tip_force > 0.0) {
                return Err(Error::domain("finger force model must be positive"));
            }
        }
        let little = self.fingers[Finger::Little.index()].total_length();
        if self.fingers[..3].iter().any(|f| f.total_length() <= little) {
            return Err(Error::domain(
                "little finger must be shorter than the other fingers",
            ));
        }
        self.thumb.tip.validate()?;
        for b in self
            .thumb
            .bellows
            .iter()
            .chain(&self.abduction)
            .chain(std::iter::once(&self.palm))
        {
            b.bellow.validate()?;
            if !(b.hinge_stiffness > 0.0) {
                return Err(Error::domain("hinge stiffness must be positive"));
            }
        }
        let axis = nalgebra::Vector3::from(self.geometry.ulnar_axis_dir);
        if !(axis.norm() > 0.0) {
            return Err(Error::domain("ulnar axis direction must be non-zero"));
        }
        if !(self.temperature > 0.0 && self.atmosphere > 0.0) {
            return Err(Error::domain("temperature and atmosphere must be positive"));
        }
        Ok(())
    }
}

fn deg(d: f64) -> f64 {
    d.to_radians()
}

impl Default for HandModel {
    fn default() -> Self {
        let long_finger = TwoCompartmentFingerSpec::calibrated(
            PneuFlexCompartmentSpec::with_max_bend(0.050, deg(90.0), 250e3),
            PneuFlexCompartmentSpec::with_max_bend(0.045, deg(110.0), 250e3),
            8.3,
        );
        let little = TwoCompartmentFingerSpec::calibrated(
            PneuFlexCompartmentSpec::with_max_bend(0.040, deg(90.0), 250e3),
            PneuFlexCompartmentSpec::with_max_bend(0.035, deg(110.0), 250e3),
            8.3,
        );

        // Common arm profile; pouch areas set the 20°/250 kPa torques to
        // 4.4, 3.2 and 1.9 N·m.
        let arms = MomentArmTable::default();
        let arm20 = arms.arm(deg(20.0));
        let thumb_bellow = |torque: f64, pouches: u32| {
            let b = BellowSpec::new(
                torque / (BELLOW_REFERENCE_PRESSURE * arm20),
                pouches,
                deg(100.0),
            );
            BellowJoint::reaching(b, BELLOW_REFERENCE_PRESSURE, deg(90.0))
        };
        let palm = BellowJoint::reaching(BellowSpec::new(5.0e-4, 2, deg(30.0)), 200e3, deg(30.0));
        let abduction =
            || BellowJoint::reaching(BellowSpec::new(2.0e-4, 2, deg(20.0)), 150e3, deg(20.0));

        Self {
            fingers: [long_finger, long_finger, long_finger, little],
            thumb: ThumbSpec {
                bellows: [
                    thumb_bellow(4.4, 3),
                    thumb_bellow(3.2, 2),
                    thumb_bellow(1.9, 2),
                ],
                mount: ThumbMount::default(),
                links: [0.015, 0.050, 0.030],
                tip: PneuFlexCompartmentSpec::with_max_bend(0.045, deg(120.0), 250e3),
                base: [0.030, 0.035, 0.005],
            },
            palm,
            abduction: [abduction(), abduction(), abduction()],
            geometry: PalmGeometry {
                finger_bases: [
                    [0.095, 0.028, 0.0],
                    [0.100, 0.009, 0.0],
                    [0.095, -0.010, 0.0],
                    [0.085, -0.028, 0.0],
                ],
                ulnar_axis_point: [0.020, 0.0, 0.0],
                ulnar_axis_dir: [-1.0, -0.15, 0.0],
                finger_half_width: 0.009,
                pad_thickness: 0.008,
                palmar_crease: [0.070, -0.015, 0.0],
            },
            temperature: T_ROOM,
            atmosphere: P_ATM,
        }
    }
}
