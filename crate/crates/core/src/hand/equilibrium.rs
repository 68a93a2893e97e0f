//! Quasi-static joint equilibrium at fixed air mass.
//!
//! Each channel is mechanically independent. The chamber pressure follows the
//! gas law in the joint-dependent chamber volume, so the actuator torque
//! falls as the joint opens while the hinge spring pushes back harder. The
//! residual is therefore strictly decreasing and bisection brackets the
//! unique root.

use nalgebra::Vector2;

use crate::actuators::{compose_arcs, spring_force};
use crate::error::{Error, Result};
use crate::pneumatics::{mass_at_pressure, R_AIR};

use super::channel::{ChannelId, Finger, CHANNEL_COUNT};
use super::kinematics::{pose_unchecked, HandPose, Joints};
use super::model::{Actuator, HandModel};

/// Residual tolerance of a returned interior solution, N·m.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

const BRACKET_WIDTH: f64 = 1e-13;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointEquilibrium {
    /// rad
    pub joint: f64,
    /// Pa absolute
    pub pressure: f64,
    /// m³
    pub volume: f64,
    /// Actuator torque minus spring and load torque at `joint`, N·m.
    pub residual: f64,
}

/// External load on the hand.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExternalLoad {
    /// Torque opposing each joint, N·m.
    pub torques: [f64; CHANNEL_COUNT],
    /// Fingertip pinned at a point of the finger's bending plane.
    pub tip_constraints: [Option<Vector2<f64>>; 4],
}

impl ExternalLoad {
    pub fn torque(channel: ChannelId, torque: f64) -> Self {
        let mut l = Self::default();
        l.torques[channel.index()] = torque;
        l
    }
}

fn gauge(model: &HandModel, mass: f64, volume: f64) -> (f64, f64) {
    let p = mass * R_AIR * model.temperature / volume;
    (p, (p - model.atmosphere).max(0.0))
}

/// Torque balance of `channel` at joint `q` for a sealed chamber holding `mass`.
pub fn joint_residual(model: &HandModel, channel: ChannelId, mass: f64, load: f64, q: f64) -> f64 {
    let volume = model.chamber_volume(channel, q);
    let (_, g) = gauge(model, mass, volume);
    match model.actuator(channel) {
        Actuator::Bellow(b) => b.bellow.torque_unchecked(g, q) - b.hinge_stiffness * q - load,
        Actuator::Compartment(c) => c.bend_stiffness * (c.pressure_to_bend_gain * g - q) - load,
    }
}

pub fn joint_equilibrium(
    model: &HandModel,
    channel: ChannelId,
    air_mass: f64,
    load: f64,
) -> Result<JointEquilibrium> {
    if !load.is_finite() {
        return Err(Error::domain(format!("non-finite load {load}")).on_channel(channel));
    }
    if !(air_mass >= 0.0) || !air_mass.is_finite() {
        return Err(
            Error::domain(format!("air mass must be non-negative, got {air_mass}"))
                .on_channel(channel),
        );
    }
    if let Actuator::Compartment(c) = model.actuator(channel) {
        if !(c.bend_stiffness > 0.0) {
            return Err(
                Error::domain("compartment bend stiffness must be positive").on_channel(channel)
            );
        }
    }
    let r = |q: f64| joint_residual(model, channel, air_mass, load, q);
    let limit = model.joint_limit(channel);

    let (r_lo, r_hi) = (r(0.0), r(limit));
    let joint = if r_lo <= 0.0 && r_hi <= 0.0 {
        if r_lo.abs() <= r_hi.abs() {
            0.0
        } else {
            limit
        }
    } else if r_lo >= 0.0 && r_hi >= 0.0 {
        if r_hi.abs() <= r_lo.abs() {
            limit
        } else {
            0.0
        }
    } else {
        let (mut lo, mut hi) = (0.0, limit);
        for _ in 0..MAX_BISECTIONS {
            if hi - lo <= BRACKET_WIDTH {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let rm = r(mid);
            if rm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (rm > 0.0) == (r_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let volume = model.chamber_volume(channel, joint);
    let (pressure, _) = gauge(model, air_mass, volume);
    Ok(JointEquilibrium {
        joint,
        pressure,
        volume,
        residual: r(joint),
    })
}

/// Air mass that holds `channel` at joint `q` without external load; the
/// closed-form inverse of [`joint_equilibrium`].
pub fn mass_for_joint(model: &HandModel, channel: ChannelId, q: f64) -> f64 {
    let g = match model.actuator(channel) {
        Actuator::Bellow(b) => {
            if q <= 0.0 {
                0.0
            } else {
                b.hinge_stiffness * q / b.bellow.torque_unchecked(1.0, q)
            }
        }
        Actuator::Compartment(c) => q.max(0.0) / c.pressure_to_bend_gain,
    };
    mass_at_pressure(
        model.atmosphere + g,
        model.chamber_volume(channel, q.max(0.0)),
        model.temperature,
    )
}

pub fn masses_for_joints(model: &HandModel, joints: &Joints) -> [f64; CHANNEL_COUNT] {
    std::array::from_fn(|i| mass_for_joint(model, ChannelId::ALL[i], joints[i]))
}

/// Masses of the fully vented hand at rest.
pub fn rest_masses(model: &HandModel) -> [f64; CHANNEL_COUNT] {
    masses_for_joints(model, &[0.0; CHANNEL_COUNT])
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandEquilibrium {
    pub pose: HandPose,
    /// Pa absolute
    pub pressures: [f64; CHANNEL_COUNT],
    /// m³
    pub volumes: [f64; CHANNEL_COUNT],
    pub residuals: [f64; CHANNEL_COUNT],
    /// Force each constrained fingertip applies to its constraint, N.
    pub tip_forces: [Option<Vector2<f64>>; 4],
}

pub fn hand_equilibrium(
    model: &HandModel,
    masses: &[f64; CHANNEL_COUNT],
    loads: &ExternalLoad,
) -> Result<HandEquilibrium> {
    let mut joints = [0.0; CHANNEL_COUNT];
    let mut pressures = [0.0; CHANNEL_COUNT];
    let mut volumes = [0.0; CHANNEL_COUNT];
    let mut residuals = [0.0; CHANNEL_COUNT];
    for ch in ChannelId::ALL {
        let i = ch.index();
        let eq = joint_equilibrium(model, ch, masses[i], loads.torques[i])?;
        joints[i] = eq.joint;
        pressures[i] = eq.pressure;
        volumes[i] = eq.volume;
        residuals[i] = eq.residual;
    }
    let tip_forces = Finger::ALL.map(|f| {
        loads.tip_constraints[f.index()].map(|c| {
            let spec = model.finger(f);
            let free = compose_arcs(
                spec.base.arc_length,
                joints[f.base_channel().index()],
                spec.tip.arc_length,
                joints[f.tip_channel().index()],
            );
            spring_force(spec, free.position - c)
        })
    });
    Ok(HandEquilibrium {
        pose: pose_unchecked(model, &joints, 0.0),
        pressures,
        volumes,
        residuals,
        tip_forces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pneumatics::mass_at_pressure;

    #[test]
    fn atmospheric_mass_rests_at_zero() {
        let m = HandModel::default();
        for ch in ChannelId::ALL {
            let mass = mass_at_pressure(m.atmosphere, m.chamber_volume(ch, 0.0), m.temperature);
            let eq = joint_equilibrium(&m, ch, mass, 0.0).unwrap();
            assert!(eq.joint < 1e-9, "{ch}: {}", eq.joint);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let m = HandModel::default();
        for ch in ChannelId::ALL {
            for frac in [0.1, 0.5, 0.9] {
                let q = frac * m.joint_limit(ch);
                let eq = joint_equilibrium(&m, ch, mass_for_joint(&m, ch, q), 0.0).unwrap();
                assert!(
                    (eq.joint - q).abs() < 1e-10,
                    "{ch} {frac}: {} vs {q}",
                    eq.joint
                );
                assert!(eq.residual.abs() < RESIDUAL_TOLERANCE);
            }
        }
    }

    #[test]
    fn load_closes_joint() {
        let m = HandModel::default();
        let ch = ChannelId::ThumbDistal;
        let mass = mass_for_joint(&m, ch, 1.0);
        let free = joint_equilibrium(&m, ch, mass, 0.0).unwrap();
        let loaded = joint_equilibrium(&m, ch, mass, 0.2).unwrap();
        assert!(loaded.joint < free.joint);
        assert!(loaded.pressure > free.pressure);
    }

    #[test]
    fn saturates_at_limit() {
        let m = HandModel::default();
        let ch = ChannelId::PalmBellow;
        let eq = joint_equilibrium(&m, ch, 1.0, 0.0).unwrap();
        assert_eq!(eq.joint, m.joint_limit(ch));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = HandModel::default();
        assert!(joint_equilibrium(&m, ChannelId::ThumbTip, 1e-5, f64::NAN).is_err());
        assert!(joint_equilibrium(&m, ChannelId::ThumbTip, -1e-5, 0.0).is_err());
        let mut masses = rest_masses(&m);
        masses[5] = -1.0;
        match hand_equilibrium(&m, &masses, &ExternalLoad::default()) {
            Err(Error::Channel { channel, .. }) => assert_eq!(channel, ChannelId::RingTip),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rest_masses_give_rest_pose() {
        let m = HandModel::default();
        let eq = hand_equilibrium(&m, &rest_masses(&m), &ExternalLoad::default()).unwrap();
        assert!(eq.pose.joints.iter().all(|&q| q < 1e-9));
    }

    #[test]
    fn palm_mass_leaves_radial_fingers_bit_identical() {
        let m = HandModel::default();
        let mut masses = masses_for_joints(
            &m,
            &std::array::from_fn(|i| 0.3 * m.joint_limit(ChannelId::ALL[i])),
        );
        let a = hand_equilibrium(&m, &masses, &ExternalLoad::default()).unwrap();
        masses[ChannelId::PalmBellow.index()] *= 1.4;
        let b = hand_equilibrium(&m, &masses, &ExternalLoad::default()).unwrap();
        assert_eq!(a.pose.fingertips[0], b.pose.fingertips[0]);
        assert_eq!(a.pose.fingertips[1], b.pose.fingertips[1]);
        assert_ne!(a.pose.fingertips[3], b.pose.fingertips[3]);
    }

    #[test]
    fn tip_constraint_reports_force() {
        let m = HandModel::default();
        let masses = masses_for_joints(
            &m,
            &std::array::from_fn(|i| 0.5 * m.joint_limit(ChannelId::ALL[i])),
        );
        let mut loads = ExternalLoad::default();
        let f = m.finger(Finger::Middle);
        loads.tip_constraints[1] = Some(Vector2::new(f.total_length(), 0.0));
        let eq = hand_equilibrium(&m, &masses, &loads).unwrap();
        let force = eq.tip_forces[1].unwrap();
        assert!(force.norm() > 0.0 && force.norm() <= f.max_tip_force + 1e-12);
        assert!(eq.tip_forces[0].is_none());
    }
}
