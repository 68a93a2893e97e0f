//! The 16-channel hand: channel map, kinematics, quasi-static equilibrium
//! and the thumb-opposition targets.

mod channel;
mod equilibrium;
mod kapandji;
mod kinematics;
mod model;

pub use channel::{ChannelId, ChannelKind, Finger, CHANNEL_COUNT};
pub use equilibrium::{
    hand_equilibrium, joint_equilibrium, joint_residual, mass_for_joint, masses_for_joints,
    rest_masses, ExternalLoad, HandEquilibrium, JointEquilibrium, RESIDUAL_TOLERANCE,
};
pub use kapandji::{
    kapandji_targets, on_ulnar_scaffold, target_finger, KapandjiTarget, CONTACT_TOLERANCE,
    KAPANDJI_LABELS, KAPANDJI_TARGETS,
};
pub use kinematics::{
    check_joints, finger_base_frame, finger_frame_at, fingertip_frame, forward_kinematics,
    thumb_frames, thumb_tip_point, ulnar_scaffold_transform, HandPose, Joints, ThumbFrames,
};
pub use model::{
    Actuator, BellowJoint, HandModel, PalmGeometry, ThumbMount, ThumbSpec,
    BELLOW_REFERENCE_PRESSURE,
};
