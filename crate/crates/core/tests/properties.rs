//! Property suites over the pneumatic, actuator, hand and file layers.

mod common;

use std::io::Cursor;
use std::path::Path;

use nalgebra::Vector2;
use pneumahand::actuators::{
    bellow_torque, finger_free_pose, fingertip_force, fit_moment_arm, BellowSpec, CalibrationRow,
    CalibrationTable, MomentArmTable, PneuFlexCompartmentSpec, TwoCompartmentFingerSpec,
};
use pneumahand::control::{replay, MassTrajectory, TrajectorySample};
use pneumahand::hand::{
    forward_kinematics, joint_equilibrium, ChannelId, HandModel, CHANNEL_COUNT,
};
use pneumahand::interface::{read_trajectory, write_trajectory};
use pneumahand::pneumatics::{
    chamber_pressure, mass_at_pressure, step_plant, ChamberState, PlantConfig, Valve, ValveBank,
    R_AIR,
};
use proptest::prelude::*;

use common::BELLOWS;

fn finger() -> TwoCompartmentFingerSpec {
    TwoCompartmentFingerSpec::calibrated(
        PneuFlexCompartmentSpec::with_max_bend(0.05, std::f64::consts::FRAC_PI_2, 250e3),
        PneuFlexCompartmentSpec::with_max_bend(0.04, std::f64::consts::FRAC_PI_2, 250e3),
        8.3,
    )
}

fn bellow_channel() -> impl Strategy<Value = ChannelId> {
    prop::sample::select(BELLOWS.to_vec())
}

fn any_channel() -> impl Strategy<Value = ChannelId> {
    prop::sample::select(ChannelId::ALL.to_vec())
}

/// Strictly increasing angles (deg) with positive non-increasing arms (m).
fn arm_table() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(5.0f64..25.0, n),
            0.01f64..0.04,
            prop::collection::vec(0.0f64..0.2, n),
        )
            .prop_map(|(gaps, arm0, drops)| {
                let mut deg = 0.0;
                let mut arm = arm0;
                gaps.iter()
                    .zip(drops)
                    .map(|(g, d)| {
                        let row = (deg, arm);
                        deg += g;
                        arm *= 1.0 - d;
                        row
                    })
                    .collect()
            })
    })
}

proptest! {
    #[test]
    fn gas_law_round_trips(m in 0.0f64..1e-3, v in 1e-7f64..1e-3, t in 250.0f64..350.0) {
        let p = chamber_pressure(m, v, t).unwrap();
        prop_assert!((p - m * R_AIR * t / v).abs() <= 1e-12 * p.max(1.0));
        let back = mass_at_pressure(p, v, t);
        prop_assert!((back - m).abs() <= 1e-12 * m.max(1e-12));
    }

    #[test]
    fn closed_valves_keep_mass_through_volume_changes(
        masses in prop::array::uniform16(0.0f64..2e-4),
        v0 in prop::array::uniform16(1e-6f64..1e-4),
        v1 in prop::array::uniform16(1e-6f64..1e-4),
    ) {
        let cfg = PlantConfig::default();
        let chambers: [ChamberState; CHANNEL_COUNT] =
            std::array::from_fn(|i| ChamberState::new(masses[i], v0[i], cfg.temperature).unwrap());
        let next = step_plant(&chambers, &ValveBank::new(300.0), &v1, &cfg, 1.0 / 1200.0).unwrap();
        for i in 0..CHANNEL_COUNT {
            prop_assert_eq!(next[i].mass.to_bits(), masses[i].to_bits());
            prop_assert_eq!(next[i].volume, v1[i]);
        }
    }

    #[test]
    fn masses_stay_non_negative(
        masses in prop::array::uniform16(0.0f64..1e-5),
        open in prop::array::uniform16(0u8..4),
        dt in 1e-4f64..10.0,
    ) {
        let cfg = PlantConfig::default();
        let chambers: [ChamberState; CHANNEL_COUNT] =
            std::array::from_fn(|i| ChamberState::new(masses[i], 2e-5, cfg.temperature).unwrap());
        let mut valves = ValveBank::new(300.0);
        for (ch, o) in ChannelId::ALL.iter().zip(open) {
            valves.command(*ch, Valve::Inflate, o & 1 == 1, 0.0);
            valves.command(*ch, Valve::Vent, o & 2 == 2, 0.0);
        }
        let next = step_plant(&chambers, &valves, &[2e-5; CHANNEL_COUNT], &cfg, dt).unwrap();
        prop_assert!(next.iter().all(|c| c.mass >= 0.0 && c.pressure >= 0.0));
    }

    #[test]
    fn valve_switches_respect_rate_limit(
        requests in prop::collection::vec((0.0f64..0.02, any::<bool>(), any::<bool>()), 1..200),
    ) {
        let mut bank = ValveBank::new(300.0);
        let mut now = 0.0;
        let mut last: [Option<f64>; 2] = [None, None];
        for (gap, inflate, open) in requests {
            now += gap;
            let valve = if inflate { Valve::Inflate } else { Valve::Vent };
            let slot = usize::from(!inflate);
            let before = bank.is_open(ChannelId::IndexBase, valve);
            let after = bank.command(ChannelId::IndexBase, valve, open, now);
            if before != after {
                if let Some(t) = last[slot] {
                    prop_assert!(now - t >= 1.0 / 300.0 - 1e-9);
                }
                last[slot] = Some(now);
            }
        }
    }

    #[test]
    fn bellow_torque_linear_in_pressure_and_area(
        p in 0.0f64..150e3,
        area in 1e-4f64..1e-3,
        k in 0.1f64..3.0,
        angle in 0.0f64..1.5,
    ) {
        let spec = BellowSpec::new(area, 2, 1.6);
        let tau = bellow_torque(&spec, p, angle).unwrap();
        let tau2 = bellow_torque(&spec, 2.0 * p, angle).unwrap();
        prop_assert!((tau2 - 2.0 * tau).abs() <= 1e-12 * tau.abs().max(1e-12));
        let scaled = BellowSpec::new(area * k, 2, 1.6);
        let tau_k = bellow_torque(&scaled, p, angle).unwrap();
        prop_assert!((tau_k - k * tau).abs() <= 1e-12 * tau.abs().max(1e-12));
    }

    #[test]
    fn bellow_torque_non_increasing_in_angle(p in 0.0f64..300e3, a in 0.0f64..1.6, b in 0.0f64..1.6) {
        let spec = BellowSpec::new(4e-4, 2, 1.6);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bellow_torque(&spec, p, hi).unwrap() <= bellow_torque(&spec, p, lo).unwrap());
    }

    #[test]
    fn finger_pose_is_continuous(
        pb in 0.0f64..250e3,
        pt in 0.0f64..250e3,
        db in -1e3f64..1e3,
        dt in -1e3f64..1e3,
    ) {
        let spec = finger();
        let (pb2, pt2) = ((pb + db).clamp(0.0, 250e3), (pt + dt).clamp(0.0, 250e3));
        let a = finger_free_pose(&spec, pb, pt).unwrap();
        let b = finger_free_pose(&spec, pb2, pt2).unwrap();
        let dbend = spec.base.pressure_to_bend_gain * (pb2 - pb).abs() + spec.tip.pressure_to_bend_gain * (pt2 - pt).abs();
        // every point of the arc chain moves at most length × total bend change
        prop_assert!((a.position - b.position).norm() <= spec.total_length() * dbend + 1e-12);
        prop_assert!((a.angle - b.angle).abs() <= dbend + 1e-12);
    }

    #[test]
    fn tip_force_vanishes_only_at_free_pose(
        pb in 0.0f64..250e3,
        pt in 0.0f64..250e3,
        dx in -0.02f64..0.02,
        dy in -0.02f64..0.02,
    ) {
        let spec = finger();
        let free = finger_free_pose(&spec, pb, pt).unwrap().position;
        prop_assert_eq!(fingertip_force(&spec, pb, pt, free).unwrap(), Vector2::zeros());
        let d = Vector2::new(dx, dy);
        let f = fingertip_force(&spec, pb, pt, free + d).unwrap();
        prop_assert_eq!(f.norm() == 0.0, d.norm() == 0.0);
        prop_assert!(f.norm() <= spec.max_tip_force + 1e-12);
    }

    #[test]
    fn fit_recovers_synthetic_arms(points in arm_table(), area in 2e-4f64..8e-4) {
        let max_deg = points.last().unwrap().0 + 1.0;
        let mut spec = BellowSpec::new(area, 2, max_deg.to_radians());
        let rows = points
            .iter()
            .flat_map(|(deg, arm)| {
                [50.0, 125.0, 250.0].map(|kpa| CalibrationRow {
                    angle_deg: *deg,
                    pressure_kpa: kpa,
                    torque_nm: kpa * 1e3 * area * arm,
                })
            })
            .collect();
        let table = CalibrationTable::new(rows, "synthetic").unwrap();
        let fitted = fit_moment_arm(&table, &spec).unwrap();
        for ((_, arm), (_, got)) in points.iter().zip(fitted.points()) {
            prop_assert!((arm - got).abs() <= 1e-9 * arm);
        }
        spec.moment_arm_table = fitted;
        for r in &table.rows {
            let tau = bellow_torque(&spec, r.pressure_kpa * 1e3, r.angle_deg.to_radians()).unwrap();
            prop_assert!((tau - r.torque_nm).abs() <= 1e-9 * r.torque_nm.abs().max(1e-9));
        }
        let rebuilt = MomentArmTable::new(points.iter().map(|(d, a)| (d.to_radians(), *a)).collect()).unwrap();
        prop_assert_eq!(rebuilt.points().len(), points.len());
    }

    #[test]
    fn equilibrium_monotone_and_within_limits(
        ch in any_channel(),
        f1 in 0.0f64..1.2,
        f2 in 0.0f64..1.2,
        l1 in -0.2f64..0.5,
        l2 in -0.2f64..0.5,
    ) {
        let model = HandModel::default();
        let limit = model.joint_limit(ch);
        let lo = pneumahand::hand::mass_for_joint(&model, ch, 0.0);
        let hi = pneumahand::hand::mass_for_joint(&model, ch, limit);
        let (ma, mb) = (lo + f1.min(f2) * (hi - lo), lo + f1.max(f2) * (hi - lo));
        let (la, lb) = (l1.min(l2), l1.max(l2));
        let q = |m: f64, l: f64| joint_equilibrium(&model, ch, m, l).unwrap().joint;
        for (m, l) in [(ma, la), (mb, lb), (ma, lb), (mb, la)] {
            let j = q(m, l);
            prop_assert!((0.0..=limit).contains(&j));
        }
        prop_assert!(q(mb, la) >= q(ma, la) - 1e-12);
        prop_assert!(q(ma, lb) <= q(ma, la) + 1e-12);
    }

    /// Scaling a bellow's pouch area and hinge stiffness together with its
    /// air mass leaves the equilibrium angle unchanged.
    #[test]
    fn bellow_equilibrium_scale_invariant(
        ch in bellow_channel(),
        frac in 0.05f64..0.95,
        k in 0.25f64..4.0,
        load in 0.0f64..0.1,
    ) {
        let model = HandModel::default();
        let mass = pneumahand::hand::mass_for_joint(&model, ch, frac * model.joint_limit(ch));
        let base = joint_equilibrium(&model, ch, mass, load).unwrap();
        let mut scaled = model.clone();
        let b = scaled.bellow_mut(ch).unwrap();
        b.bellow.pouch_area *= k;
        b.hinge_stiffness *= k;
        let got = joint_equilibrium(&scaled, ch, k * mass, k * load).unwrap();
        prop_assert!((got.joint - base.joint).abs() <= 1e-9, "{} vs {}", got.joint, base.joint);
        prop_assert!((got.pressure - base.pressure).abs() <= 1e-6 * base.pressure);
    }

    #[test]
    fn forward_kinematics_is_deterministic(fracs in prop::array::uniform16(0.0f64..=1.0)) {
        let model = HandModel::default();
        let limits = model.joint_limits();
        let joints: [f64; CHANNEL_COUNT] = std::array::from_fn(|i| fracs[i] * limits[i]);
        let a = forward_kinematics(&model, &joints).unwrap();
        let b = forward_kinematics(&model, &joints).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.fingertips.iter().chain([&a.thumb_tip]).all(|t| t.translation.vector.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn replay_scales_sample_instants(
        gaps in prop::collection::vec(0.01f64..1.0, 1..20),
        scale in 0.1f64..10.0,
        mass in 0.0f64..1e-4,
    ) {
        let mut t = 0.0;
        let samples: Vec<_> = gaps
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let s = TrajectorySample { t, m: [mass * k as f64; CHANNEL_COUNT] };
                t += g;
                s
            })
            .collect();
        let traj = MassTrajectory::new("scaled", samples).unwrap();
        let played = replay(&traj, scale).unwrap();
        for (a, b) in traj.samples.iter().zip(&played) {
            prop_assert_eq!(a.t * scale, b.t);
            prop_assert_eq!(a.m, b.m);
            prop_assert_eq!(traj.setpoint_at(b.t, scale), a.m);
        }
    }

    #[test]
    fn trajectory_file_round_trip(
        rows in prop::collection::vec((1e-6f64..1.0, prop::array::uniform16(0.0f64..1e-3)), 1..30),
        name in "[A-Za-z][A-Za-z0-9 _-]{0,20}",
        seed in any::<u64>(),
    ) {
        let mut t = 0.0;
        let samples = rows
            .into_iter()
            .map(|(g, m)| {
                let s = TrajectorySample { t, m };
                t += g;
                s
            })
            .collect();
        let traj = MassTrajectory::new(name, samples).unwrap().with_author("tester", "2026-01-01T00:00:00Z");
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj, "digest", seed).unwrap();
        let (header, back) = read_trajectory(Cursor::new(buf), Path::new("mem.jsonl")).unwrap();
        prop_assert_eq!(header.seed, seed);
        prop_assert_eq!(back, traj);
    }
}
