//! Bench characterization of the single actuators: the two-compartment
//! finger on a pressure grid and the bellows on an angle-pressure grid.

use nalgebra::Vector2;

use crate::actuators::{finger_free_pose, fingertip_force, TwoCompartmentFingerSpec};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::hand::{Actuator, ChannelId, Finger};
use crate::par;

use super::report::{ExperimentReport, ReportRow, Stat, Verdict};
use super::{realized_pressure, NoiseKey};

/// Chamber pressures of the finger grid, kPa.
pub const FINGER_PRESSURES_KPA: [f64; 6] = [0.0, 50.0, 100.0, 150.0, 200.0, 250.0];
/// Fixed hinge angles of the bellow rig, degrees.
pub const BELLOW_ANGLES_DEG: [f64; 5] = [20.0, 40.0, 60.0, 80.0, 100.0];
/// Supply pressures of the bellow rig, kPa.
pub const BELLOW_PRESSURES_KPA: [f64; 5] = [50.0, 100.0, 150.0, 200.0, 250.0];
/// Lever arm of the bellow force sensor, m.
pub const BELLOW_LEVER: f64 = 0.05;
/// Expected torques at (20°, 250 kPa) for the thumb bellows, N·m.
pub const BELLOW_ANCHORS: [(ChannelId, f64); 3] = [
    (ChannelId::ThumbProximal, 4.4),
    (ChannelId::ThumbMiddle, 3.2),
    (ChannelId::ThumbDistal, 1.9),
];
/// Expected fingertip force at the extended constraint, N.
pub const FINGER_FORCE_ANCHOR: f64 = 8.3;

const FINGER_QUANTITIES: [&str; 5] = ["free_x", "free_y", "force_base", "force_tip", "force_both"];

fn cross(o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Area of the convex hull of `points` (monotone chain).
pub fn hull_area(points: &[Vector2<f64>]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let mut hull: Vec<Vector2<f64>> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], *p) <= 0.0
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| hull[i].x * hull[(i + 1) % n].y - hull[(i + 1) % n].x * hull[i].y)
        .sum::<f64>()
        .abs()
        / 2.0
}

struct FingerCell {
    free: Vec<Vector2<f64>>,
    forces: [Vec<f64>; 3],
}

fn finger_cell(
    cfg: &Config,
    spec: &TwoCompartmentFingerSpec,
    cell: u64,
    pb: f64,
    pt: f64,
) -> Result<FingerCell> {
    let reps = cfg.experiments.repetitions as u64;
    let sensor = &cfg.sensor;
    let (max_b, max_t) = (spec.base.max_pressure, spec.tip.max_pressure);
    let mut out = FingerCell {
        free: Vec::new(),
        forces: [Vec::new(), Vec::new(), Vec::new()],
    };
    for rep in 0..reps {
        let key = |slot: u64| NoiseKey::new(cfg.seed, cell, rep * 8 + slot);
        let pre_b = realized_pressure(pb, max_b, sensor, key(0));
        let pre_t = realized_pressure(pt, max_t, sensor, key(1));
        // a chamber already at full pressure keeps its realization
        let post_b = if pb == max_b {
            pre_b
        } else {
            realized_pressure(max_b, max_b, sensor, key(2))
        };
        let post_t = if pt == max_t {
            pre_t
        } else {
            realized_pressure(max_t, max_t, sensor, key(3))
        };
        let pinned = finger_free_pose(spec, pre_b, pre_t)?.position;
        out.free.push(pinned);
        for (k, (b, t)) in [(post_b, pre_t), (pre_b, post_t), (post_b, post_t)]
            .into_iter()
            .enumerate()
        {
            out.forces[k].push(fingertip_force(spec, b, t, pinned)?.norm());
        }
    }
    Ok(out)
}

/// Free tip positions over the 6×6 pressure grid, and tip forces against a
/// constraint at the pre-inflation position for the three maximum-inflation
/// cases.
pub fn run_finger_characterization(cfg: &Config, finger: Finger) -> Result<ExperimentReport> {
    cfg.model.validate()?;
    let spec = *cfg.model.finger(finger);
    let grid: Vec<(f64, f64)> = FINGER_PRESSURES_KPA
        .iter()
        .flat_map(|b| FINGER_PRESSURES_KPA.iter().map(move |t| (*b, *t)))
        .collect();
    let cells = par::map_range(cfg.experiments.execution, grid.len(), |i| {
        let (b, t) = grid[i];
        finger_cell(cfg, &spec, i as u64, b * 1e3, t * 1e3)
    });

    let mut report = ExperimentReport::new(
        format!("finger_characterization/{}", finger.name()),
        cfg.seed,
        cfg.digest(),
        cfg.experiments.repetitions,
    );
    report.parameters = vec!["p_base_kpa".into(), "p_tip_kpa".into()];
    report.quantities = FINGER_QUANTITIES.iter().map(|s| s.to_string()).collect();
    let mut hull = Vec::new();
    for ((b, t), cell) in grid.iter().zip(cells) {
        let cell = cell?;
        let xs: Vec<f64> = cell.free.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = cell.free.iter().map(|p| p.y).collect();
        let (sx, sy) = (Stat::of(&xs), Stat::of(&ys));
        hull.push(Vector2::new(sx.mean, sy.mean));
        let mut values = vec![sx, sy];
        values.extend(cell.forces.iter().map(|f| Stat::of(f)));
        report.rows.push(ReportRow {
            params: vec![*b, *t],
            values,
        });
    }
    report
        .summary
        .insert("workspace_area_m2".into(), hull_area(&hull));
    report
        .summary
        .insert("tip_stiffness_n_per_m".into(), spec.tip_stiffness);

    let top = *FINGER_PRESSURES_KPA.last().unwrap();
    let extended = report.value(&[0.0, 0.0], "force_both").unwrap();
    let flexed = report.value(&[top, top], "force_both").unwrap();
    let max_std = ["force_base", "force_tip", "force_both"]
        .iter()
        .map(|q| report.max_std(q))
        .fold(0.0, f64::max);
    report.verdicts = vec![
        Verdict::within(
            "extended_force_n",
            FINGER_FORCE_ANCHOR,
            extended.mean,
            0.02 * FINGER_FORCE_ANCHOR,
        ),
        Verdict::within("flexed_force_n", 0.0, flexed.mean, 1e-12),
        Verdict::at_most("max_force_std_n", 0.1, max_std),
        Verdict::holds("grid_has_36_cells", report.rows.len() == 36),
    ];
    report.validate()?;
    Ok(report)
}

/// Least-squares line `y = slope * x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Torque of one bellow on the fixed-angle rig over the 5×5 grid.
pub fn run_bellow_characterization(cfg: &Config, channel: ChannelId) -> Result<ExperimentReport> {
    cfg.model.validate()?;
    let Actuator::Bellow(joint) = cfg.model.actuator(channel) else {
        return Err(Error::domain(format!("{channel} is not a bellow")));
    };
    let bellow = &joint.bellow;
    let grid: Vec<(f64, f64)> = BELLOW_ANGLES_DEG
        .iter()
        .flat_map(|a| BELLOW_PRESSURES_KPA.iter().map(move |p| (*a, *p)))
        .collect();
    let reps = cfg.experiments.repetitions as u64;
    let cells = par::map_range(cfg.experiments.execution, grid.len(), |i| {
        let (a, p) = grid[i];
        let torques: Vec<f64> = (0..reps)
            .map(|rep| {
                let key =
                    NoiseKey::new(cfg.seed, 1000 + channel.code() as u64 * 100 + i as u64, rep);
                let pr = realized_pressure(p * 1e3, bellow.max_pressure, &cfg.sensor, key);
                // the rig pins the hinge, so the joint limit does not apply
                let force = bellow.torque_unchecked(pr, a.to_radians()) / BELLOW_LEVER;
                force * BELLOW_LEVER
            })
            .collect();
        Stat::of(&torques)
    });

    let mut report = ExperimentReport::new(
        format!("bellow_characterization/{}", channel.name()),
        cfg.seed,
        cfg.digest(),
        cfg.experiments.repetitions,
    );
    report.parameters = vec!["angle_deg".into(), "pressure_kpa".into()];
    report.quantities = vec!["torque_nm".into()];
    for ((a, p), s) in grid.iter().zip(&cells) {
        report.rows.push(ReportRow {
            params: vec![*a, *p],
            values: vec![*s],
        });
    }
    let max_torque = cells.iter().map(|s| s.mean).fold(0.0, f64::max);
    let mut worst_intercept: f64 = 0.0;
    for (k, a) in BELLOW_ANGLES_DEG.iter().enumerate() {
        let ps: Vec<f64> = BELLOW_PRESSURES_KPA.iter().map(|p| p * 1e3).collect();
        let ts: Vec<f64> = cells[k * 5..k * 5 + 5].iter().map(|s| s.mean).collect();
        let (slope, intercept) = fit_line(&ps, &ts);
        report
            .summary
            .insert(format!("slope_{a}deg_nm_per_pa"), slope);
        report
            .summary
            .insert(format!("intercept_{a}deg_nm"), intercept);
        report.summary.insert(
            format!("slope_per_area_{a}deg_m"),
            slope / bellow.pouch_area,
        );
        worst_intercept = worst_intercept.max(intercept.abs());
    }
    report
        .summary
        .insert("pouch_area_m2".into(), bellow.pouch_area);
    if let Some((_, anchor)) = BELLOW_ANCHORS.iter().find(|(c, _)| *c == channel) {
        let got = report.value(&[20.0, 250.0], "torque_nm").unwrap().mean;
        report.verdicts.push(Verdict::within(
            "anchor_torque_nm",
            *anchor,
            got,
            0.02 * anchor,
        ));
    }
    report.verdicts.push(Verdict::at_most(
        "max_abs_intercept_nm",
        0.01 * max_torque,
        worst_intercept,
    ));
    let max_std = report.max_std("torque_nm");
    report.verdicts.push(Verdict {
        name: "max_torque_std_nm".into(),
        expected: 0.1,
        actual: max_std,
        tolerance: 0.0,
        pass: max_std < 0.1,
    });
    report
        .verdicts
        .push(Verdict::holds("grid_has_25_cells", report.rows.len() == 25));
    report.validate()?;
    Ok(report)
}
