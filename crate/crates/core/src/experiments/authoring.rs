//! Scripted posture authoring: bounded least-squares inverse kinematics over
//! a chosen subset of joints.

use nalgebra::{DMatrix, DVector, Point3, Vector3};

use crate::hand::{
    kapandji_targets, on_ulnar_scaffold, target_finger, thumb_tip_point, ChannelId, HandModel,
    Joints, CHANNEL_COUNT, KAPANDJI_TARGETS,
};

/// Thumb tip aim point sits this far off the target surface, m.
pub const AIM_OFFSET: f64 = 0.001;

/// Palm-bellow range used for targets on the ulnar scaffold, rad.
pub const ULNAR_PALM_RANGE_DEG: (f64, f64) = (15.0, 30.0);

#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub channel: ChannelId,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub joints: Joints,
    /// Residual norm at the solution, m.
    pub error: f64,
}

/// Projected Levenberg-Marquardt on `residual(joints)` over the bounded
/// channels; other channels stay at `base`.
pub fn solve_bounded<F>(base: &Joints, bounds: &[Bound], start: &[f64], residual: F) -> IkSolution
where
    F: Fn(&Joints) -> Vector3<f64>,
{
    let n = bounds.len();
    let assemble = |x: &DVector<f64>| {
        let mut q = *base;
        for (b, v) in bounds.iter().zip(x.iter()) {
            q[b.channel.index()] = *v;
        }
        q
    };
    let clamp = |x: &mut DVector<f64>| {
        for (v, b) in x.iter_mut().zip(bounds) {
            *v = v.clamp(b.lo, b.hi);
        }
    };
    let mut x = DVector::from_column_slice(start);
    clamp(&mut x);
    let mut r = residual(&assemble(&x));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if cost < 1e-16 {
            break;
        }
        let mut jac = DMatrix::zeros(3, n);
        for j in 0..n {
            let h = 1e-7;
            let mut xp = x.clone();
            xp[j] = (x[j] + h).min(bounds[j].hi);
            let mut xm = x.clone();
            xm[j] = (x[j] - h).max(bounds[j].lo);
            let span = xp[j] - xm[j];
            if span <= 0.0 {
                continue;
            }
            let d = (residual(&assemble(&xp)) - residual(&assemble(&xm))) / span;
            jac.set_column(j, &d);
        }
        let rv = DVector::from_column_slice(r.as_slice());
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn = &x + step;
            clamp(&mut xn);
            let rn = residual(&assemble(&xn));
            let cn = rn.norm_squared();
            if cn < cost {
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    IkSolution {
        joints: assemble(&x),
        error: cost.sqrt(),
    }
}

fn thumb_bounds(model: &HandModel) -> Vec<Bound> {
    [
        ChannelId::ThumbProximal,
        ChannelId::ThumbMiddle,
        ChannelId::ThumbDistal,
        ChannelId::ThumbTip,
    ]
    .map(|c| Bound {
        channel: c,
        lo: 0.0,
        hi: model.joint_limit(c),
    })
    .to_vec()
}

/// Bounded variables for reaching Kapandji target `number`.
pub fn kapandji_bounds(model: &HandModel, number: usize) -> Vec<Bound> {
    let mut b = thumb_bounds(model);
    if let Some(f) = target_finger(number) {
        for c in [f.base_channel(), f.tip_channel()] {
            b.push(Bound {
                channel: c,
                lo: 0.0,
                hi: model.joint_limit(c),
            });
        }
    }
    if on_ulnar_scaffold(number) {
        let (lo, hi) = ULNAR_PALM_RANGE_DEG;
        b.push(Bound {
            channel: ChannelId::PalmBellow,
            lo: lo.to_radians(),
            hi: hi
                .to_radians()
                .min(model.joint_limit(ChannelId::PalmBellow)),
        });
    }
    b
}

/// Where the thumb tip should sit for target `number` at joints `q`.
pub fn kapandji_aim(model: &HandModel, q: &Joints, number: usize) -> Point3<f64> {
    let t = kapandji_targets(model, q)[number - 1];
    t.point + t.normal * AIM_OFFSET
}

/// Joint posture touching Kapandji target `number` (1-based), from a
/// deterministic multi-start search.
pub fn author_kapandji(model: &HandModel, number: usize) -> IkSolution {
    assert!((1..=KAPANDJI_TARGETS).contains(&number));
    let bounds = kapandji_bounds(model, number);
    let base = [0.0; CHANNEL_COUNT];
    let residual = |q: &Joints| thumb_tip_point(model, q) - kapandji_aim(model, q, number);
    let fracs = [0.15, 0.5, 0.85];
    let mut best: Option<IkSolution> = None;
    let thumb_starts = fracs.len().pow(4);
    for s in 0..thumb_starts {
        let start: Vec<f64> = bounds
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let frac = if k < 4 {
                    fracs[(s / fracs.len().pow(k as u32)) % fracs.len()]
                } else {
                    0.5
                };
                b.lo + frac * (b.hi - b.lo)
            })
            .collect();
        let sol = solve_bounded(&base, &bounds, &start, residual);
        if best.is_none_or(|b| sol.error < b.error) {
            best = Some(sol);
        }
        if sol.error < 1e-6 {
            break;
        }
    }
    best.expect("at least one start")
}
