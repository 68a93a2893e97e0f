//! Quasi-static models of the two actuator families: PneuFlex bending
//! compartments (constant-curvature arcs) and fabric bellows acting across a
//! hinge.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One inflatable PneuFlex compartment, modelled as a constant-curvature arc
/// whose bend angle is linear in gauge pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PneuFlexCompartmentSpec {
    /// m
    pub arc_length: f64,
    /// Pa gauge
    pub max_pressure: f64,
    /// rad/Pa
    pub pressure_to_bend_gain: f64,
    /// N·m/rad, resists bending away from the free bend.
    pub bend_stiffness: f64,
    /// m³
    pub rest_volume: f64,
    /// m³/rad
    pub volume_per_bend: f64,
}

impl PneuFlexCompartmentSpec {
    /// Builds a compartment that reaches `max_free_bend` at `max_pressure`.
    pub fn with_max_bend(arc_length: f64, max_free_bend: f64, max_pressure: f64) -> Self {
        Self {
            arc_length,
            max_pressure,
            pressure_to_bend_gain: max_free_bend / max_pressure,
            bend_stiffness: 0.05,
            rest_volume: 160e-6 * arc_length,
            volume_per_bend: 40e-6 * arc_length,
        }
    }

    pub fn max_free_bend(&self) -> f64 {
        self.pressure_to_bend_gain * self.max_pressure
    }

    /// Free bend angle at gauge pressure `p`.
    pub fn bend_at(&self, p: f64) -> Result<f64> {
        if !(0.0..=self.max_pressure).contains(&p) {
            return Err(Error::domain(format!(
                "compartment pressure {p} Pa outside [0, {}]",
                self.max_pressure
            )));
        }
        Ok(self.pressure_to_bend_gain * p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.arc_length > 0.0
            && self.max_pressure > 0.0
            && self.pressure_to_bend_gain >= 0.0
            && self.bend_stiffness >= 0.0
            && self.rest_volume > 0.0
            && self.volume_per_bend >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid compartment spec {self:?}")))
        }
    }
}

/// Chamber volume of a compartment at the given bend.
pub fn compartment_volume(spec: &PneuFlexCompartmentSpec, bend: f64) -> f64 {
    spec.rest_volume + spec.volume_per_bend * bend
}

/// End point of a constant-curvature arc of `length` bent by `bend` rad,
/// starting at the origin tangent to +x and curling toward +y.
pub fn arc_endpoint(length: f64, bend: f64) -> Vector2<f64> {
    if bend.abs() < 1e-9 {
        // second-order series keeps the map smooth through zero
        let b2 = bend * bend;
        Vector2::new(length * (1.0 - b2 / 6.0), length * bend * (0.5 - b2 / 24.0))
    } else {
        Vector2::new(
            length * bend.sin() / bend,
            length * (1.0 - bend.cos()) / bend,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoCompartmentFingerSpec {
    pub base: PneuFlexCompartmentSpec,
    pub tip: PneuFlexCompartmentSpec,
    /// N/m
    pub tip_stiffness: f64,
    /// N
    pub max_tip_force: f64,
}

impl TwoCompartmentFingerSpec {
    /// Calibrates `tip_stiffness` so a finger held at its uninflated pose and
    /// driven to full inflation of both chambers pushes with `max_tip_force`.
    pub fn calibrated(
        base: PneuFlexCompartmentSpec,
        tip: PneuFlexCompartmentSpec,
        max_tip_force: f64,
    ) -> Self {
        let mut spec = Self {
            base,
            tip,
            tip_stiffness: 0.0,
            max_tip_force,
        };
        let rest = spec.free_tip(0.0, 0.0);
        let full = spec.free_tip(base.max_free_bend(), tip.max_free_bend());
        spec.tip_stiffness = max_tip_force / (full - rest).norm();
        spec
    }

    pub fn total_length(&self) -> f64 {
        self.base.arc_length + self.tip.arc_length
    }

    fn free_tip(&self, base_bend: f64, tip_bend: f64) -> Vector2<f64> {
        compose_arcs(
            self.base.arc_length,
            base_bend,
            self.tip.arc_length,
            tip_bend,
        )
        .position
    }
}

/// Planar fingertip pose in the finger's bending plane: x along the
/// unbent finger, y toward the flexion side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipPose {
    pub position: Vector2<f64>,
    /// Tangent angle of the fingertip, rad.
    pub angle: f64,
}

pub(crate) fn compose_arcs(base_len: f64, base_bend: f64, tip_len: f64, tip_bend: f64) -> TipPose {
    let p1 = arc_endpoint(base_len, base_bend);
    let p2 = arc_endpoint(tip_len, tip_bend);
    let (s, c) = base_bend.sin_cos();
    let rotated = Vector2::new(c * p2.x - s * p2.y, s * p2.x + c * p2.y);
    TipPose {
        position: p1 + rotated,
        angle: base_bend + tip_bend,
    }
}

pub fn finger_free_pose(
    spec: &TwoCompartmentFingerSpec,
    p_base: f64,
    p_tip: f64,
) -> Result<TipPose> {
    let base_bend = spec.base.bend_at(p_base)?;
    let tip_bend = spec.tip.bend_at(p_tip)?;
    Ok(compose_arcs(
        spec.base.arc_length,
        base_bend,
        spec.tip.arc_length,
        tip_bend,
    ))
}

/// Force on an obstacle pinning the fingertip at `constrained_tip`.
///
/// Linear Cartesian spring toward the free pose, magnitude clamped at
/// `max_tip_force`.
pub fn fingertip_force(
    spec: &TwoCompartmentFingerSpec,
    p_base: f64,
    p_tip: f64,
    constrained_tip: Vector2<f64>,
) -> Result<Vector2<f64>> {
    let free = finger_free_pose(spec, p_base, p_tip)?;
    Ok(spring_force(spec, free.position - constrained_tip))
}

pub(crate) fn spring_force(
    spec: &TwoCompartmentFingerSpec,
    displacement: Vector2<f64>,
) -> Vector2<f64> {
    clamp_norm(displacement * spec.tip_stiffness, spec.max_tip_force)
}

pub(crate) fn clamp_norm<const D: usize>(
    v: nalgebra::SVector<f64, D>,
    max: f64,
) -> nalgebra::SVector<f64, D> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Piecewise-linear effective moment arm as a function of opening angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct MomentArmTable {
    /// (opening angle rad, arm m), angles strictly increasing.
    points: Vec<(f64, f64)>,
}

impl MomentArmTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("moment arm table is empty"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::domain(
                    "moment arm table angles must strictly increase",
                ));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::domain("moment arm must not increase with angle"));
            }
        }
        if points.iter().any(|&(_, a)| !(a > 0.0)) {
            return Err(Error::domain("moment arms must be positive"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Effective arm at `angle`; clamps to the end values outside the table.
    pub fn arm(&self, angle: f64) -> f64 {
        let pts = &self.points;
        if angle <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if angle >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|&(a, _)| a <= angle);
        let (a0, r0) = pts[i - 1];
        let (a1, r1) = pts[i];
        r0 + (r1 - r0) * (angle - a0) / (a1 - a0)
    }

    /// ∫₀^angle arm(φ) dφ, exact for the piecewise-linear interpolant.
    pub fn integral(&self, angle: f64) -> f64 {
        if angle <= 0.0 {
            return 0.0;
        }
        let mut knots: Vec<f64> = vec![0.0];
        knots.extend(
            self.points
                .iter()
                .map(|&(a, _)| a)
                .filter(|&a| a > 0.0 && a < angle),
        );
        knots.push(angle);
        knots
            .windows(2)
            .map(|w| 0.5 * (self.arm(w[0]) + self.arm(w[1])) * (w[1] - w[0]))
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|&(a, r)| (a, r * factor)).collect(),
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for MomentArmTable {
    type Error = Error;

    fn try_from(rows: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(|[deg, arm]| (deg.to_radians(), arm))
                .collect(),
        )
    }
}

impl From<MomentArmTable> for Vec<[f64; 2]> {
    fn from(t: MomentArmTable) -> Self {
        t.points
            .into_iter()
            .map(|(a, r)| [a.to_degrees(), r])
            .collect()
    }
}

impl Default for MomentArmTable {
    /// Shared arm profile of the thumb bellows.
    fn default() -> Self {
        Self::new(
            [
                (0.0, 0.030),
                (20.0, 0.028),
                (40.0, 0.024),
                (60.0, 0.019),
                (80.0, 0.013),
                (100.0, 0.007),
            ]
            .into_iter()
            .map(|(d, r): (f64, f64)| (d.to_radians(), r))
            .collect(),
        )
        .expect("default table is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellowSpec {
    /// m², planform area of one pouch.
    pub pouch_area: f64,
    pub pouch_count: u32,
    /// Pa gauge
    pub max_pressure: f64,
    /// Rows of `[opening angle deg, arm m]`.
    pub moment_arm_table: MomentArmTable,
    /// rad
    pub max_opening: f64,
    /// m
    pub deflated_thickness: f64,
}

impl BellowSpec {
    pub fn new(pouch_area: f64, pouch_count: u32, max_opening: f64) -> Self {
        Self {
            pouch_area,
            pouch_count,
            max_pressure: 300e3,
            moment_arm_table: MomentArmTable::default(),
            max_opening,
            deflated_thickness: 0.002,
        }
    }

    /// Air volume at `opening`. The swept part follows from virtual work:
    /// dV/dθ = τ/p = area · arm(θ).
    pub fn chamber_volume(&self, opening: f64) -> f64 {
        self.pouch_area
            * (self.pouch_count as f64 * self.deflated_thickness
                + self.moment_arm_table.integral(opening))
    }

    /// Torque without range checks, used inside the equilibrium solver.
    pub(crate) fn torque_unchecked(&self, p: f64, opening: f64) -> f64 {
        p * self.pouch_area * self.moment_arm_table.arm(opening)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pouch_area > 0.0
            && self.pouch_count >= 1
            && self.max_pressure > 0.0
            && self.max_opening > 0.0)
        {
            return Err(Error::domain(format!("invalid bellow spec {self:?}")));
        }
        Ok(())
    }
}

/// Hinge torque of a bellow at gauge pressure `p` and `opening_angle`.
pub fn bellow_torque(spec: &BellowSpec, p: f64, opening_angle: f64) -> Result<f64> {
    if !(0.0..=spec.max_pressure).contains(&p) {
        return Err(Error::domain(format!(
            "bellow pressure {p} Pa outside [0, {}]",
            spec.max_pressure
        )));
    }
    if !(0.0..=spec.max_opening).contains(&opening_angle) {
        return Err(Error::domain(format!(
            "opening angle {opening_angle} rad outside [0, {}]",
            spec.max_opening
        )));
    }
    Ok(spec.torque_unchecked(p, opening_angle))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub angle_deg: f64,
    pub pressure_kpa: f64,
    pub torque_nm: f64,
}

/// Measured torques over a rectangular (angle, pressure) grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub rows: Vec<CalibrationRow>,
    pub provenance: String,
}

fn key(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

impl CalibrationTable {
    pub fn new(rows: Vec<CalibrationRow>, provenance: impl Into<String>) -> Result<Self> {
        let t = Self {
            rows,
            provenance: provenance.into(),
        };
        t.validate()?;
        Ok(t)
    }

    /// Rows grouped by angle, each sorted by pressure.
    pub fn by_angle(&self) -> BTreeMap<i64, Vec<CalibrationRow>> {
        let mut m: BTreeMap<i64, Vec<CalibrationRow>> = BTreeMap::new();
        for r in &self.rows {
            m.entry(key(r.angle_deg)).or_default().push(*r);
        }
        for v in m.values_mut() {
            v.sort_by(|a, b| a.pressure_kpa.total_cmp(&b.pressure_kpa));
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let groups = self.by_angle();
        let mut pressure_sets = groups
            .values()
            .map(|rows| rows.iter().map(|r| key(r.pressure_kpa)).collect::<Vec<_>>());
        if let Some(first) = pressure_sets.next() {
            for set in pressure_sets {
                if set != first {
                    return Err(Error::format("calibration grid is not rectangular"));
                }
            }
            let mut dedup = first.clone();
            dedup.dedup();
            if dedup.len() != first.len() {
                return Err(Error::format(
                    "duplicate (angle, pressure) key in calibration table",
                ));
            }
        }
        if self.rows.iter().any(|r| {
            !(r.angle_deg.is_finite() && r.pressure_kpa.is_finite() && r.torque_nm.is_finite())
        }) {
            return Err(Error::format("non-finite value in calibration table"));
        }
        Ok(())
    }

    /// Reads `angle_deg,pressure_kpa,torque_nm` rows; `#` lines are comments.
    pub fn read_csv<R: Read>(reader: R, provenance: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let want = ["angle_deg", "pressure_kpa", "torque_nm"];
        if headers.iter().take(3).ne(want.iter().copied()) {
            return Err(Error::format(format!(
                "calibration header must start with {}, got {}",
                want.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
            let field = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| {
                        Error::format(format!("line {line}: missing column {}", want[j]))
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::format(format!("line {line}: {}: {e}", want[j])))
            };
            rows.push(CalibrationRow {
                angle_deg: field(0)?,
                pressure_kpa: field(1)?,
                torque_nm: field(2)?,
            });
        }
        Self::new(rows, provenance)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["angle_deg", "pressure_kpa", "torque_nm"])?;
        for r in &self.rows {
            w.write_record([
                r.angle_deg.to_string(),
                r.pressure_kpa.to_string(),
                r.torque_nm.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits the effective moment arm at every tabulated angle by least squares
/// through the origin of torque against pressure × pouch area.
pub fn fit_moment_arm(table: &CalibrationTable, spec: &BellowSpec) -> Result<MomentArmTable> {
    table.validate()?;
    let groups = table.by_angle();
    if groups.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 angles, got {}",
            groups.len()
        )));
    }
    let mut points = Vec::with_capacity(groups.len());
    for rows in groups.values() {
        if rows.len() < 2 {
            return Err(Error::Fit(format!(
                "angle {} deg has a single pressure",
                rows[0].angle_deg
            )));
        }
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for r in rows {
            let x = r.pressure_kpa * 1e3 * spec.pouch_area;
            sxy += x * r.torque_nm;
            sxx += x * x;
        }
        if sxx == 0.0 {
            return Err(Error::Fit(format!(
                "angle {} deg has only zero pressures",
                rows[0].angle_deg
            )));
        }
        let arm = sxy / sxx;
        if !(arm > 0.0) {
            return Err(Error::Fit(format!(
                "non-positive arm {arm} at {} deg",
                rows[0].angle_deg
            )));
        }
        points.push((rows[0].angle_deg, arm));
    }
    let offending: Vec<f64> = points
        .windows(2)
        .filter(|w| w[1].1 > w[0].1 * 1.05)
        .map(|w| w[1].0)
        .collect();
    if !offending.is_empty() {
        return Err(Error::NonMonotoneArm {
            angles_deg: offending,
        });
    }
    // Increases within the 5% tolerance are flattened so the table stays
    // non-increasing.
    let mut prev = f64::INFINITY;
    let points = points
        .into_iter()
        .map(|(deg, arm)| {
            let arm = arm.min(prev);
            prev = arm;
            (deg.to_radians(), arm)
        })
        .collect();
    MomentArmTable::new(points)
}
