//! Hand-level evaluations: the Kapandji opposition score and the repeated
//! replay of every library entry.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::Result;
use crate::hand::{hand_equilibrium, ChannelId, ExternalLoad, HandModel, Joints, KAPANDJI_TARGETS};
use crate::par;
use crate::sim::replay_to_rest;

use super::library::{EntryKind, PostureLibrary};
use super::report::{ExperimentReport, ReportRow, Stat, Verdict};

/// Pose distance below which two taxonomy postures count as duplicates, rad.
pub const DISTINCT_THRESHOLD: f64 = 1e-3;
/// Consecutive replays per library entry.
pub const LIBRARY_TRIALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KapandjiOutcome {
    pub score: usize,
    /// Thumb tip to target, m; `None` when the posture is missing.
    pub distances: [Option<f64>; KAPANDJI_TARGETS],
    pub tolerance: f64,
}

/// Settles each Kapandji posture's final masses quasi-statically and
/// measures the thumb tip against its target. `palm_disabled` forces the
/// palm-bellow mass to zero.
pub fn run_kapandji(
    model: &HandModel,
    library: &PostureLibrary,
    tolerance: f64,
    palm_disabled: bool,
) -> Result<KapandjiOutcome> {
    let mut distances = [None; KAPANDJI_TARGETS];
    for (i, d) in distances.iter_mut().enumerate() {
        let Some(entry) = library.kapandji(i + 1) else {
            continue;
        };
        entry.trajectory.validate()?;
        let mut masses = entry.trajectory.final_masses();
        if palm_disabled {
            masses[ChannelId::PalmBellow.index()] = 0.0;
        }
        let eq = hand_equilibrium(model, &masses, &ExternalLoad::default())?;
        *d = Some((eq.pose.thumb_tip_point() - eq.pose.kapandji_targets[i]).norm());
    }
    let score = distances
        .iter()
        .flatten()
        .filter(|d| **d <= tolerance)
        .count();
    Ok(KapandjiOutcome {
        score,
        distances,
        tolerance,
    })
}

pub fn kapandji_report(cfg: &Config, library: &PostureLibrary) -> Result<ExperimentReport> {
    let tol = cfg.experiments.kapandji_tolerance;
    let full = run_kapandji(&cfg.model, library, tol, false)?;
    let ablated = run_kapandji(&cfg.model, library, tol, true)?;
    let mut r = ExperimentReport::new("kapandji", cfg.seed, cfg.digest(), 1);
    r.parameters = vec!["target".into()];
    r.quantities = vec![
        "distance_m".into(),
        "reached".into(),
        "distance_palm_disabled_m".into(),
    ];
    for i in 0..KAPANDJI_TARGETS {
        let d = full.distances[i].unwrap_or(f64::NAN);
        let reached = if d <= tol { 1.0 } else { 0.0 };
        let s = |v: f64| Stat { mean: v, std: 0.0 };
        r.rows.push(ReportRow {
            params: vec![(i + 1) as f64],
            values: vec![
                s(d),
                s(reached),
                s(ablated.distances[i].unwrap_or(f64::NAN)),
            ],
        });
        if full.distances[i].is_none() {
            r.notes
                .push(format!("target {} has no posture in the library", i + 1));
        }
    }
    r.summary.insert("score".into(), full.score as f64);
    r.summary
        .insert("score_palm_disabled".into(), ablated.score as f64);
    r.summary.insert("tolerance_m".into(), tol);
    r.verdicts = vec![
        Verdict::within("score", KAPANDJI_TARGETS as f64, full.score as f64, 0.0),
        Verdict::at_most("score_palm_disabled", 4.0, ablated.score as f64),
    ];
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResult {
    pub name: String,
    pub kind: EntryKind,
    /// Replay error, if any trial failed.
    pub error: Option<String>,
    pub bit_identical: bool,
    pub final_joints: Option<Joints>,
}

impl EntryResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.bit_identical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryReport {
    pub entries: Vec<EntryResult>,
    /// Names of the taxonomy entries, in matrix order.
    pub taxonomy: Vec<String>,
    /// Pairwise joint-space distances between taxonomy final poses, rad.
    pub distances: Vec<Vec<f64>>,
    /// Taxonomy pairs closer than [`DISTINCT_THRESHOLD`].
    pub duplicates: Vec<(String, String)>,
}

impl LibraryReport {
    pub fn passed_count(&self) -> usize {
        self.entries.iter().filter(|e| e.passed()).count()
    }

    pub fn passed(&self) -> bool {
        self.passed_count() == self.entries.len() && self.duplicates.is_empty()
    }

    pub fn to_experiment_report(&self, cfg: &Config) -> ExperimentReport {
        let mut r = ExperimentReport::new("library", cfg.seed, cfg.digest(), LIBRARY_TRIALS as u32);
        r.parameters = vec!["entry".into()];
        r.quantities = vec![
            "passed".into(),
            "bit_identical".into(),
            "min_distance_rad".into(),
        ];
        for (k, e) in self.entries.iter().enumerate() {
            let t = self.taxonomy.iter().position(|n| *n == e.name);
            let min_d = t.map_or(f64::NAN, |t| {
                self.distances[t]
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != t)
                    .map(|(_, d)| *d)
                    .fold(f64::INFINITY, f64::min)
            });
            let s = |v: f64| Stat { mean: v, std: 0.0 };
            r.rows.push(ReportRow {
                params: vec![k as f64],
                values: vec![
                    s(e.passed() as u8 as f64),
                    s(e.bit_identical as u8 as f64),
                    s(min_d),
                ],
            });
            r.notes.push(match &e.error {
                Some(err) => format!("entry {k} `{}`: {err}", e.name),
                None => format!("entry {k} `{}`", e.name),
            });
        }
        for (a, b) in &self.duplicates {
            r.notes.push(format!("duplicate postures `{a}` and `{b}`"));
        }
        r.summary
            .insert("entries".into(), self.entries.len() as f64);
        r.summary
            .insert("passed".into(), self.passed_count() as f64);
        r.verdicts = vec![
            Verdict::within(
                "entries_passed",
                self.entries.len() as f64,
                self.passed_count() as f64,
                0.0,
            ),
            Verdict::holds("taxonomy_pairwise_distinct", self.duplicates.is_empty()),
        ];
        r
    }
}

fn replay_entry(
    cfg: &Config,
    trajectory: &crate::control::MassTrajectory,
) -> Result<Vec<crate::hand::HandEquilibrium>> {
    trajectory.validate()?;
    let sim = cfg.sim();
    (0..LIBRARY_TRIALS)
        .map(|_| replay_to_rest(&cfg.model, &sim, trajectory, 1.0, cfg.experiments.settle))
        .collect()
}

/// Replays every entry [`LIBRARY_TRIALS`] times through the closed loop and
/// checks determinism and distinctness of the taxonomy postures.
pub fn validate_library(cfg: &Config, library: &PostureLibrary) -> LibraryReport {
    let results = par::map(cfg.experiments.execution, &library.entries, |e| {
        let name = e.name().to_string();
        match replay_entry(cfg, &e.trajectory) {
            Ok(runs) => EntryResult {
                name,
                kind: e.kind,
                error: None,
                bit_identical: runs.windows(2).all(|w| w[0] == w[1]),
                final_joints: Some(runs[0].pose.joints),
            },
            Err(err) => EntryResult {
                name: name.clone(),
                kind: e.kind,
                error: Some(format!("{name}: {err}")),
                bit_identical: false,
                final_joints: None,
            },
        }
    });
    let tax: Vec<&EntryResult> = results
        .iter()
        .filter(|e| matches!(e.kind, EntryKind::Taxonomy { .. }))
        .collect();
    let n = tax.len();
    let mut distances = vec![vec![0.0; n]; n];
    let mut duplicates = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = match (&tax[i].final_joints, &tax[j].final_joints) {
                (Some(a), Some(b)) => a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt(),
                _ => f64::NAN,
            };
            distances[i][j] = d;
            distances[j][i] = d;
            if !(d > DISTINCT_THRESHOLD) {
                duplicates.push((tax[i].name.clone(), tax[j].name.clone()));
            }
        }
    }
    LibraryReport {
        taxonomy: tax.iter().map(|e| e.name.clone()).collect(),
        entries: results,
        distances,
        duplicates,
    }
}
